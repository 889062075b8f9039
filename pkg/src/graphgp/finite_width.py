"""Finite-width Monte-Carlo check of the infinite-width covariances.

Draws networks with iid Gaussian weights W ~ N(0, sigma_w^2 / fan_in) and
biases b ~ N(0, sigma_b^2), runs the forward pass on the node features, and
averages z z^T over samples and over the width of the final pre-activation
layer.  As the width grows the pooled estimate converges to the analytic
kernel at the usual 1/sqrt(width) Monte-Carlo rate.

Randomness is organized as one child seed sequence per (sample, layer), so
results are bit-reproducible for a fixed seed regardless of how the sample
loop might later be scheduled.

The gcnii surrogate draws an independent Gaussian lift of the features for
the skip branch of every layer (and one more for the recursion base); the
analytic rule adds the skip as an independent branch, and sharing one lift
would introduce cross-covariances the rule deliberately drops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjacency import SparseAdjacency

MC_ARCHITECTURES = ("gcn", "gcnii", "gin", "sage", "mlp")


@dataclass(frozen=True)
class McConfig:
    """Sampling plan for the finite-width surrogate."""

    architecture: str
    depth: int
    width: int
    n_samples: int
    seed: int
    sigma_b: float = 0.0
    sigma_w: float = 1.0
    alpha: float = 0.1
    beta_schedule: tuple = ()
    sigma_w1: float = 0.0
    sigma_w2: float = 1.0

    def __post_init__(self):
        if self.architecture not in MC_ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be positive")
        if self.n_samples < 1:
            raise ValueError("need at least one sample")
        if self.architecture == "gcnii" and len(self.beta_schedule) != self.depth:
            raise ValueError("gcnii needs one beta per layer")


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _forward(cfg: McConfig, a_csr, x0: np.ndarray, rngs) -> np.ndarray:
    """One network draw; returns the final pre-activation (n_nodes x width)."""
    d = cfg.width
    if cfg.architecture in ("gcn", "mlp"):
        h = x0
        for l in range(cfg.depth):
            rng = rngs[l]
            fan_in = h.shape[1]
            w = rng.normal(0.0, cfg.sigma_w / np.sqrt(fan_in), size=(fan_in, d))
            b = rng.normal(0.0, cfg.sigma_b, size=(1, d)) if cfg.sigma_b > 0 else 0.0
            inner = _relu(h) if l > 0 else h
            h = a_csr @ (inner @ w) + b
        return h

    if cfg.architecture == "gin":
        h = x0
        for l in range(cfg.depth):
            rng = rngs[l]
            fan_in = h.shape[1]
            w1 = rng.normal(0.0, cfg.sigma_w / np.sqrt(fan_in), size=(fan_in, d))
            b1 = rng.normal(0.0, cfg.sigma_b, size=(1, d)) if cfg.sigma_b > 0 else 0.0
            w2 = rng.normal(0.0, cfg.sigma_w / np.sqrt(d), size=(d, d))
            b2 = rng.normal(0.0, cfg.sigma_b, size=(1, d)) if cfg.sigma_b > 0 else 0.0
            inner = _relu(h) if l > 0 else h
            mid = a_csr @ (inner @ w1) + b1
            h = _relu(mid) @ w2 + b2
        return h

    if cfg.architecture == "sage":
        h = x0
        for l in range(cfg.depth):
            rng = rngs[l]
            fan_in = h.shape[1]
            w_own = rng.normal(0.0, cfg.sigma_w1 / np.sqrt(fan_in), size=(fan_in, d))
            w_neigh = rng.normal(0.0, cfg.sigma_w2 / np.sqrt(fan_in), size=(fan_in, d))
            inner = _relu(h) if l > 0 else h
            h = inner @ w_own + a_csr @ (inner @ w_neigh)
        return h

    # gcnii: rngs[depth] is reserved for the base lift
    d0 = x0.shape[1]
    base_rng = rngs[cfg.depth]
    h = x0 @ base_rng.normal(0.0, 1.0 / np.sqrt(d0), size=(d0, d))
    for l in range(cfg.depth):
        rng = rngs[l]
        skip = x0 @ rng.normal(0.0, 1.0 / np.sqrt(d0), size=(d0, d))
        inner = _relu(h) if l > 0 else h
        mixed = (1.0 - cfg.alpha) * (a_csr @ inner) + cfg.alpha * skip
        beta = cfg.beta_schedule[l]
        w = rng.normal(0.0, cfg.sigma_w / np.sqrt(d), size=(d, d))
        h = (1.0 - beta) * mixed + beta * (mixed @ w)
    return h


def sample_covariance(cfg: McConfig, a: SparseAdjacency, features: np.ndarray,
                      per_coordinate: bool = False) -> np.ndarray:
    """Pooled empirical covariance of the final layer over all samples.

    With ``per_coordinate`` the pooling over output units is skipped and the
    result has shape (width, n_nodes, n_nodes), one sample-averaged estimate
    per output unit; the pooled estimate is their mean over units.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != a.n_nodes:
        raise ValueError("features must be 2-d with one row per node")
    a_csr = a.to_csr()
    root = np.random.SeedSequence(cfg.seed)
    sample_seqs = root.spawn(cfg.n_samples)
    n = a.n_nodes
    streams_per_sample = cfg.depth + (1 if cfg.architecture == "gcnii" else 0)
    if per_coordinate:
        acc = np.zeros((cfg.width, n, n))
        for seq in sample_seqs:
            rngs = [np.random.default_rng(s) for s in seq.spawn(streams_per_sample)]
            z = _forward(cfg, a_csr, features, rngs)
            acc += np.einsum("ic,jc->cij", z, z)
        return acc / cfg.n_samples
    acc = np.zeros((n, n))
    for seq in sample_seqs:
        rngs = [np.random.default_rng(s) for s in seq.spawn(streams_per_sample)]
        z = _forward(cfg, a_csr, features, rngs)
        acc += z @ z.T
    return acc / (cfg.n_samples * cfg.width)


def compare_covariance(empirical: np.ndarray, analytic: np.ndarray) -> float:
    """Relative Frobenius error ||emp - ana||_F / ||ana||_F."""
    empirical = np.asarray(empirical, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if empirical.shape != analytic.shape:
        raise ValueError("shapes differ")
    denom = np.linalg.norm(analytic)
    if denom == 0:
        raise ValueError("analytic kernel is zero; relative error undefined")
    return float(np.linalg.norm(empirical - analytic) / denom)
