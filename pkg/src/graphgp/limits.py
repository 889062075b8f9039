"""Depth-limit diagnostics for the covariance recursions.

Tracks, layer by layer, the quantities whose limits the deep-network theory
pins down for a symmetric, irreducible, aperiodic nonnegative operator with
Perron pair (lam, v):

* rho_min, the minimum pairwise correlation (bias-free recursions drive it
  to one, so deep kernels stop distinguishing nodes);
* trace(K), bounded when sigma_w^2 lam^2 < 2 by N sigma_b^2 / (1 - delta)
  with delta = sigma_w^2 lam^2 / 2;
* the second-to-first singular value ratio and the least-squares gap of
  K / delta^l to a rank-one matrix c v v^T, both vanishing when
  sigma_w^2 lam^2 > 2.

The graph-free recursion (A = I) has its own fixed-point story and lives in
``mlp_recursion`` / ``mlp_fixed_point``: subcritical (sigma_w^2 < 2) kernels
flatten to q * ones with q = sigma_b^2 / (1 - sigma_w^2 / 2); supercritical
ones grow like (sigma_w^2 / 2)^l with a rank-one profile v_x^2 =
sigma_b^2 / (sigma_w^2 / 2 - 1) + K0(x, x).  Both treat K0 as a
pre-activation covariance, so the halved diagonal recursion applies from
the first step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .adjacency import SpectralInfo, is_connected, spectral_radius
from .kernels import Weight, apply_block_exact, relu_expectation
from .programs import KernelProgram, _layer_exact

# dense per-layer spectra make large scans expensive; keep them small
MAX_SCAN_NODES = 200
# telemetry window for the trailing-difference (Cauchy) gap
CAUCHY_LAG = 10


@dataclass(frozen=True, eq=False)
class DepthTrace:
    """Per-layer diagnostics; index i describes the kernel after layer i+1.

    ``scaled_gap`` is the relative Frobenius distance of K / delta^l to its
    best rank-one multiple of the Perron profile (graph-convolution
    programs only, nan otherwise); ``cauchy_gap`` is the telemetry-only
    Frobenius difference ||K^(l) - K^(l-10)||_F, nan for the first ten
    layers.
    """

    layers: np.ndarray
    rho_min: np.ndarray
    trace: np.ndarray
    top2_singular_ratio: np.ndarray
    scaled_gap: np.ndarray
    cauchy_gap: np.ndarray
    perron: Optional[SpectralInfo] = None
    scale_base: float = float("nan")


def _min_correlation(k: np.ndarray) -> float:
    d = np.maximum(k.diagonal(), 0.0)
    if np.any(d <= 0):
        return float("nan")
    s = np.sqrt(d)
    rho = k / np.outer(s, s)
    # sqrt round-off can push a flat kernel's ratios one ulp past 1
    return float(np.clip(rho.min(), -1.0, 1.0))


def _top2_ratio(k: np.ndarray) -> float:
    scale = np.abs(k).max()
    if scale == 0 or k.shape[0] < 2:
        return float("nan")
    s = np.linalg.svd(k / scale, compute_uv=False)
    return float(s[1] / s[0]) if s[0] > 0 else float("nan")


def _rank1_gap(kappa: np.ndarray, v: np.ndarray) -> float:
    """Relative Frobenius residual after the best fit c * v v^T (c by least squares)."""
    norm = np.linalg.norm(kappa)
    if norm == 0:
        return float("nan")
    c = float(v @ kappa @ v)  # ||v|| = 1 makes this the least-squares coefficient
    return float(np.linalg.norm(kappa - c * np.outer(v, v)) / norm)


def depth_scan(program: KernelProgram, k0: np.ndarray,
               per_layer: Optional[Callable[[int, np.ndarray], None]] = None) -> DepthTrace:
    """Run the program's exact recursion to its depth, recording diagnostics.

    The operator must be symmetric, nonnegative, irreducible (connected) and
    aperiodic (positive diagonal, which both normalizations guarantee via
    their self-loops); the depth-limit statements assume exactly that.  The
    optional ``per_layer`` callback sees each dense kernel as it is produced.
    """
    a = program.a
    if a.n_nodes > MAX_SCAN_NODES:
        raise ValueError(
            f"depth scan is dense and capped at {MAX_SCAN_NODES} nodes; got {a.n_nodes}"
        )
    m = a.to_csr()
    asym = np.abs(m - m.T)
    if asym.nnz and asym.max() > 1e-12:
        raise ValueError("depth scan needs a symmetric operator")
    if not is_connected(a):
        raise ValueError(
            "depth scan needs an irreducible (connected) operator; "
            "the depth-limit analysis does not cover reducible graphs"
        )
    if np.any(m.diagonal() <= 0):
        raise ValueError(
            "depth scan needs an aperiodic operator (positive diagonal); "
            "normalize with self-loops first"
        )

    perron = spectral_radius(a)
    gcn_like = program.architecture == "gcn"
    delta = program.sigma_w**2 * perron.eigenvalue**2 / 2.0 if gcn_like else float("nan")

    k0 = np.asarray(k0, dtype=np.float64)
    skip = (
        apply_block_exact(k0, Weight(program.alpha))
        if program.uses_initial_skip
        else None
    )
    layers = np.arange(1, program.depth + 1)
    rho = np.empty(program.depth)
    tr = np.empty(program.depth)
    top2 = np.empty(program.depth)
    gap = np.full(program.depth, np.nan)
    cauchy = np.full(program.depth, np.nan)
    window: List[np.ndarray] = []

    k = k0
    for i in range(program.depth):
        k = _layer_exact(program, i, k, skip)
        rho[i] = _min_correlation(k)
        tr[i] = np.trace(k)
        top2[i] = _top2_ratio(k)
        if gcn_like and delta > 0:
            kappa = k / delta ** (i + 1)
            gap[i] = _rank1_gap(kappa, perron.eigenvector)
        if len(window) == CAUCHY_LAG:
            cauchy[i] = np.linalg.norm(k - window[0])
        window.append(k)
        if len(window) > CAUCHY_LAG:
            window.pop(0)
        if per_layer is not None:
            per_layer(i + 1, k)

    return DepthTrace(layers, rho, tr, top2, gap, cauchy, perron, delta)


# ---------------------------------------------------------------------------
# graph-free (A = I) recursion


def mlp_recursion(k0: np.ndarray, sigma_b: float, sigma_w: float, depth: int) -> List[np.ndarray]:
    """Iterate K <- sigma_b^2 + sigma_w^2 g(K) from a pre-activation K0.

    Plain fixed-point iteration with no regime classification; runs at any
    sigma_w, including the threshold.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    k = np.asarray(k0, dtype=np.float64)
    out = []
    for _ in range(depth):
        k = sigma_b**2 + sigma_w**2 * relu_expectation(k)
        out.append(k)
    return out


@dataclass(frozen=True, eq=False)
class MlpLimitResult:
    """Limit classification and per-layer gap for the graph-free recursion.

    Subcritical: ``flat_level`` holds q and ``gaps[i]`` = max|K - q|.
    Supercritical: ``profile`` holds v and ``gaps[i]`` = max|K/delta^l - v v^T|.
    """

    regime: str
    layers: np.ndarray
    gaps: np.ndarray
    trace: np.ndarray
    rho_min: np.ndarray
    flat_level: float = float("nan")
    profile: Optional[np.ndarray] = None

    @property
    def final_gap(self) -> float:
        return float(self.gaps[-1])


def mlp_fixed_point(sigma_b: float, sigma_w: float, k0: np.ndarray,
                    depth: int) -> MlpLimitResult:
    """Classify the graph-free limit and measure convergence toward it.

    sigma_w^2 == 2 sits exactly on the threshold, where neither limit
    statement applies; that regime is rejected.
    """
    if sigma_b < 0 or sigma_w < 0:
        raise ValueError("sigma parameters must be nonnegative")
    # sqrt(2)**2 misses 2.0 by one ulp, so an exact test would never fire;
    # treat the whole rounding neighborhood as the threshold
    if abs(sigma_w**2 - 2.0) <= 1e-12:
        raise ValueError(
            "sigma_w^2 = 2 is the critical point; no limit statement covers it"
        )
    k0 = np.asarray(k0, dtype=np.float64)
    kernels = mlp_recursion(k0, sigma_b, sigma_w, depth)
    layers = np.arange(1, depth + 1)
    tr = np.array([np.trace(k) for k in kernels])
    rho = np.array([_min_correlation(k) for k in kernels])
    delta = sigma_w**2 / 2.0

    if delta < 1.0:
        q = sigma_b**2 / (1.0 - delta)
        gaps = np.array([np.abs(k - q).max() for k in kernels])
        return MlpLimitResult("subcritical", layers, gaps, tr, rho, flat_level=q)

    v = np.sqrt(sigma_b**2 / (delta - 1.0) + np.maximum(k0.diagonal(), 0.0))
    vvt = np.outer(v, v)
    gaps = np.array(
        [np.abs(k / delta ** (i + 1) - vvt).max() for i, k in enumerate(kernels)]
    )
    return MlpLimitResult("supercritical", layers, gaps, tr, rho, profile=v)
