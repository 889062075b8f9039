"""Architecture compositions: whole networks as covariance programs.

A program fixes a graph operator, a depth and the layer hyperparameters;
running it folds the building blocks of kernels.py over either the dense
kernel or the low-rank factor.  Per-layer updates (K dense, Q factor, A the
operator, g the ReLU expectation):

  gcn    K <- sigma_w^2 A g(K) A^T + sigma_b^2
         Q <- [sigma_w A chol(g(Q Q^T)), sigma_b 1]
  gcnii  K <- ((1-a)^2 A g(K) A^T + a^2 K0) * ((1-b_l)^2 + b_l^2 sigma_w^2)
  gin    K <- sigma_w^2 g(B) + sigma_b^2,  B = sigma_w^2 A g(K) A^T + sigma_b^2
  sage   K <- sigma_w1^2 g(K) + sigma_w2^2 A g(K) A^T   (row-normalized A)
  mlp    gcn with A = I

The first layer consumes the base covariance K0 directly (no activation in
front of the first linear map); inner activations, like the second stage of
a gin layer, always apply.  ggp is a single deterministic smoothing of a
polynomial base and has no depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .adjacency import SparseAdjacency, identity_adjacency
from .kernels import (
    Activation,
    Bias,
    FactorizationError,
    GraphConv,
    IndependentAdd,
    LandmarkSet,
    LowRankFactor,
    MixedWeight,
    Weight,
    apply_block_exact,
    apply_block_lowrank,
    base_inner,
    base_poly,
    chol_factor,
)

ARCHITECTURES = ("gcn", "gcnii", "gin", "sage", "mlp")


def gcnii_beta_schedule(depth: int, decay: float = 0.5) -> tuple:
    """Per-layer mixing strengths beta_l = log(decay / l + 1), l = 1..depth."""
    if depth < 1:
        raise ValueError("depth must be positive")
    layers = np.arange(1, depth + 1)
    return tuple(np.log(decay / layers + 1.0))


@dataclass(frozen=True, eq=False)
class KernelProgram:
    """An architecture bound to its operator, depth and hyperparameters."""

    architecture: str
    a: SparseAdjacency
    depth: int
    sigma_b: float = 0.0
    sigma_w: float = 1.0
    alpha: float = 0.1
    beta_schedule: tuple = ()
    sigma_w1: float = 0.0
    sigma_w2: float = 1.0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.depth < 1:
            raise ValueError("depth must be positive")
        if min(self.sigma_b, self.sigma_w, self.sigma_w1, self.sigma_w2) < 0:
            raise ValueError("sigma parameters must be nonnegative")
        if self.architecture == "gcnii" and len(self.beta_schedule) != self.depth:
            raise ValueError(
                f"gcnii needs one beta per layer: got {len(self.beta_schedule)} "
                f"for depth {self.depth}"
            )

    @property
    def uses_initial_skip(self) -> bool:
        """True when layers re-add the layer-0 covariance (gcnii)."""
        return self.architecture == "gcnii"

    # constructors ---------------------------------------------------------

    @classmethod
    def gcn(cls, a, depth, sigma_b=0.0, sigma_w=1.0):
        return cls("gcn", a, depth, sigma_b=sigma_b, sigma_w=sigma_w)

    @classmethod
    def mlp(cls, n_nodes, depth, sigma_b=0.0, sigma_w=1.0):
        return cls("mlp", identity_adjacency(n_nodes), depth,
                   sigma_b=sigma_b, sigma_w=sigma_w)

    @classmethod
    def gcnii(cls, a, depth, sigma_w=1.0, alpha=0.1, beta_schedule=None):
        if beta_schedule is None:
            beta_schedule = gcnii_beta_schedule(depth)
        return cls("gcnii", a, depth, sigma_w=sigma_w, alpha=alpha,
                   beta_schedule=tuple(beta_schedule))

    @classmethod
    def gin(cls, a, depth, sigma_b=0.0, sigma_w=1.0):
        return cls("gin", a, depth, sigma_b=sigma_b, sigma_w=sigma_w)

    @classmethod
    def sage(cls, a, depth, sigma_w1=0.0, sigma_w2=1.0):
        return cls("sage", a, depth, sigma_w1=sigma_w1, sigma_w2=sigma_w2)


# ---------------------------------------------------------------------------
# exact path


def _layer_exact(prog: KernelProgram, layer: int, k: np.ndarray,
                 skip: Optional[np.ndarray]) -> np.ndarray:
    conv = GraphConv(prog.a)
    c = apply_block_exact(k, Activation()) if layer > 0 else k
    if prog.architecture in ("gcn", "mlp"):
        t = apply_block_exact(c, conv)
        t = apply_block_exact(t, Weight(prog.sigma_w))
        return apply_block_exact(t, Bias(prog.sigma_b))
    if prog.architecture == "gin":
        b = apply_block_exact(c, conv)
        b = apply_block_exact(b, Weight(prog.sigma_w))
        b = apply_block_exact(b, Bias(prog.sigma_b))
        t = apply_block_exact(b, Activation())  # inner stage is a true pre-activation
        t = apply_block_exact(t, Weight(prog.sigma_w))
        return apply_block_exact(t, Bias(prog.sigma_b))
    if prog.architecture == "sage":
        neigh = apply_block_exact(c, conv)
        neigh = apply_block_exact(neigh, Weight(prog.sigma_w2))
        own = apply_block_exact(c, Weight(prog.sigma_w1))
        return apply_block_exact(own, IndependentAdd(neigh))
    # gcnii
    beta = prog.beta_schedule[layer]
    t = apply_block_exact(c, conv)
    t = apply_block_exact(t, Weight(1.0 - prog.alpha))
    t = apply_block_exact(t, IndependentAdd(skip))
    return apply_block_exact(t, MixedWeight(1.0 - beta, beta, prog.sigma_w))


def run_exact(program: KernelProgram, k0: np.ndarray) -> List[np.ndarray]:
    """Dense kernels after each layer, K^(1) .. K^(depth)."""
    k0 = np.asarray(k0, dtype=np.float64)
    if k0.shape != (program.a.n_nodes, program.a.n_nodes):
        raise ValueError(
            f"base kernel shape {k0.shape} does not match operator size {program.a.n_nodes}"
        )
    skip = apply_block_exact(k0, Weight(program.alpha)) if program.uses_initial_skip else None
    out = []
    k = k0
    for layer in range(program.depth):
        k = _layer_exact(program, layer, k, skip)
        out.append(k)
    return out


def gcn_exact(a, k0, sigma_b=0.0, sigma_w=1.0, depth=2) -> List[np.ndarray]:
    """All per-layer kernels of the graph-convolution recursion."""
    return run_exact(KernelProgram.gcn(a, depth, sigma_b, sigma_w), k0)


def gcnii_exact(a, k0, sigma_w=1.0, alpha=0.1, beta_schedule=None, depth=2) -> np.ndarray:
    """Final kernel of the initial-residual composition (bias-free)."""
    prog = KernelProgram.gcnii(a, depth, sigma_w, alpha, beta_schedule)
    return run_exact(prog, k0)[-1]


def gin_exact(a, k0, sigma_b=0.0, sigma_w=1.0, depth=2) -> np.ndarray:
    """Final kernel of the two-stage (sum-aggregate then MLP) composition."""
    return run_exact(KernelProgram.gin(a, depth, sigma_b, sigma_w), k0)[-1]


def sage_exact(a_row, k0, sigma_w1=0.0, sigma_w2=1.0, depth=2) -> np.ndarray:
    """Final kernel of the sampled-neighborhood composition (row-normalized A)."""
    return run_exact(KernelProgram.sage(a_row, depth, sigma_w1, sigma_w2), k0)[-1]


def ggp_kernel(a_row, features, c: float = 5.0, d: float = 3.0) -> np.ndarray:
    """One deterministic smoothing of a polynomial base: A (x.x' + c)^d A^T."""
    k0 = base_poly(features, c=c, d=d)
    return apply_block_exact(k0, GraphConv(a_row))


# ---------------------------------------------------------------------------
# low-rank path


def nystrom_start(features, landmarks: LandmarkSet,
                  kernel: Callable = base_inner) -> LowRankFactor:
    """Landmark factor of the base covariance without forming it densely."""
    features = np.asarray(features, dtype=np.float64)
    anchors = features[landmarks.indices]
    return chol_factor(kernel(features, anchors), kernel(anchors))


def _layer_lowrank(prog: KernelProgram, layer: int, q: LowRankFactor,
                   landmarks: LandmarkSet, skip: Optional[LowRankFactor]) -> LowRankFactor:
    conv = GraphConv(prog.a)
    c = apply_block_lowrank(q, Activation(), landmarks) if layer > 0 else q
    if prog.architecture in ("gcn", "mlp"):
        t = apply_block_lowrank(c, conv)
        t = apply_block_lowrank(t, Weight(prog.sigma_w))
        return apply_block_lowrank(t, Bias(prog.sigma_b))
    if prog.architecture == "gin":
        b = apply_block_lowrank(c, conv)
        b = apply_block_lowrank(b, Weight(prog.sigma_w))
        b = apply_block_lowrank(b, Bias(prog.sigma_b))
        t = apply_block_lowrank(b, Activation(), landmarks)
        t = apply_block_lowrank(t, Weight(prog.sigma_w))
        return apply_block_lowrank(t, Bias(prog.sigma_b))
    if prog.architecture == "sage":
        neigh = apply_block_lowrank(c, conv)
        neigh = apply_block_lowrank(neigh, Weight(prog.sigma_w2))
        own = apply_block_lowrank(c, Weight(prog.sigma_w1))
        return apply_block_lowrank(own, IndependentAdd(neigh))
    beta = prog.beta_schedule[layer]
    t = apply_block_lowrank(c, conv)
    t = apply_block_lowrank(t, Weight(1.0 - prog.alpha))
    t = apply_block_lowrank(t, IndependentAdd(skip))
    return apply_block_lowrank(t, MixedWeight(1.0 - beta, beta, prog.sigma_w))


def lowrank_variant(program: KernelProgram, q0: LowRankFactor,
                    landmarks: LandmarkSet) -> LowRankFactor:
    """Run the program's low-rank twin; a failing layer names itself.

    The rank stays bounded: every activation resets the basis to the
    landmark count, bias adds one column when sigma_b > 0, and the gcnii
    skip re-adds rank(Q0) columns per layer.
    """
    if q0.n != program.a.n_nodes:
        raise ValueError(
            f"factor size {q0.n} does not match operator size {program.a.n_nodes}"
        )
    skip = (
        apply_block_lowrank(q0, Weight(program.alpha))
        if program.uses_initial_skip
        else None
    )
    q = q0
    for layer in range(program.depth):
        try:
            q = _layer_lowrank(program, layer, q, landmarks, skip)
        except FactorizationError as err:
            raise FactorizationError(
                f"layer {layer + 1}: {err}", eigenvalue=err.eigenvalue
            ) from err
    return q


def gcn_lowrank(a, q0, landmarks, sigma_b=0.0, sigma_w=1.0, depth=2) -> LowRankFactor:
    """Low-rank twin of gcn_exact; rank <= landmark count + 1."""
    return lowrank_variant(KernelProgram.gcn(a, depth, sigma_b, sigma_w), q0, landmarks)
