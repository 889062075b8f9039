"""Covariance building blocks for wide-network limits on graphs.

Two representations run in parallel through every block:

* exact: a dense symmetric kernel K (plain float64 array, N x N);
* low-rank: a factor Q with K ~= Q Q^T (N x r, r small).

Each block maps (K -> K') and (Q -> Q') so that forming the Gram matrix of
the low-rank output reproduces the exact rule; for the ReLU activation the
low-rank rule is the Nystrom reconstruction through a landmark set, exact
when the landmarks span the kernel's range.

The ReLU expectation uses the closed form

    E[relu(z) relu(z')] = sqrt(K_xx K_x'x') * (sin t + (pi - t) cos t) / (2 pi),
    t = arccos( K_xx' / sqrt(K_xx K_x'x') ),

so the diagonal is halved exactly and the correlation version
f(rho) = (sin t + (pi - t) rho) / pi maps [-1, 1] into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from .adjacency import SparseAdjacency

# Variance below VAR_FLOOR_REL * max(diag) counts as a degenerate (zero) node.
VAR_FLOOR_REL = 1e-12
# Landmark-block eigenvalues below EIG_FLOOR_REL * lambda_max are clamped.
EIG_FLOOR_REL = 1e-10


class FactorizationError(RuntimeError):
    """Raised when a landmark block cannot be inverted even after clamping."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True, eq=False)
class LowRankFactor:
    """N x r factor Q standing in for the kernel Q Q^T."""

    q: np.ndarray

    def __post_init__(self):
        if self.q.ndim != 2:
            raise ValueError("factor must be a 2-d array")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def rank(self) -> int:
        return self.q.shape[1]

    def gram(self) -> np.ndarray:
        return self.q @ self.q.T

    def gram_diag(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.q, self.q)

    def gram_cols(self, idx: np.ndarray) -> np.ndarray:
        """Columns K[:, idx] of the represented kernel."""
        return self.q @ self.q[idx].T


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """Sorted, distinct node indices anchoring the Nystrom reconstruction."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("landmark set must be a nonempty 1-d index array")
        if idx[0] < 0:
            raise ValueError("landmark indices must be nonnegative")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("landmark indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @property
    def count(self) -> int:
        return int(self.indices.size)

    @classmethod
    def all_nodes(cls, n: int) -> "LandmarkSet":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def draw(cls, pool: np.ndarray, count: int, seed: int) -> "LandmarkSet":
        """Uniform sample without replacement from ``pool``."""
        pool = np.asarray(pool, dtype=np.int64)
        if not 1 <= count <= pool.size:
            raise ValueError(f"cannot draw {count} landmarks from a pool of {pool.size}")
        rng = np.random.default_rng(seed)
        picked = rng.choice(pool, size=count, replace=False)
        return cls(np.sort(picked))


# ---------------------------------------------------------------------------
# network building blocks (tagged union)


@dataclass(frozen=True)
class Bias:
    """Add an independent bias: K + sigma_b^2, or append a sigma_b column."""

    sigma_b: float

    def __post_init__(self):
        if self.sigma_b < 0:
            raise ValueError("sigma_b must be nonnegative")


@dataclass(frozen=True)
class Weight:
    """Random dense weight: K * sigma_w^2, or Q * sigma_w."""

    sigma_w: float

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")


@dataclass(frozen=True)
class MixedWeight:
    """Deterministic/random mix (alpha I + beta W): scale by alpha^2 + beta^2 sigma_w^2."""

    alpha: float
    beta: float
    sigma_w: float

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")

    @property
    def scale_sq(self) -> float:
        return self.alpha**2 + self.beta**2 * self.sigma_w**2


@dataclass(frozen=True, eq=False)
class GraphConv:
    """Deterministic graph mixing: A K A^T, or A Q."""

    a: SparseAdjacency


@dataclass(frozen=True)
class Activation:
    """ReLU expectation g; the only block that resets the low-rank basis."""


@dataclass(frozen=True, eq=False)
class IndependentAdd:
    """Add a statistically independent branch.

    ``other`` holds the already-computed branch in the representation of the
    running path: a dense kernel on the exact path, a LowRankFactor on the
    low-rank path.  Independence of the two branches is a semantic
    precondition (the rule drops cross-covariances).
    """

    other: Union[np.ndarray, LowRankFactor]


Block = Union[Bias, Weight, MixedWeight, GraphConv, Activation, IndependentAdd]


# ---------------------------------------------------------------------------
# base covariances (optional second argument -> cross block)


def base_inner(x: np.ndarray, y: Optional[np.ndarray] = None) -> np.ndarray:
    """Inner-product base x . x' / d0 (d0 = feature count)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("features must be a nonempty 2-d array")
    y = x if y is None else np.asarray(y, dtype=np.float64)
    return x @ y.T / x.shape[1]


def base_rbf(x: np.ndarray, y: Optional[np.ndarray] = None, gamma: float = 1.0) -> np.ndarray:
    """Squared-exponential base exp(-gamma ||x - x'||^2); unit diagonal."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    return np.exp(-gamma * cdist(x, y, "sqeuclidean"))


def base_poly(
    x: np.ndarray, y: Optional[np.ndarray] = None, c: float = 5.0, d: float = 3.0
) -> np.ndarray:
    """Polynomial base (x . x' + c)^d.

    For non-integer d the shifted inner product is clamped at zero before
    exponentiation so the power stays real.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    base = x @ y.T + c
    if not float(d).is_integer():
        base = np.maximum(base, 0.0)
    return base**d


# ---------------------------------------------------------------------------
# ReLU expectation


def correlation_map(rho):
    """Correlation version of the ReLU expectation, f(rho) in [0, 1].

    f(rho) = (sin t + (pi - t) rho) / pi with t = arccos(rho); inputs are
    clamped to [-1, 1] to absorb roundoff.  Nondecreasing, f(rho) >= rho,
    f(1) = 1.
    """
    r = np.clip(rho, -1.0, 1.0)
    t = np.arccos(r)
    return (np.sin(t) + (np.pi - t) * r) / np.pi


def _relu_gauss(k_block: np.ndarray, d_rows: np.ndarray, d_cols: np.ndarray,
                var_floor: float) -> np.ndarray:
    """Entrywise ReLU expectation for a block of K given the two diagonals.

    Rows/columns whose variance is at or below ``var_floor`` are zeroed (a
    degenerate node has no signal to propagate).
    """
    alive_r = d_rows > var_floor
    alive_c = d_cols > var_floor
    sr = np.sqrt(np.where(alive_r, d_rows, 1.0))
    sc = np.sqrt(np.where(alive_c, d_cols, 1.0))
    denom = np.outer(sr, sc)
    rho = np.clip(k_block / denom, -1.0, 1.0)
    t = np.arccos(rho)
    c = (0.5 / np.pi) * denom * (np.sin(t) + (np.pi - t) * rho)
    if not alive_r.all():
        c[~alive_r, :] = 0.0
    if not alive_c.all():
        c[:, ~alive_c] = 0.0
    return c


def relu_expectation(k: np.ndarray) -> np.ndarray:
    """Post-activation covariance C = E[relu(z) relu(z')^T], z ~ N(0, K).

    The diagonal of the result is exactly half the input diagonal (written
    explicitly rather than through arccos, which would round).  Nodes with
    vanishing variance get zero rows and columns.
    """
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("kernel must be square")
    d = np.maximum(k.diagonal(), 0.0)
    var_floor = VAR_FLOOR_REL * (d.max() if d.size else 0.0)
    c = _relu_gauss(k, d, d, var_floor)
    np.fill_diagonal(c, np.where(d > var_floor, 0.5 * d, 0.0))
    return c


# ---------------------------------------------------------------------------
# Nystrom factor


def chol_factor(c_cols: np.ndarray, c_landmark: np.ndarray) -> LowRankFactor:
    """Factor P = C[:, a] C[a, a]^{-1/2} with P P^T the Nystrom reconstruction.

    The inverse square root comes from a symmetric eigendecomposition;
    eigenvalues below EIG_FLOOR_REL * lambda_max are clamped to that floor,
    which keeps the factor finite when the landmark block is numerically
    rank-deficient.  A block with no positive eigenvalue at all cannot be
    factored and raises.

    Restricted to the landmark rows, P P^T reproduces C[a, a] whenever the
    block is nonsingular.
    """
    c_cols = np.asarray(c_cols, dtype=np.float64)
    c_landmark = np.asarray(c_landmark, dtype=np.float64)
    if c_landmark.ndim != 2 or c_landmark.shape[0] != c_landmark.shape[1]:
        raise ValueError("landmark block must be square")
    if c_cols.ndim != 2 or c_cols.shape[1] != c_landmark.shape[0]:
        raise ValueError("column block width must match the landmark block")
    sym = 0.5 * (c_landmark + c_landmark.T)
    w, u = np.linalg.eigh(sym)
    if not np.isfinite(w).all():
        raise FactorizationError("landmark block has non-finite eigenvalues")
    lam_max = w[-1]
    if lam_max <= 0.0:
        raise FactorizationError(
            "landmark block is numerically singular beyond clamping "
            f"(largest eigenvalue {lam_max:.3e}, smallest {w[0]:.3e})",
            eigenvalue=float(w[0]),
        )
    w_clamped = np.maximum(w, EIG_FLOOR_REL * lam_max)
    inv_sqrt = (u / np.sqrt(w_clamped)) @ u.T
    return LowRankFactor(c_cols @ inv_sqrt)


# ---------------------------------------------------------------------------
# block application


def apply_block_exact(k: np.ndarray, block: Block) -> np.ndarray:
    """One building block on the dense path."""
    if isinstance(block, Bias):
        return k + block.sigma_b**2
    if isinstance(block, Weight):
        return block.sigma_w**2 * k
    if isinstance(block, MixedWeight):
        return block.scale_sq * k
    if isinstance(block, GraphConv):
        if block.a.n_nodes != k.shape[0]:
            raise ValueError(
                f"operator size {block.a.n_nodes} does not match kernel size {k.shape[0]}"
            )
        m = block.a.to_csr()
        out = m @ (m @ k).T  # A (A K)^T = A K^T A^T, symmetric input assumed
        out = 0.5 * (out + out.T)
        return out
    if isinstance(block, Activation):
        return relu_expectation(k)
    if isinstance(block, IndependentAdd):
        other = block.other
        if not isinstance(other, np.ndarray):
            raise TypeError("exact path needs the added branch as a dense kernel")
        if other.shape != k.shape:
            raise ValueError("added branch has mismatched shape")
        return k + other
    raise TypeError(f"unknown block {block!r}")


def apply_block_lowrank(
    factor: LowRankFactor, block: Block, landmarks: Optional[LandmarkSet] = None
) -> LowRankFactor:
    """One building block on the low-rank path.

    Only the activation needs the landmark set: it evaluates the ReLU
    expectation on the landmark columns of Q Q^T and re-factors.  A zero
    bias leaves the factor untouched instead of appending a zero column.
    """
    if isinstance(block, Bias):
        if block.sigma_b == 0.0:
            return factor
        col = np.full((factor.n, 1), block.sigma_b)
        return LowRankFactor(np.hstack([factor.q, col]))
    if isinstance(block, Weight):
        return LowRankFactor(block.sigma_w * factor.q)
    if isinstance(block, MixedWeight):
        return LowRankFactor(np.sqrt(block.scale_sq) * factor.q)
    if isinstance(block, GraphConv):
        if block.a.n_nodes != factor.n:
            raise ValueError(
                f"operator size {block.a.n_nodes} does not match factor size {factor.n}"
            )
        return LowRankFactor(block.a.to_csr() @ factor.q)
    if isinstance(block, Activation):
        if landmarks is None:
            raise ValueError("activation on the low-rank path needs a landmark set")
        idx = landmarks.indices
        if idx[-1] >= factor.n:
            raise ValueError("landmark index out of range for this factor")
        q = factor.q
        d = np.einsum("ij,ij->i", q, q)
        k_cols = q @ q[idx].T
        var_floor = VAR_FLOOR_REL * (d.max() if d.size else 0.0)
        c_cols = _relu_gauss(k_cols, d, d[idx], var_floor)
        # landmark-with-itself entries are diagonal entries: halve exactly
        alive = d[idx] > var_floor
        c_cols[idx, np.arange(idx.size)] = np.where(alive, 0.5 * d[idx], 0.0)
        return chol_factor(c_cols, c_cols[idx])
    if isinstance(block, IndependentAdd):
        other = block.other
        if not isinstance(other, LowRankFactor):
            raise TypeError("low-rank path needs the added branch as a LowRankFactor")
        if other.n != factor.n:
            raise ValueError("added branch has mismatched node count")
        return LowRankFactor(np.hstack([factor.q, other.q]))
    raise TypeError(f"unknown block {block!r}")
