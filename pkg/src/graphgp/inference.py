"""Posterior inference for node-level regression and classification.

With training block b and prediction block *, the noisy-observation
posterior mean is

    exact     yhat = K_*b (K_bb + eps I)^{-1} y_b
    low-rank  yhat = Q_* (Q_b^T Q_b + eps I)^{-1} Q_b^T y_b

(the two coincide when K = Q Q^T), and the low-rank predictive variance is

    var = eps * diag( Q_* (Q_b^T Q_b + eps I)^{-1} Q_*^T ).

Classification runs C independent regressions against one-hot targets and
takes the channel argmax.  The nugget eps is picked on the validation split
by Micro-F1 (classification) or R^2 (regression).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from .kernels import FactorizationError, LowRankFactor

# one retry with this relative jitter before giving up on a dense solve
JITTER_REL = 1e-10


@dataclass(frozen=True, eq=False)
class SplitIndices:
    """Disjoint train / validation / test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.ndim != 1:
                raise ValueError(f"{name} indices must be 1-d")
            if idx.size and idx.min() < 0:
                raise ValueError(f"{name} indices must be nonnegative")
            if np.unique(idx).size != idx.size:
                raise ValueError(f"{name} indices contain duplicates")
            object.__setattr__(self, name, idx)
        joined = np.concatenate([self.train, self.val, self.test])
        if np.unique(joined).size != joined.size:
            raise ValueError("train/val/test sets must be pairwise disjoint")

    def validate_for(self, n_nodes: int) -> None:
        joined = np.concatenate([self.train, self.val, self.test])
        if joined.size and joined.max() >= n_nodes:
            raise ValueError(
                f"split references node {joined.max()} but the graph has {n_nodes} nodes"
            )


@dataclass(frozen=True, eq=False)
class PosteriorResult:
    """Predictions at the requested nodes, one column per output channel."""

    mean: np.ndarray
    variance_diag: Optional[np.ndarray]
    nugget: float
    channel_names: Optional[Sequence] = None


def _as_target_matrix(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] if y.ndim == 1 else y


def one_hot_targets(labels: np.ndarray, classes: Optional[np.ndarray] = None):
    """0/1 indicator matrix (not centered) and the class values, sorted."""
    labels = np.asarray(labels)
    if classes is None:
        classes = np.unique(labels)
    mat = (labels[:, None] == classes[None, :]).astype(np.float64)
    return mat, classes


# ---------------------------------------------------------------------------
# fitted solvers


class ExactPosterior:
    """Factorized training block of a dense kernel, ready to predict."""

    def __init__(self, kernel: np.ndarray, train_idx: np.ndarray,
                 y_train: np.ndarray, nugget: float):
        if nugget < 0:
            raise ValueError("nugget must be nonnegative")
        kernel = np.asarray(kernel, dtype=np.float64)
        train_idx = np.asarray(train_idx, dtype=np.int64)
        if train_idx.size == 0:
            raise ValueError("training set is empty")
        y = _as_target_matrix(y_train)
        if y.shape[0] != train_idx.size:
            raise ValueError(
                f"{y.shape[0]} training targets for {train_idx.size} training nodes"
            )
        kbb = kernel[np.ix_(train_idx, train_idx)].copy()
        kbb[np.diag_indices_from(kbb)] += nugget
        try:
            factor = scipy.linalg.cho_factor(kbb)
        except scipy.linalg.LinAlgError:
            jitter = JITTER_REL * np.trace(kbb) / kbb.shape[0]
            kbb[np.diag_indices_from(kbb)] += jitter
            try:
                factor = scipy.linalg.cho_factor(kbb)
            except scipy.linalg.LinAlgError as err:
                cond = np.linalg.cond(kbb)
                raise FactorizationError(
                    f"training block is not positive definite even after jitter "
                    f"{jitter:.3e} (condition estimate {cond:.3e})"
                ) from err
        self.kernel = kernel
        self.train_idx = train_idx
        self.nugget = float(nugget)
        self._coef = scipy.linalg.cho_solve(factor, y)

    def mean(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return self.kernel[np.ix_(idx, self.train_idx)] @ self._coef


class LowRankPosterior:
    """Factorized r x r training Gram of a low-rank kernel factor."""

    def __init__(self, factor: LowRankFactor, train_idx: np.ndarray,
                 y_train: np.ndarray, nugget: float):
        if nugget <= 0:
            raise ValueError("low-rank posterior needs a positive nugget")
        train_idx = np.asarray(train_idx, dtype=np.int64)
        if train_idx.size == 0:
            raise ValueError("training set is empty")
        y = _as_target_matrix(y_train)
        if y.shape[0] != train_idx.size:
            raise ValueError(
                f"{y.shape[0]} training targets for {train_idx.size} training nodes"
            )
        qb = factor.q[train_idx]
        gram = qb.T @ qb
        gram[np.diag_indices_from(gram)] += nugget
        self.factor = factor
        self.nugget = float(nugget)
        self._cho = scipy.linalg.cho_factor(gram)
        self._coef = scipy.linalg.cho_solve(self._cho, qb.T @ y)

    def mean(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return self.factor.q[idx] @ self._coef

    def variance(self, idx: np.ndarray) -> np.ndarray:
        """Predictive variance diag; tiny negative roundoff clamps to zero."""
        idx = np.asarray(idx, dtype=np.int64)
        qs = self.factor.q[idx]
        solved = scipy.linalg.cho_solve(self._cho, qs.T)
        var = self.nugget * np.einsum("ij,ji->i", qs, solved)
        return np.maximum(var, 0.0)


# ---------------------------------------------------------------------------
# spec-level operations


def posterior_mean_exact(kernel: np.ndarray, split: SplitIndices, y_train: np.ndarray,
                         nugget: float, predict: Optional[np.ndarray] = None,
                         channel_names: Optional[Sequence] = None) -> PosteriorResult:
    """Dense-path posterior mean at ``predict`` (default: the test split)."""
    fit = ExactPosterior(kernel, split.train, y_train, nugget)
    idx = split.test if predict is None else predict
    return PosteriorResult(fit.mean(idx), None, float(nugget), channel_names)


def posterior_mean_lowrank(factor: LowRankFactor, split: SplitIndices, y_train: np.ndarray,
                           nugget: float, predict: Optional[np.ndarray] = None,
                           channel_names: Optional[Sequence] = None) -> PosteriorResult:
    """Low-rank posterior mean at ``predict`` (default: the test split)."""
    fit = LowRankPosterior(factor, split.train, y_train, nugget)
    idx = split.test if predict is None else predict
    return PosteriorResult(fit.mean(idx), None, float(nugget), channel_names)


def posterior_variance_lowrank(factor: LowRankFactor, split: SplitIndices, nugget: float,
                               predict: Optional[np.ndarray] = None) -> np.ndarray:
    """Low-rank predictive variance diagonal at ``predict``."""
    # any single channel gives the same variance; fit against zeros
    fit = LowRankPosterior(
        factor, split.train, np.zeros((split.train.size, 1)), nugget
    )
    idx = split.test if predict is None else predict
    return fit.variance(idx)


def classify_onehot(mean: np.ndarray) -> np.ndarray:
    """Channel argmax; ties resolve to the lowest index."""
    mean = np.asarray(mean)
    if mean.ndim != 2 or mean.shape[1] < 2:
        raise ValueError("need a score matrix with at least two channels")
    return np.argmax(mean, axis=1)


def micro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """Single-label micro-averaged F1, which reduces to plain accuracy."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("predictions and truth must be nonempty and aligned")
    return float(np.mean(pred == truth))


def r2(pred: np.ndarray, truth: np.ndarray) -> float:
    """Coefficient of determination about the truth mean; nan if truth is constant."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("predictions and truth must be nonempty and aligned")
    ss_tot = np.sum((truth - truth.mean()) ** 2)
    if ss_tot == 0.0:
        return float("nan")
    return float(1.0 - np.sum((truth - pred) ** 2) / ss_tot)


def default_nugget_grid(lo: float = 1e-3, hi: float = 10.0, count: int = 13) -> np.ndarray:
    """Log-spaced nugget candidates, endpoints included."""
    if lo <= 0 or hi <= lo or count < 1:
        raise ValueError("need 0 < lo < hi and at least one point")
    return np.logspace(np.log10(lo), np.log10(hi), count)


def nugget_search(kernel_or_factor, split: SplitIndices, targets: np.ndarray,
                  grid: Optional[np.ndarray] = None, task: str = "classification"):
    """Validation grid search for the nugget; ties go to the smaller value.

    ``targets`` covers all nodes; the search fits on the train split and
    scores on the validation split with Micro-F1 or R^2.  A constant
    regression validation target makes R^2 undefined, in which case the
    smallest candidate is returned under a warning.  Returns the winning
    nugget together with the (nugget, validation score) trace.
    """
    if task not in ("classification", "regression"):
        raise ValueError(f"unknown task {task!r}")
    if split.val.size == 0:
        raise ValueError("nugget selection needs a nonempty validation split")
    grid = default_nugget_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty nugget grid")
    grid = np.sort(grid)
    targets = np.asarray(targets)
    lowrank = isinstance(kernel_or_factor, LowRankFactor)

    if task == "classification":
        y_train, classes = one_hot_targets(targets[split.train], np.unique(targets))
    else:
        truth_val = targets[split.val].astype(np.float64)
        if np.all(truth_val == truth_val[0]):
            warnings.warn(
                "validation target is constant, R^2 is undefined; "
                "falling back to the smallest nugget",
                RuntimeWarning,
            )
            return float(grid[0]), [(float(grid[0]), float("nan"))]
        y_train = targets[split.train].astype(np.float64)

    best_eps, best_score = None, -np.inf
    trace: List[tuple] = []
    for eps in grid:
        if lowrank:
            fit = LowRankPosterior(kernel_or_factor, split.train, y_train, float(eps))
        else:
            fit = ExactPosterior(kernel_or_factor, split.train, y_train, float(eps))
        mean_val = fit.mean(split.val)
        if task == "classification":
            score = micro_f1(classes[classify_onehot(mean_val)], targets[split.val])
        else:
            score = r2(mean_val[:, 0], targets[split.val])
        trace.append((float(eps), float(score)))
        if score > best_score:  # strict: equal scores keep the smaller eps
            best_eps, best_score = float(eps), score
    return best_eps, trace


def select_nugget(kernel_or_factor, split: SplitIndices, targets: np.ndarray,
                  grid: Optional[np.ndarray] = None, task: str = "classification") -> float:
    """The winning nugget of ``nugget_search``."""
    eps, _ = nugget_search(kernel_or_factor, split, targets, grid, task)
    return eps
