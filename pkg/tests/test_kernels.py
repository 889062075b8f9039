import numpy as np
import pytest

from graphgp import (
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
    base_rbf,
    chol_factor,
    correlation_map,
    relu_expectation,
)

from conftest import random_psd, sym_operator


# ---------------------------------------------------------------------------
# Monte-Carlo oracle for the ReLU expectation, written before any expected
# value below was frozen.  Draws z ~ N(0, K) through an eigendecomposition
# (K may be singular) and averages relu(z) relu(z)^T.

def mc_relu_cov(k, n_samples, seed):
    w, u = np.linalg.eigh(k)
    w = np.maximum(w, 0.0)
    root = u * np.sqrt(w)
    g = np.random.default_rng(seed).normal(size=(n_samples, k.shape[0]))
    z = np.maximum(g @ root.T, 0.0)
    est = z.T @ z / n_samples
    # per-entry standard error of the mean, from the sample second moments
    prods = z[:, :, None] * z[:, None, :]
    se = prods.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return est, se


def test_relu_expectation_against_mc_oracle():
    k = np.array(
        [
            [1.00, 0.40, -0.30, 0.10],
            [0.40, 0.80, 0.20, -0.10],
            [-0.30, 0.20, 1.50, 0.60],
            [0.10, -0.10, 0.60, 0.90],
        ]
    )
    assert np.linalg.eigvalsh(k).min() > 0
    est, se = mc_relu_cov(k, n_samples=400_000, seed=20240817)
    got = relu_expectation(k)
    assert np.all(np.abs(got - est) <= 5.0 * se + 1e-12)


def test_relu_expectation_perfect_correlation_exact():
    # rho = 1 entries reproduce sqrt(d_i d_j) / 2 with no arccos wobble
    v = np.array([1.0, 2.0, 0.5])
    k = np.outer(v, v)
    got = relu_expectation(k)
    assert np.abs(got - 0.5 * k).max() <= 1e-14


def test_relu_diagonal_halved_exactly():
    for seed in range(10):
        k = random_psd(7, seed)
        got = relu_expectation(k)
        assert np.array_equal(got.diagonal(), 0.5 * k.diagonal())


def test_relu_degenerate_node_zeroed():
    k = random_psd(5, 2)
    k[2, :] = 0.0
    k[:, 2] = 0.0
    got = relu_expectation(k)
    assert np.array_equal(got[2, :], np.zeros(5))
    assert np.array_equal(got[:, 2], np.zeros(5))
    # the rest behaves as a 4-node problem
    keep = [0, 1, 3, 4]
    sub = relu_expectation(k[np.ix_(keep, keep)])
    assert np.abs(got[np.ix_(keep, keep)] - sub).max() <= 1e-14


def test_relu_preserves_psd():
    for seed in range(10):
        k = random_psd(8, seed + 100, rank=4)
        w = np.linalg.eigvalsh(relu_expectation(k))
        assert w.min() >= -1e-10


def test_relu_requires_square():
    with pytest.raises(ValueError, match="square"):
        relu_expectation(np.zeros((2, 3)))


def test_correlation_map_pinned_values():
    assert correlation_map(1.0) == 1.0
    assert abs(correlation_map(-1.0)) <= 1e-16
    assert abs(correlation_map(0.0) - 1.0 / np.pi) <= 1e-15


def test_correlation_map_properties():
    rng = np.random.default_rng(5)
    rho = np.sort(rng.uniform(-1.0, 1.0, size=1000))
    f = correlation_map(rho)
    assert np.all(f >= rho - 1e-15)
    assert np.all((f >= 0.0) & (f <= 1.0 + 1e-15))
    assert np.all(np.diff(f) >= -1e-15)  # nondecreasing
    # 1-Lipschitz: |f(a) - f(b)| <= |a - b|
    a = rng.uniform(-1.0, 1.0, size=1000)
    b = rng.uniform(-1.0, 1.0, size=1000)
    assert np.all(
        np.abs(correlation_map(a) - correlation_map(b)) <= np.abs(a - b) + 1e-12
    )


def test_correlation_map_clamps_roundoff():
    assert correlation_map(1.0 + 1e-12) == 1.0
    assert abs(correlation_map(-1.0 - 1e-12)) <= 1e-16


# ---------------------------------------------------------------------------
# base covariances

def test_base_inner_matches_formula():
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert np.abs(base_inner(x) - x @ x.T / 3.0).max() <= 1e-15
    y = x[:2]
    assert np.abs(base_inner(x, y) - x @ y.T / 3.0).max() <= 1e-15


def test_base_rbf_unit_diagonal_and_cross():
    x = np.random.default_rng(1).normal(size=(6, 4))
    k = base_rbf(x, gamma=0.3)
    assert np.abs(k.diagonal() - 1.0).max() <= 1e-15
    d2 = ((x[0] - x[3]) ** 2).sum()
    assert abs(k[0, 3] - np.exp(-0.3 * d2)) <= 1e-12
    with pytest.raises(ValueError, match="gamma"):
        base_rbf(x, gamma=0.0)


def test_base_poly_integer_degree_signed():
    x = np.array([[1.0], [-3.0]])
    k = base_poly(x, c=0.0, d=3.0)
    assert k[0, 1] == (-3.0) ** 3


def test_base_poly_fractional_degree_clamps():
    x = np.array([[1.0], [-3.0]])
    k = base_poly(x, c=0.0, d=1.5)
    assert k[0, 1] == 0.0  # negative base clamped before the fractional power
    assert k[0, 0] == 1.0


# ---------------------------------------------------------------------------
# landmark factorization

def test_chol_factor_reconstructs_landmark_block():
    c = random_psd(6, 3) + 0.5 * np.eye(6)
    p = chol_factor(c, c).gram()
    assert np.abs(p - c).max() <= 1e-9


def test_chol_factor_exact_for_spanning_landmarks():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10, 3))
    k = x @ x.T
    idx = np.array([0, 4, 7])
    assert np.linalg.matrix_rank(x[idx]) == 3
    factor = chol_factor(k[:, idx], k[np.ix_(idx, idx)])
    assert np.abs(factor.gram() - k).max() / np.abs(k).max() <= 1e-9


def test_chol_factor_rejects_negative_block():
    with pytest.raises(FactorizationError, match="singular beyond clamping") as exc:
        chol_factor(np.zeros((3, 2)), -np.eye(2))
    assert exc.value.eigenvalue is not None and exc.value.eigenvalue < 0


def test_chol_factor_shape_checks():
    with pytest.raises(ValueError, match="square"):
        chol_factor(np.zeros((3, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError, match="width"):
        chol_factor(np.zeros((3, 3)), np.zeros((2, 2)))


def test_landmark_set_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        LandmarkSet(np.array([0, 0, 1]))
    with pytest.raises(ValueError, match="nonneg"):
        LandmarkSet(np.array([-1, 2]))
    with pytest.raises(ValueError, match="nonempty"):
        LandmarkSet(np.array([], dtype=np.int64))
    assert LandmarkSet.all_nodes(4).count == 4


def test_landmark_draw_deterministic_and_sorted():
    pool = np.arange(50)
    a = LandmarkSet.draw(pool, 10, seed=7)
    b = LandmarkSet.draw(pool, 10, seed=7)
    assert np.array_equal(a.indices, b.indices)
    assert np.all(np.diff(a.indices) > 0)
    with pytest.raises(ValueError, match="cannot draw"):
        LandmarkSet.draw(pool, 51, seed=0)


# ---------------------------------------------------------------------------
# block coherence: gram of the low-rank output == exact output on Q Q^T

def _coherence(block, q, landmarks=None, tol=1e-12):
    k = q.gram()
    k_next = apply_block_exact(k, block)
    q_next = apply_block_lowrank(q, block, landmarks)
    scale = max(np.abs(k_next).max(), 1.0)
    return np.abs(q_next.gram() - k_next).max() / scale


def test_block_coherence_each_block():
    rng = np.random.default_rng(8)
    n = 10
    q = LowRankFactor(rng.normal(size=(n, 4)))
    a = sym_operator(n, extra=3, seed=1)
    other = LowRankFactor(rng.normal(size=(n, 2)))

    assert _coherence(Bias(0.7), q) <= 1e-12
    assert _coherence(Weight(1.3), q) <= 1e-12
    assert _coherence(MixedWeight(0.8, 0.5, 1.1), q) <= 1e-12
    assert _coherence(GraphConv(a), q) <= 1e-12

    # IndependentAdd needs matching representations of the same branch
    k = q.gram()
    k_sum = apply_block_exact(k, IndependentAdd(other.gram()))
    q_sum = apply_block_lowrank(q, IndependentAdd(other))
    assert np.abs(q_sum.gram() - k_sum).max() <= 1e-12

    # activation through all-node landmarks reproduces the dense rule
    assert _coherence(Activation(), q, LandmarkSet.all_nodes(n)) <= 1e-10


def test_activation_needs_landmarks():
    q = LowRankFactor(np.ones((3, 1)))
    with pytest.raises(ValueError, match="landmark"):
        apply_block_lowrank(q, Activation())
    with pytest.raises(ValueError, match="out of range"):
        apply_block_lowrank(q, Activation(), LandmarkSet(np.array([5])))


def test_zero_bias_keeps_factor_object():
    q = LowRankFactor(np.ones((3, 2)))
    assert apply_block_lowrank(q, Bias(0.0)) is q
    widened = apply_block_lowrank(q, Bias(0.5))
    assert widened.rank == 3
    assert np.all(widened.q[:, -1] == 0.5)


def test_graphconv_symmetrizes_and_checks_size():
    a = sym_operator(5)
    k = random_psd(5, 0)
    out = apply_block_exact(k, GraphConv(a))
    assert np.abs(out - out.T).max() == 0.0
    with pytest.raises(ValueError, match="does not match"):
        apply_block_exact(random_psd(4, 0), GraphConv(a))


def test_independent_add_type_checks():
    q = LowRankFactor(np.ones((3, 1)))
    with pytest.raises(TypeError, match="dense kernel"):
        apply_block_exact(np.eye(3), IndependentAdd(q))
    with pytest.raises(TypeError, match="LowRankFactor"):
        apply_block_lowrank(q, IndependentAdd(np.eye(3)))


def test_lowrank_activation_landmark_rows_halved():
    # diagonal entries at landmark rows follow the exact halving rule
    rng = np.random.default_rng(9)
    q = LowRankFactor(rng.normal(size=(8, 3)))
    lm = LandmarkSet(np.array([1, 4, 6]))
    out = apply_block_lowrank(q, Activation(), lm)
    d = q.gram_diag()
    got = out.gram_diag()[lm.indices]
    assert np.abs(got - 0.5 * d[lm.indices]).max() <= 1e-10


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        Bias(-0.1)
    with pytest.raises(ValueError):
        Weight(-1.0)
    with pytest.raises(ValueError):
        MixedWeight(0.5, 0.5, -1.0)
