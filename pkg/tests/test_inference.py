import numpy as np
import pytest

from graphgp import (
    ExactPosterior,
    FactorizationError,
    LowRankFactor,
    LowRankPosterior,
    SplitIndices,
    classify_onehot,
    default_nugget_grid,
    micro_f1,
    nugget_search,
    one_hot_targets,
    posterior_mean_exact,
    posterior_mean_lowrank,
    posterior_variance_lowrank,
    r2,
    select_nugget,
)


def test_split_indices_validation():
    with pytest.raises(ValueError, match="duplicates"):
        SplitIndices(np.array([0, 0]), np.array([1]), np.array([2]))
    with pytest.raises(ValueError, match="disjoint"):
        SplitIndices(np.array([0]), np.array([0]), np.array([1]))
    with pytest.raises(ValueError, match="nonnegative"):
        SplitIndices(np.array([-1]), np.array([1]), np.array([2]))
    s = SplitIndices(np.array([0]), np.array([1]), np.array([2]))
    with pytest.raises(ValueError, match="graph has 2 nodes"):
        s.validate_for(2)
    s.validate_for(3)


def test_one_hot_is_unit_indicators():
    mat, classes = one_hot_targets(np.array([2, 0, 2, 1]))
    assert np.array_equal(classes, [0, 1, 2])
    assert np.array_equal(
        mat,
        [[0, 0, 1], [1, 0, 0], [0, 0, 1], [0, 1, 0]],
    )
    assert set(np.unique(mat)) == {0.0, 1.0}  # indicators, never centered


def test_rank_one_posterior_hand_value():
    # Q = [1, 1]^T, train node 0 with y = 2, eps = 1:
    # G = 1 + 1 = 2, coef = 2 / 2 = 1, prediction at node 1 = 1
    q = LowRankFactor(np.ones((2, 1)))
    fit = LowRankPosterior(q, np.array([0]), np.array([2.0]), nugget=1.0)
    assert abs(fit.mean(np.array([1]))[0, 0] - 1.0) <= 1e-14

    # the dense route through K = Q Q^T agrees
    dense = ExactPosterior(q.gram(), np.array([0]), np.array([2.0]), nugget=1.0)
    assert abs(dense.mean(np.array([1]))[0, 0] - 1.0) <= 1e-14


def test_all_ones_kernel_hand_value():
    # K = ones(3), train {0, 1} with y = 3, eps = 1:
    # (K_bb + I) = [[2, 1], [1, 2]], inverse maps [3, 3] to [1, 1],
    # prediction at node 2 = [1, 1] . [1, 1] = 2
    k = np.ones((3, 3))
    fit = ExactPosterior(k, np.array([0, 1]), np.array([3.0, 3.0]), nugget=1.0)
    got = fit.mean(np.array([2]))[0, 0]
    assert abs(got - 2.0) <= 1e-12


def test_lowrank_matches_dense_woodbury():
    rng = np.random.default_rng(0)
    n, r = 30, 6
    q = LowRankFactor(rng.normal(size=(n, r)))
    k = q.gram()
    train = np.arange(12)
    rest = np.arange(12, n)
    y = rng.normal(size=(12, 2))
    for eps in (1e-3, 1.0, 10.0):
        dense = ExactPosterior(k, train, y, eps).mean(rest)
        low = LowRankPosterior(q, train, y, eps).mean(rest)
        scale = np.abs(dense).max()
        assert np.abs(dense - low).max() / scale <= 1e-8, eps


def test_lowrank_variance_matches_dense_woodbury():
    # eps * diag(Q_* G^{-1} Q_*^T) must equal the dense predictive variance
    # diag(K_** - K_*b (K_bb + eps I)^{-1} K_b*) evaluated on K = Q Q^T
    rng = np.random.default_rng(1)
    n, r = 25, 5
    q = LowRankFactor(rng.normal(size=(n, r)))
    k = q.gram()
    train = np.arange(10)
    rest = np.arange(10, n)
    for eps in (1e-3, 1.0, 10.0):
        kbb = k[np.ix_(train, train)] + eps * np.eye(train.size)
        ksb = k[np.ix_(rest, train)]
        dense = np.diag(k[np.ix_(rest, rest)] - ksb @ np.linalg.solve(kbb, ksb.T))
        got = LowRankPosterior(
            q, train, np.zeros(train.size), eps
        ).variance(rest)
        assert np.abs(dense - got).max() <= 1e-8 * max(1.0, np.abs(dense).max()), eps


def test_variance_clamped_nonnegative():
    q = LowRankFactor(np.random.default_rng(2).normal(size=(10, 3)))
    var = posterior_variance_lowrank(
        q, SplitIndices(np.arange(5), np.array([5]), np.arange(6, 10)), nugget=1e-12
    )
    assert np.all(var >= 0.0)


def test_posterior_wrappers_default_to_test_split():
    rng = np.random.default_rng(3)
    q = LowRankFactor(rng.normal(size=(8, 3)))
    split = SplitIndices(np.arange(4), np.array([4, 5]), np.array([6, 7]))
    y = rng.normal(size=4)
    exact = posterior_mean_exact(q.gram(), split, y, 0.5)
    low = posterior_mean_lowrank(q, split, y, 0.5)
    assert exact.mean.shape == (2, 1)
    assert np.abs(exact.mean - low.mean).max() <= 1e-10
    assert exact.nugget == 0.5
    at_val = posterior_mean_exact(q.gram(), split, y, 0.5, predict=split.val)
    assert at_val.mean.shape == (2, 1)


def test_exact_posterior_jitter_recovers_singular_block():
    # rank-deficient PSD block with zero nugget: first factorization fails,
    # the jittered retry succeeds
    v = np.array([1.0, 1.0, 2.0])
    k = np.outer(v, v)
    fit = ExactPosterior(k, np.array([0, 1]), np.array([1.0, 1.0]), nugget=0.0)
    assert np.isfinite(fit.mean(np.array([2]))).all()


def test_exact_posterior_indefinite_block_raises():
    k = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
    with pytest.raises(FactorizationError, match="not positive definite"):
        ExactPosterior(k, np.array([0, 1]), np.array([0.0, 0.0]), nugget=0.0)


def test_lowrank_posterior_needs_positive_nugget():
    q = LowRankFactor(np.ones((3, 1)))
    with pytest.raises(ValueError, match="positive nugget"):
        LowRankPosterior(q, np.array([0]), np.array([1.0]), nugget=0.0)


def test_target_count_mismatch():
    with pytest.raises(ValueError, match="2 training targets for 3"):
        ExactPosterior(np.eye(4), np.arange(3), np.zeros(2), nugget=1.0)


def test_classify_onehot_ties_take_lowest_index():
    mean = np.array([[0.5, 0.5, 0.1], [0.2, 0.7, 0.7]])
    assert np.array_equal(classify_onehot(mean), [0, 1])
    with pytest.raises(ValueError, match="two channels"):
        classify_onehot(np.ones((3, 1)))


def test_micro_f1_is_accuracy():
    pred = np.array([0, 1, 1, 2])
    truth = np.array([0, 1, 2, 2])
    assert micro_f1(pred, truth) == 0.75
    with pytest.raises(ValueError):
        micro_f1(np.array([]), np.array([]))


def test_r2_reference_points():
    truth = np.array([1.0, 2.0, 3.0])
    assert r2(truth, truth) == 1.0
    assert abs(r2(np.full(3, truth.mean()), truth)) <= 1e-15
    assert np.isnan(r2(np.zeros(2), np.ones(2)))  # constant truth


def test_default_nugget_grid_shape():
    grid = default_nugget_grid()
    assert grid.size == 13
    assert abs(grid[0] - 1e-3) <= 1e-18
    assert abs(grid[-1] - 10.0) <= 1e-12
    with pytest.raises(ValueError):
        default_nugget_grid(lo=0.0)


def test_nugget_search_ties_prefer_smaller():
    # a flat classification score across the grid keeps the smallest eps
    rng = np.random.default_rng(4)
    q = LowRankFactor(rng.normal(size=(12, 4)))
    split = SplitIndices(np.arange(6), np.array([6, 7, 8]), np.array([9, 10, 11]))
    targets = np.array([0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1])
    eps, trace = nugget_search(q, split, targets, grid=np.array([1.0, 0.1, 10.0]))
    scores = [s for _, s in trace]
    if len(set(scores)) == 1:
        assert eps == 0.1  # grid is sorted before the scan
    assert trace[0][0] == 0.1
    assert select_nugget(q, split, targets, grid=np.array([1.0, 0.1, 10.0])) == eps


def test_nugget_search_regression_constant_validation_warns():
    rng = np.random.default_rng(5)
    k = rng.normal(size=(8, 8))
    k = k @ k.T
    split = SplitIndices(np.arange(4), np.array([4, 5]), np.array([6, 7]))
    targets = np.array([0.3, -0.1, 0.5, 0.2, 1.0, 1.0, 0.0, 0.4])
    with pytest.warns(RuntimeWarning, match="constant"):
        eps, trace = nugget_search(k, split, targets, task="regression")
    assert eps == default_nugget_grid()[0]
    assert np.isnan(trace[0][1])


def test_nugget_search_validation_errors():
    q = LowRankFactor(np.ones((4, 1)))
    no_val = SplitIndices(np.arange(2), np.array([], dtype=np.int64), np.array([2, 3]))
    with pytest.raises(ValueError, match="validation"):
        nugget_search(q, no_val, np.zeros(4, dtype=np.int64))
    split = SplitIndices(np.array([0, 1]), np.array([2]), np.array([3]))
    with pytest.raises(ValueError, match="unknown task"):
        nugget_search(q, split, np.zeros(4, dtype=np.int64), task="ranking")
    with pytest.raises(ValueError, match="empty nugget grid"):
        nugget_search(q, split, np.zeros(4, dtype=np.int64), grid=np.array([]))


def test_nugget_search_picks_regression_optimum():
    # smooth kernel, noisy targets: the search lands on a grid point whose
    # validation score is the max of the trace
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40, 3))
    k = np.exp(-0.5 * ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    f = np.sin(x[:, 0]) + 0.1 * rng.normal(size=40)
    split = SplitIndices(np.arange(20), np.arange(20, 30), np.arange(30, 40))
    eps, trace = nugget_search(k, split, f, task="regression")
    best = max(s for _, s in trace)
    chosen = [s for e, s in trace if e == eps][0]
    assert chosen == best
