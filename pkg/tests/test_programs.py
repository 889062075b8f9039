import numpy as np
import pytest

from graphgp import (
    FactorizationError,
    KernelProgram,
    LandmarkSet,
    LowRankFactor,
    McConfig,
    base_inner,
    base_poly,
    compare_covariance,
    gcn_exact,
    gcn_lowrank,
    gcnii_beta_schedule,
    gcnii_exact,
    ggp_kernel,
    gin_exact,
    identity_adjacency,
    lowrank_variant,
    nystrom_start,
    run_exact,
    sage_exact,
    sample_covariance,
)

from conftest import random_features, row_operator, sym_operator


# Independent oracle: the ReLU expectation written from scratch (arccos on
# the correlation, explicit diagonal), used to hand-roll each recursion.

def oracle_g(k):
    d = np.sqrt(np.diag(k))
    rho = np.clip(k / np.outer(d, d), -1.0, 1.0)
    t = np.arccos(rho)
    c = 0.5 / np.pi * np.outer(d, d) * (np.sin(t) + (np.pi - t) * rho)
    np.fill_diagonal(c, 0.5 * np.diag(k))
    return c


def test_gcn_recursion_matches_hand_oracle():
    n = 9
    a = sym_operator(n, extra=3, seed=0)
    ad = a.toarray()
    x = random_features(n, 5, seed=1)
    k0 = x @ x.T / 5.0
    sb, sw = 0.3, 1.2

    k = k0
    expected = []
    for layer in range(3):
        c = oracle_g(k) if layer > 0 else k
        k = sb**2 + sw**2 * (ad @ c @ ad.T)
        expected.append(k)

    got = gcn_exact(a, k0, sigma_b=sb, sigma_w=sw, depth=3)
    assert len(got) == 3
    for g, e in zip(got, expected):
        assert np.abs(g - e).max() / np.abs(e).max() <= 1e-12


def test_first_layer_skips_activation():
    # layer one consumes K0 directly; applying g there would change the result
    n = 6
    a = sym_operator(n, seed=2)
    k0 = base_inner(random_features(n, 4, seed=3))
    got = gcn_exact(a, k0, sigma_b=0.0, sigma_w=1.0, depth=1)[0]
    ad = a.toarray()
    assert np.abs(got - ad @ k0 @ ad.T).max() <= 1e-12


def test_mlp_is_gcn_on_identity():
    n = 7
    k0 = base_inner(random_features(n, 4, seed=4))
    prog = KernelProgram.mlp(n, 3, sigma_b=0.2, sigma_w=1.1)
    via_mlp = run_exact(prog, k0)
    via_gcn = gcn_exact(identity_adjacency(n), k0, sigma_b=0.2, sigma_w=1.1, depth=3)
    for m, g in zip(via_mlp, via_gcn):
        assert np.array_equal(m, g)


def test_gcnii_beta_schedule_formula():
    got = gcnii_beta_schedule(4, decay=0.5)
    expect = [np.log(0.5 / l + 1.0) for l in (1, 2, 3, 4)]
    assert np.abs(np.asarray(got) - expect).max() <= 1e-15


def test_gcnii_alpha_one_collapses_to_scaled_base():
    # alpha = 1 kills the convolution branch, so every layer rebuilds from
    # the skip alone: K_l = K0 * ((1 - b_l)^2 + b_l^2 sigma_w^2), with no
    # accumulation across layers
    n = 6
    a = sym_operator(n, seed=5)
    k0 = base_inner(random_features(n, 4, seed=6))
    betas = gcnii_beta_schedule(3)
    sw = 1.3
    got = gcnii_exact(a, k0, sigma_w=sw, alpha=1.0, depth=3)
    last = (1 - betas[-1]) ** 2 + betas[-1] ** 2 * sw**2
    assert np.abs(got - last * k0).max() / np.abs(k0).max() <= 1e-12


def test_gcnii_hand_oracle():
    n = 8
    a = sym_operator(n, extra=2, seed=7)
    ad = a.toarray()
    k0 = base_inner(random_features(n, 6, seed=8))
    alpha, sw = 0.1, 1.05
    betas = gcnii_beta_schedule(3)

    k = k0
    for layer in range(3):
        c = oracle_g(k) if layer > 0 else k
        mixed = (1 - alpha) ** 2 * (ad @ c @ ad.T) + alpha**2 * k0
        b = betas[layer]
        k = mixed * ((1 - b) ** 2 + b**2 * sw**2)

    got = gcnii_exact(a, k0, sigma_w=sw, alpha=alpha, depth=3)
    assert np.abs(got - k).max() / np.abs(k).max() <= 1e-12


def test_gin_hand_oracle_and_degenerate_case():
    n = 7
    a = sym_operator(n, extra=2, seed=9)
    ad = a.toarray()
    k0 = base_inner(random_features(n, 5, seed=10))
    sb, sw = 0.2, 0.9

    k = k0
    for layer in range(2):
        c = oracle_g(k) if layer > 0 else k
        b = sw**2 * (ad @ c @ ad.T) + sb**2
        k = sw**2 * oracle_g(b) + sb**2  # inner stage always activates

    got = gin_exact(a, k0, sigma_b=sb, sigma_w=sw, depth=2)
    assert np.abs(got - k).max() / np.abs(k).max() <= 1e-12

    # sigma_w = 0 leaves only the bias: K = sigma_b^2 everywhere
    flat = gin_exact(a, k0, sigma_b=0.5, sigma_w=0.0, depth=2)
    assert np.abs(flat - 0.25).max() <= 1e-15


def test_sage_own_branch_off_matches_row_gcn():
    n = 8
    a = row_operator(n, extra=2, seed=11)
    k0 = base_inner(random_features(n, 5, seed=12))
    via_sage = sage_exact(a, k0, sigma_w1=0.0, sigma_w2=1.2, depth=3)
    via_gcn = gcn_exact(a, k0, sigma_b=0.0, sigma_w=1.2, depth=3)[-1]
    assert np.array_equal(via_sage, via_gcn)


def test_sage_hand_oracle():
    n = 8
    a = row_operator(n, extra=2, seed=13)
    ad = a.toarray()
    k0 = base_inner(random_features(n, 5, seed=14))
    s1, s2 = 0.7, 1.1

    k = k0
    for layer in range(2):
        c = oracle_g(k) if layer > 0 else k
        k = s1**2 * c + s2**2 * (ad @ c @ ad.T)

    got = sage_exact(a, k0, sigma_w1=s1, sigma_w2=s2, depth=2)
    assert np.abs(got - k).max() / np.abs(k).max() <= 1e-12


def test_ggp_kernel_formula():
    n = 6
    a = row_operator(n, seed=15)
    x = random_features(n, 3, seed=16)
    got = ggp_kernel(a, x, c=5.0, d=3.0)
    ad = a.toarray()
    expect = ad @ ((x @ x.T + 5.0) ** 3) @ ad.T
    assert np.abs(got - expect).max() / np.abs(expect).max() <= 1e-12


def test_program_validation():
    a = sym_operator(4)
    with pytest.raises(ValueError, match="unknown architecture"):
        KernelProgram("resnet", a, 2)
    with pytest.raises(ValueError, match="depth"):
        KernelProgram("gcn", a, 0)
    with pytest.raises(ValueError, match="one beta per layer"):
        KernelProgram("gcnii", a, 3, beta_schedule=(0.1,))
    with pytest.raises(ValueError, match="does not match"):
        run_exact(KernelProgram.gcn(a, 1), np.eye(5))


# ---------------------------------------------------------------------------
# low-rank twins

def test_all_landmark_lowrank_matches_exact_every_arch():
    n = 12
    x = random_features(n, n + 6, seed=17)  # wide features keep K0 full rank
    lm = LandmarkSet.all_nodes(n)
    sym = sym_operator(n, extra=4, seed=18)
    row = row_operator(n, extra=4, seed=18)
    programs = [
        KernelProgram.gcn(sym, 3, sigma_b=0.3, sigma_w=1.1),
        KernelProgram.gcnii(sym, 3, sigma_w=1.2),
        KernelProgram.gin(sym, 2, sigma_b=0.2, sigma_w=0.9),
        KernelProgram.sage(row, 3, sigma_w1=0.6, sigma_w2=1.0),
        KernelProgram.mlp(n, 3, sigma_b=0.3, sigma_w=1.1),
    ]
    for prog in programs:
        k = run_exact(prog, base_inner(x))[-1]
        q = lowrank_variant(prog, nystrom_start(x, lm), lm)
        err = np.abs(q.gram() - k).max() / np.abs(k).max()
        assert err <= 1e-10, prog.architecture


def test_lowrank_rank_bookkeeping():
    n = 15
    x = random_features(n, 6, seed=19)
    lm = LandmarkSet.draw(np.arange(n), 5, seed=1)
    sym = sym_operator(n, extra=3, seed=20)
    q0 = nystrom_start(x, lm)

    with_bias = gcn_lowrank(sym, q0, lm, sigma_b=0.3, sigma_w=1.0, depth=3)
    assert with_bias.rank == lm.count + 1  # activation resets, bias adds one

    bias_free = gcn_lowrank(sym, q0, lm, sigma_b=0.0, sigma_w=1.0, depth=3)
    assert bias_free.rank == lm.count

    gcnii = KernelProgram.gcnii(sym, 4, sigma_w=1.0)
    q = lowrank_variant(gcnii, q0, lm)
    assert q.rank == lm.count + q0.rank  # skip re-adds the base factor


def test_nystrom_start_landmark_rows():
    x = random_features(9, 4, seed=21)
    lm = LandmarkSet(np.array([0, 3, 8]))
    q = nystrom_start(x, lm, base_inner)
    k0 = base_inner(x)
    block = q.gram()[np.ix_(lm.indices, lm.indices)]
    assert np.abs(block - k0[np.ix_(lm.indices, lm.indices)]).max() <= 1e-10


def test_lowrank_failure_names_layer():
    n = 6
    sym = sym_operator(n, seed=22)
    lm = LandmarkSet.all_nodes(n)
    zero = LowRankFactor(np.zeros((n, 2)))
    with pytest.raises(FactorizationError, match="layer 2"):
        gcn_lowrank(sym, zero, lm, sigma_b=0.0, sigma_w=1.0, depth=2)


def test_lowrank_size_mismatch():
    sym = sym_operator(6, seed=23)
    q0 = LowRankFactor(np.ones((5, 2)))
    with pytest.raises(ValueError, match="does not match"):
        gcn_lowrank(sym, q0, LandmarkSet.all_nodes(5), depth=1)


# ---------------------------------------------------------------------------
# finite-width agreement for the compositions whose covariance rules have no
# closed-form cross-check (the sampler is the second route)

@pytest.mark.parametrize("arch", ["gcnii", "gin", "sage"])
def test_finite_width_agreement(arch):
    n = 10
    x = random_features(n, 6, seed=24)
    sym = sym_operator(n, extra=3, seed=25)
    row = row_operator(n, extra=3, seed=25)
    if arch == "gcnii":
        prog = KernelProgram.gcnii(sym, 2, sigma_w=1.0)
    elif arch == "gin":
        prog = KernelProgram.gin(sym, 2, sigma_b=0.2, sigma_w=1.0)
    else:
        prog = KernelProgram.sage(row, 2, sigma_w1=0.8, sigma_w2=1.0)
    analytic = run_exact(prog, base_inner(x))[-1]
    cfg = McConfig(
        architecture=arch,
        depth=2,
        width=1024,
        n_samples=120,
        seed=42,
        sigma_b=getattr(prog, "sigma_b", 0.0),
        sigma_w=prog.sigma_w,
        alpha=prog.alpha,
        beta_schedule=prog.beta_schedule,
        sigma_w1=prog.sigma_w1,
        sigma_w2=prog.sigma_w2,
    )
    a = row if arch == "sage" else sym
    empirical = sample_covariance(cfg, a, x)
    assert compare_covariance(empirical, analytic) <= 0.05
