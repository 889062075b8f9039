"""End-to-end runs behind the command-line interface.

Each runner consumes a RunConfig, does the work, and returns a Report;
writing the report to disk is the caller's choice.  Runs are reproducible:
identical config and seed give identical predictions, metrics and sampled
quantities (timings, of course, vary).
"""

from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from .adjacency import identity_adjacency, normalize_row, normalize_sym
from .datasets import (
    Dataset,
    _load_features_bin,
    _load_features_csv,
    load_dataset,
    make_splits,
    pca_reduce,
    synthetic_dataset,
)
from .finite_width import McConfig, compare_covariance, sample_covariance
from .inference import (
    ExactPosterior,
    LowRankPosterior,
    classify_onehot,
    micro_f1,
    nugget_search,
    one_hot_targets,
    r2,
)
from .kernels import LandmarkSet, LowRankFactor, base_inner, base_poly, base_rbf
from .limits import depth_scan, mlp_fixed_point
from .programs import (
    KernelProgram,
    gcnii_beta_schedule,
    ggp_kernel,
    lowrank_variant,
    nystrom_start,
    run_exact,
)
from .reports import Report

ARCH_CHOICES = ("gcn", "gcnii", "gin", "sage", "ggp", "mlp", "rbf")
PATH_CHOICES = ("exact", "lowrank")
ROW_NORMALIZED = ("sage", "ggp")
GAMMA_GRID = tuple(np.logspace(-2, 2, 9))


@dataclass
class RunConfig:
    """Everything a run needs; unset values fall back to task defaults."""

    dataset: Optional[str] = None
    arch: str = "gcn"
    path: str = "exact"
    layers: int = 2
    sigma_b: Optional[float] = None
    sigma_w: float = 1.0
    sigma_w1: float = 0.0
    sigma_w2: float = 1.0
    alpha: float = 0.1
    decay: float = 0.5
    base: str = "inner"
    gamma: Optional[float] = None
    poly_c: float = 5.0
    poly_d: float = 3.0
    landmarks: Optional[int] = None
    landmark_frac: Optional[float] = None
    seed: int = 0
    nugget: Optional[float] = None
    nugget_grid: tuple = (1e-3, 10.0, 13)
    pca: Optional[int] = None
    center: bool = False
    out: Optional[str] = None
    width: int = 1024
    samples: int = 50
    sizes: tuple = (1000, 2000, 4000, 8000)
    repeats: int = 3
    degree: float = 4.0
    ratios: tuple = (0.48, 0.32, 0.20)

    def validate(self) -> None:
        if self.arch not in ARCH_CHOICES:
            raise ValueError(f"arch must be one of {ARCH_CHOICES}, got {self.arch!r}")
        if self.path not in PATH_CHOICES:
            raise ValueError(f"path must be one of {PATH_CHOICES}, got {self.path!r}")
        if self.layers < 1:
            raise ValueError("layers must be positive")
        if self.landmarks is not None and self.landmarks < 1:
            raise ValueError("landmarks must be positive")
        if self.landmark_frac is not None and not 0 < self.landmark_frac <= 1:
            raise ValueError("landmark-frac must be in (0, 1]")
        if self.nugget is not None and self.nugget <= 0:
            raise ValueError("nugget must be positive")
        lo, hi, count = self.nugget_grid
        if lo <= 0 or hi <= lo or int(count) < 1:
            raise ValueError("nugget-grid must be LO,HI,POINTS with 0 < LO < HI")


class _Phases:
    """Named wall-clock accumulators for the timing table."""

    def __init__(self):
        self.seconds: dict = {}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + (
                time.perf_counter() - start
            )


def _default_sigma_b(cfg: RunConfig, task: str) -> float:
    if cfg.sigma_b is not None:
        return cfg.sigma_b
    return 0.0 if task == "classification" else float(np.sqrt(0.1))


def _operator_for(arch: str, ds: Dataset):
    if arch == "rbf":
        return None
    if arch == "mlp":
        return identity_adjacency(ds.n_nodes)
    if arch in ROW_NORMALIZED:
        return normalize_row(ds.graph)
    return normalize_sym(ds.graph)


def _base_callable(cfg: RunConfig):
    if cfg.base == "inner":
        return base_inner
    if cfg.base == "rbf":
        return partial(base_rbf, gamma=cfg.gamma if cfg.gamma is not None else 1.0)
    if cfg.base == "poly":
        return partial(base_poly, c=cfg.poly_c, d=cfg.poly_d)
    raise ValueError(f"unknown base kernel {cfg.base!r}")


def _program_for(cfg: RunConfig, arch: str, a, sigma_b: float) -> KernelProgram:
    if arch in ("gcn", "mlp"):
        return KernelProgram(arch, a, cfg.layers, sigma_b=sigma_b, sigma_w=cfg.sigma_w)
    if arch == "gcnii":
        return KernelProgram.gcnii(
            a, cfg.layers, sigma_w=cfg.sigma_w, alpha=cfg.alpha,
            beta_schedule=gcnii_beta_schedule(cfg.layers, cfg.decay),
        )
    if arch == "gin":
        return KernelProgram.gin(a, cfg.layers, sigma_b=sigma_b, sigma_w=cfg.sigma_w)
    if arch == "sage":
        return KernelProgram.sage(a, cfg.layers, sigma_w1=cfg.sigma_w1, sigma_w2=cfg.sigma_w2)
    raise ValueError(f"{arch!r} is not a layered architecture")


def _pick_landmarks(cfg: RunConfig, train_idx: np.ndarray, n_nodes: int) -> LandmarkSet:
    """Default: the training indices.  With an explicit count or fraction,
    a seeded uniform draw over all nodes (features carry no labels, so
    landmark choice is transductive)."""
    if cfg.landmarks is None and cfg.landmark_frac is None:
        return LandmarkSet(np.sort(np.asarray(train_idx, dtype=np.int64)))
    if cfg.landmarks is not None:
        count = cfg.landmarks
    else:
        count = max(1, int(round(cfg.landmark_frac * n_nodes)))
    if count > n_nodes:
        raise ValueError(f"asked for {count} landmarks but the graph has {n_nodes} nodes")
    if count == n_nodes:
        return LandmarkSet(np.arange(n_nodes, dtype=np.int64))
    return LandmarkSet.draw(np.arange(n_nodes, dtype=np.int64), count, cfg.seed)


def _preprocess(cfg: RunConfig, ds: Dataset, landmark_count: Optional[int]) -> np.ndarray:
    feats = ds.features
    if cfg.pca is not None:
        if landmark_count is not None and cfg.pca >= landmark_count:
            raise ValueError(
                f"pca dimension {cfg.pca} must stay below the landmark count "
                f"{landmark_count} on the low-rank path"
            )
        feats = pca_reduce(feats, cfg.pca, center=cfg.center)
    elif cfg.center:
        feats = feats - feats.mean(axis=0, keepdims=True)
    return feats


def _build_representation(cfg: RunConfig, arch: str, a, feats, sigma_b: float,
                          landmarks: Optional[LandmarkSet], gamma: Optional[float]):
    """The run's kernel: dense array (exact) or LowRankFactor (lowrank)."""
    if arch == "rbf":
        g = gamma if gamma is not None else 1.0
        if cfg.path == "exact":
            return base_rbf(feats, gamma=g)
        return nystrom_start(feats, landmarks, partial(base_rbf, gamma=g))
    if arch == "ggp":
        if cfg.path == "exact":
            return ggp_kernel(a, feats, c=cfg.poly_c, d=cfg.poly_d)
        q0 = nystrom_start(feats, landmarks, partial(base_poly, c=cfg.poly_c, d=cfg.poly_d))
        return LowRankFactor(a.to_csr() @ q0.q)
    base_fn = _base_callable(cfg)
    program = _program_for(cfg, arch, a, sigma_b)
    if cfg.path == "exact":
        return run_exact(program, base_fn(feats))[-1]
    q0 = nystrom_start(feats, landmarks, base_fn)
    return lowrank_variant(program, q0, landmarks)


def run_infer(cfg: RunConfig) -> Report:
    """Posterior inference on a dataset directory; the flagship run."""
    cfg.validate()
    if cfg.dataset is None:
        raise ValueError("infer needs --dataset")
    ds = load_dataset(cfg.dataset)
    task = ds.task
    sigma_b = _default_sigma_b(cfg, task)
    phases = _Phases()

    landmarks = None
    if cfg.path == "lowrank":
        landmarks = _pick_landmarks(cfg, ds.splits.train, ds.n_nodes)
    feats = _preprocess(cfg, ds, landmarks.count if landmarks else None)
    a = _operator_for(cfg.arch, ds)

    # hyperparameter candidates: the rbf baseline grid-searches gamma
    if cfg.arch == "rbf" and cfg.gamma is None:
        gamma_candidates = GAMMA_GRID
    else:
        gamma_candidates = (cfg.gamma,)
    grid = (
        None
        if cfg.nugget is not None
        else np.logspace(
            np.log10(cfg.nugget_grid[0]),
            np.log10(cfg.nugget_grid[1]),
            int(cfg.nugget_grid[2]),
        )
    )

    best = None
    search_rows = []
    for gamma in gamma_candidates:
        with phases.phase("kernel_build"):
            rep = _build_representation(cfg, cfg.arch, a, feats, sigma_b, landmarks, gamma)
        if grid is None and len(gamma_candidates) == 1:
            best = (rep, gamma, float(cfg.nugget), None)
            break
        with phases.phase("nugget_search"):
            eps, trace = nugget_search(
                rep, ds.splits, ds.targets,
                grid if grid is not None else np.asarray([cfg.nugget]),
                task,
            )
        for eps_i, score_i in trace:
            search_rows.append((gamma, eps_i, score_i))
        score = max(s for _, s in trace)
        if best is None or score > best[3]:
            best = (rep, gamma, eps, score)
    rep, gamma, nugget, _ = best

    if task == "classification":
        classes = np.unique(ds.targets)
        y_train, _ = one_hot_targets(ds.targets[ds.splits.train], classes)
    else:
        classes = None
        y_train = ds.targets[ds.splits.train].astype(np.float64)

    with phases.phase("solve"):
        if cfg.path == "exact":
            fit = ExactPosterior(rep, ds.splits.train, y_train, nugget)
        else:
            fit = LowRankPosterior(rep, ds.splits.train, y_train, nugget)

    with phases.phase("predict"):
        means = {name: fit.mean(getattr(ds.splits, name)) for name in ("train", "val", "test")}
        variance = fit.variance(ds.splits.test) if cfg.path == "lowrank" else None

    metrics = {}
    predictions = {}
    for name, mean in means.items():
        truth = ds.targets[getattr(ds.splits, name)]
        if task == "classification":
            if mean.shape[1] > 1:
                pred = classes[classify_onehot(mean)]
            else:
                pred = np.full(mean.shape[0], classes[0])
            metrics[name] = micro_f1(pred, truth)
        else:
            pred = mean[:, 0]
            metrics[name] = r2(pred, truth)
        predictions[name] = pred

    report = Report("infer")
    report.set("dataset", ds.name)
    report.set("n_nodes", ds.n_nodes)
    report.set("n_edges_undirected", ds.graph.n_edges // 2)
    report.set("task", task)
    report.set("arch", cfg.arch)
    report.set("path", cfg.path)
    report.set("layers", cfg.layers)
    report.set("sigma_b", float(sigma_b))
    report.set("sigma_w", float(cfg.sigma_w))
    if cfg.arch == "gcnii":
        report.set("alpha", float(cfg.alpha))
        report.set("decay", float(cfg.decay))
    if cfg.arch == "sage":
        report.set("sigma_w1", float(cfg.sigma_w1))
        report.set("sigma_w2", float(cfg.sigma_w2))
    if cfg.arch == "ggp":
        report.set("poly_c", float(cfg.poly_c))
        report.set("poly_d", float(cfg.poly_d))
    if cfg.arch == "rbf":
        report.set("gamma", float(gamma if gamma is not None else 1.0))
    report.set("base", "rbf" if cfg.arch == "rbf" else ("poly" if cfg.arch == "ggp" else cfg.base))
    report.set("pca", cfg.pca if cfg.pca is not None else "none")
    report.set("center", cfg.center)
    report.set("seed", cfg.seed)
    if landmarks is not None:
        report.set("landmarks", landmarks.count)
    report.set("nugget", float(nugget))
    report.set("nugget_selected_by", "fixed" if cfg.nugget is not None else "search")
    metric_name = "micro_f1" if task == "classification" else "r2"
    report.set("metric", metric_name)
    for name in ("train", "val", "test"):
        report.set(f"{metric_name}_{name}", float(metrics[name]))

    t = report.table("timing", ("phase", "seconds"))
    for name in ("kernel_build", "nugget_search", "solve", "predict"):
        t.add(name, phases.seconds.get(name, 0.0))

    if search_rows:
        if cfg.arch == "rbf" and len(gamma_candidates) > 1:
            t = report.table("hyper_search", ("gamma", "nugget", "val_score"))
            for row in search_rows:
                t.add(float(row[0]), row[1], row[2])
        else:
            t = report.table("nugget_search", ("nugget", "val_score"))
            for row in search_rows:
                t.add(row[1], row[2])

    header = ["node", "truth", "prediction"]
    if variance is not None:
        header.append("variance")
    t = report.table("predictions", header)
    test_idx = ds.splits.test
    for i, node in enumerate(test_idx):
        row = [int(node), ds.targets[node], predictions["test"][i]]
        if variance is not None:
            row.append(float(variance[i]))
        t.add(*row)
    return report


def run_depth_scan(cfg: RunConfig) -> Report:
    """Layer-by-layer limit diagnostics, with per-depth validation metrics."""
    cfg.validate()
    if cfg.dataset is None:
        raise ValueError("depth-scan needs --dataset")
    ds = load_dataset(cfg.dataset)
    task = ds.task
    sigma_b = _default_sigma_b(cfg, task)
    feats = _preprocess(cfg, ds, None)
    base_fn = _base_callable(cfg)
    k0 = base_fn(feats)
    grid = (
        np.asarray([cfg.nugget])
        if cfg.nugget is not None
        else np.logspace(
            np.log10(cfg.nugget_grid[0]),
            np.log10(cfg.nugget_grid[1]),
            int(cfg.nugget_grid[2]),
        )
    )

    report = Report("depth-scan")
    report.set("dataset", ds.name)
    report.set("n_nodes", ds.n_nodes)
    report.set("task", task)
    report.set("arch", cfg.arch)
    report.set("layers", cfg.layers)
    report.set("sigma_b", float(sigma_b))
    report.set("sigma_w", float(cfg.sigma_w))

    if cfg.arch == "mlp":
        result = mlp_fixed_point(sigma_b, cfg.sigma_w, k0, cfg.layers)
        report.set("regime", result.regime)
        if result.regime == "subcritical":
            report.set("flat_level", float(result.flat_level))
        t = report.table("mlp_trace", ("layer", "limit_gap", "trace", "rho_min"))
        for i in range(result.layers.size):
            t.add(int(result.layers[i]), float(result.gaps[i]),
                  float(result.trace[i]), float(result.rho_min[i]))
        return report

    if cfg.arch in ("ggp", "rbf"):
        raise ValueError(f"depth-scan needs a layered architecture, not {cfg.arch!r}")

    a = _operator_for(cfg.arch, ds)
    program = _program_for(cfg, cfg.arch, a, sigma_b)

    per_depth_metrics = {}

    def measure(layer: int, kernel: np.ndarray) -> None:
        eps, trace = nugget_search(kernel, ds.splits, ds.targets, grid, task)
        if task == "classification":
            classes = np.unique(ds.targets)
            y_train, _ = one_hot_targets(ds.targets[ds.splits.train], classes)
            fit = ExactPosterior(kernel, ds.splits.train, y_train, eps)
            pred = classes[classify_onehot(fit.mean(ds.splits.test))]
            per_depth_metrics[layer] = micro_f1(pred, ds.targets[ds.splits.test])
        else:
            y_train = ds.targets[ds.splits.train].astype(np.float64)
            fit = ExactPosterior(kernel, ds.splits.train, y_train, eps)
            per_depth_metrics[layer] = r2(fit.mean(ds.splits.test)[:, 0],
                                          ds.targets[ds.splits.test])

    trace = depth_scan(program, k0, per_layer=measure)
    report.set("perron_eigenvalue", float(trace.perron.eigenvalue))
    if np.isfinite(trace.scale_base):
        report.set("scale_base", float(trace.scale_base))
    metric_name = "micro_f1" if task == "classification" else "r2"
    t = report.table(
        "depth_trace",
        ("layer", "rho_min", "trace", "top2_singular_ratio", "scaled_gap",
         "cauchy_gap", f"test_{metric_name}"),
    )
    for i in range(trace.layers.size):
        t.add(int(trace.layers[i]), float(trace.rho_min[i]), float(trace.trace[i]),
              float(trace.top2_singular_ratio[i]), float(trace.scaled_gap[i]),
              float(trace.cauchy_gap[i]), float(per_depth_metrics[int(trace.layers[i])]))
    return report


def run_mc_verify(cfg: RunConfig) -> Report:
    """Finite-width sampling against the analytic kernel."""
    cfg.validate()
    if cfg.dataset is None:
        raise ValueError("mc-verify needs --dataset")
    if cfg.arch in ("ggp", "rbf"):
        raise ValueError(f"mc-verify covers the layered architectures, not {cfg.arch!r}")
    if cfg.base != "inner":
        raise ValueError("the finite-width surrogate feeds raw features; base must be inner")
    ds = load_dataset(cfg.dataset)
    sigma_b = _default_sigma_b(cfg, ds.task)
    a = _operator_for(cfg.arch, ds)
    program = _program_for(cfg, cfg.arch, a, sigma_b)
    analytic = run_exact(program, base_inner(ds.features))[-1]
    mc = McConfig(
        architecture=cfg.arch,
        depth=cfg.layers,
        width=cfg.width,
        n_samples=cfg.samples,
        seed=cfg.seed,
        sigma_b=sigma_b,
        sigma_w=cfg.sigma_w,
        alpha=cfg.alpha,
        beta_schedule=program.beta_schedule,
        sigma_w1=cfg.sigma_w1,
        sigma_w2=cfg.sigma_w2,
    )
    empirical = sample_covariance(mc, a, ds.features)
    err = compare_covariance(empirical, analytic)

    report = Report("mc-verify")
    report.set("dataset", ds.name)
    report.set("arch", cfg.arch)
    report.set("layers", cfg.layers)
    report.set("width", cfg.width)
    report.set("samples", cfg.samples)
    report.set("seed", cfg.seed)
    report.set("sigma_b", float(sigma_b))
    report.set("sigma_w", float(cfg.sigma_w))
    report.set("rel_frobenius_error", float(err))
    return report


def run_benchmark(cfg: RunConfig) -> Report:
    """Low-rank kernel-build time against graph size; median of repeats."""
    cfg.validate()
    arch = cfg.arch if cfg.arch in ("gcn", "gcnii", "gin", "sage") else "gcn"
    n_landmarks = cfg.landmarks if cfg.landmarks is not None else 128
    rows = []
    for n in cfg.sizes:
        ds = synthetic_dataset(
            int(n), avg_degree=cfg.degree, n_features=32, n_classes=2, seed=cfg.seed
        )
        a = _operator_for(arch, ds)
        landmarks = LandmarkSet.draw(
            ds.splits.train, min(n_landmarks, ds.splits.train.size), cfg.seed
        )
        sigma_b = 0.0 if cfg.sigma_b is None else cfg.sigma_b
        program = _program_for(cfg, arch, a, sigma_b)
        times = []
        for _ in range(cfg.repeats):
            start = time.perf_counter()
            q0 = nystrom_start(ds.features, landmarks, base_inner)
            lowrank_variant(program, q0, landmarks)
            times.append(time.perf_counter() - start)
        m_plus_n = ds.graph.n_edges // 2 + int(n)
        rows.append((int(n), m_plus_n, float(np.median(times)), times))

    sizes = np.array([r[1] for r in rows], dtype=np.float64)  # m + n
    medians = np.array([r[2] for r in rows])
    slope = float(np.polyfit(np.log(sizes), np.log(medians), 1)[0])

    report = Report("benchmark")
    report.set("arch", arch)
    report.set("layers", cfg.layers)
    report.set("landmarks", n_landmarks)
    report.set("repeats", cfg.repeats)
    report.set("seed", cfg.seed)
    report.set("loglog_slope", slope)
    t = report.table("scaling", ("n_nodes", "m_plus_n", "median_build_seconds", "all_seconds"))
    for n, mn, med, times in rows:
        t.add(n, mn, med, "|".join(format(x, ".6g") for x in times))
    return report


def run_make_splits(cfg: RunConfig) -> Report:
    """Generate splits.json for a dataset directory that lacks one."""
    cfg.validate()
    if cfg.dataset is None:
        raise ValueError("make-splits needs --dataset")
    feat_csv = os.path.join(cfg.dataset, "features.csv")
    feat_bin = os.path.join(cfg.dataset, "features.bin")
    if os.path.exists(feat_csv):
        n = _load_features_csv(feat_csv).shape[0]
    elif os.path.exists(feat_bin):
        n = _load_features_bin(feat_bin).shape[0]
    else:
        raise FileNotFoundError(f"{cfg.dataset}: missing features.csv or features.bin")
    target = os.path.join(cfg.dataset, "splits.json")
    if os.path.exists(target):
        raise FileExistsError(
            f"{target} already exists; delete it first to regenerate"
        )
    splits = make_splits(n, cfg.ratios, cfg.seed)
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "train": splits.train.tolist(),
                "val": splits.val.tolist(),
                "test": splits.test.tolist(),
            },
            fh,
        )
        fh.write("\n")

    report = Report("make-splits")
    report.set("dataset", cfg.dataset)
    report.set("n_nodes", n)
    report.set("seed", cfg.seed)
    report.set("ratios", ",".join(format(r, "g") for r in cfg.ratios))
    report.set("n_train", int(splits.train.size))
    report.set("n_val", int(splits.val.size))
    report.set("n_test", int(splits.test.size))
    return report
