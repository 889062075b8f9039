"""Gaussian-process kernels from wide graph networks.

Covariance programs for GCN, GCNII, GIN and GraphSAGE layers in exact and
low-rank (landmark) form, posterior inference for node-level prediction,
finite-width sampling checks, and depth-limit diagnostics.
"""

from .adjacency import (
    PowerIterationError,
    SparseAdjacency,
    SpectralInfo,
    build_adjacency,
    identity_adjacency,
    is_connected,
    normalize_row,
    normalize_sym,
    read_edge_list,
    spectral_radius,
)
from .datasets import (
    Dataset,
    load_dataset,
    make_splits,
    pca_reduce,
    random_connected_edges,
    save_dataset,
    synthetic_dataset,
)
from .finite_width import McConfig, compare_covariance, sample_covariance
from .inference import (
    ExactPosterior,
    LowRankPosterior,
    PosteriorResult,
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
    base_rbf,
    chol_factor,
    correlation_map,
    relu_expectation,
)
from .limits import (
    DepthTrace,
    MlpLimitResult,
    depth_scan,
    mlp_fixed_point,
    mlp_recursion,
)
from .programs import (
    KernelProgram,
    gcn_exact,
    gcn_lowrank,
    gcnii_beta_schedule,
    gcnii_exact,
    ggp_kernel,
    gin_exact,
    lowrank_variant,
    nystrom_start,
    run_exact,
    sage_exact,
)
from .reports import Report, Table, report_schema
from .runners import RunConfig

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "Bias",
    "Dataset",
    "DepthTrace",
    "ExactPosterior",
    "FactorizationError",
    "GraphConv",
    "IndependentAdd",
    "KernelProgram",
    "LandmarkSet",
    "LowRankFactor",
    "LowRankPosterior",
    "McConfig",
    "MixedWeight",
    "MlpLimitResult",
    "PosteriorResult",
    "PowerIterationError",
    "Report",
    "RunConfig",
    "SparseAdjacency",
    "SpectralInfo",
    "SplitIndices",
    "Table",
    "Weight",
    "apply_block_exact",
    "apply_block_lowrank",
    "base_inner",
    "base_poly",
    "base_rbf",
    "build_adjacency",
    "chol_factor",
    "classify_onehot",
    "compare_covariance",
    "correlation_map",
    "default_nugget_grid",
    "depth_scan",
    "gcn_exact",
    "gcn_lowrank",
    "gcnii_beta_schedule",
    "gcnii_exact",
    "ggp_kernel",
    "gin_exact",
    "identity_adjacency",
    "is_connected",
    "load_dataset",
    "lowrank_variant",
    "make_splits",
    "micro_f1",
    "mlp_fixed_point",
    "mlp_recursion",
    "normalize_row",
    "normalize_sym",
    "nugget_search",
    "nystrom_start",
    "one_hot_targets",
    "pca_reduce",
    "posterior_mean_exact",
    "posterior_mean_lowrank",
    "posterior_variance_lowrank",
    "r2",
    "read_edge_list",
    "relu_expectation",
    "report_schema",
    "run_exact",
    "sage_exact",
    "sample_covariance",
    "save_dataset",
    "select_nugget",
    "spectral_radius",
    "random_connected_edges",
    "synthetic_dataset",
    "__version__",
]
