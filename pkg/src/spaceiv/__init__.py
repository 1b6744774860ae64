"""Sparse causal effect estimation with instrumental variables.

The main entry points are :func:`space_iv` for estimation,
:func:`identify` and :func:`check_b_conditions` for identifiability, and
:func:`run_benchmark` for the random-model simulation study.
"""

from .bench import BenchConfig, classify_assumptions, generate_random_model, run_benchmark
from .errors import SpaceIVError
from .estimators import (
    LIML,
    TSLS,
    FitResult,
    ModelViolationWarning,
    TestConfig,
    ar_statistic,
    liml,
    ols_sparse,
    oracle_fit,
    space_iv,
    space_iv_population,
    subset_intersection,
    tsls,
)
from .graph import CausalGraph, check_b_conditions, marginalize, max_node_disjoint_paths
from .identifiability import (
    check_a1,
    check_a2,
    check_a3,
    identify,
    partial_identifiability,
)
from .kernels import BACKEND
from .model import Dataset, NoiseSpec, Scm, population_covariances, sample_dataset, total_effect_matrix

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BenchConfig",
    "CausalGraph",
    "Dataset",
    "FitResult",
    "LIML",
    "ModelViolationWarning",
    "NoiseSpec",
    "Scm",
    "SpaceIVError",
    "TSLS",
    "TestConfig",
    "ar_statistic",
    "check_a1",
    "check_a2",
    "check_a3",
    "check_b_conditions",
    "classify_assumptions",
    "generate_random_model",
    "identify",
    "liml",
    "marginalize",
    "max_node_disjoint_paths",
    "ols_sparse",
    "oracle_fit",
    "partial_identifiability",
    "population_covariances",
    "run_benchmark",
    "sample_dataset",
    "space_iv",
    "space_iv_population",
    "subset_intersection",
    "total_effect_matrix",
    "tsls",
]
