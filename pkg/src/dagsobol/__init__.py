"""Sobol sensitivity analysis of networked processes with polynomial chaos."""

from __future__ import annotations

__version__ = "0.1.0"

from .basis import (
    Empirical,
    Normal,
    OrthonormalBasis,
    Uniform,
    evaluate_basis,
    group_basis,
    min_observations,
    tensor_basis,
    univariate_basis,
)
from .dag import Decomposition, ProcessDag, build_dag
from .data import Dataset, read_csv
from .engines import (
    EngineConfig,
    LevelExpansion,
    PceModel,
    fit_naive,
    fit_network,
    fit_sparse_network,
    network_min_observations,
    replicate,
)
from .processes import (
    ProcessSpec,
    builtin_injection_molding,
    builtin_welding,
    load_spec,
    simulate,
)
from .regression import CoefficientVector, FitConfig, dense_fit, sparse_fit
from .sobol import SobolReport, moments_from_pce, pareto_data, sobol_from_pce, sobol_pick_freeze

__all__ = [
    "CoefficientVector", "Dataset", "Decomposition", "Empirical", "EngineConfig", "FitConfig",
    "LevelExpansion", "Normal", "OrthonormalBasis", "PceModel", "ProcessDag", "ProcessSpec",
    "SobolReport", "Uniform", "build_dag", "builtin_injection_molding", "builtin_welding",
    "dense_fit", "evaluate_basis", "fit_naive", "fit_network", "fit_sparse_network", "group_basis",
    "load_spec", "min_observations", "moments_from_pce", "network_min_observations", "pareto_data",
    "read_csv", "replicate", "simulate", "sobol_from_pce", "sobol_pick_freeze", "sparse_fit",
    "tensor_basis", "univariate_basis",
]
