"""Operator registry, bundled operator schemas and built-in implementations."""

from .builtins import (
    IMPLEMENTATIONS, KNN, ConcatFeatures, LogReg, MajorityVote, Projector, Scaler, Stump,
    make_estimator,
)
from .dataset import Dataset, load_csv, make_ablation_data, read_csv, write_csv
from .registry import (
    ESTIMATOR, TRANSFORMER, OperatorSpec, Registry, default_registry, load_bundled,
    load_registry, register, registry_from_json,
)

__all__ = [
    "ConcatFeatures", "Dataset", "ESTIMATOR", "IMPLEMENTATIONS", "KNN", "LogReg",
    "MajorityVote", "OperatorSpec", "Projector", "Registry", "Scaler", "Stump",
    "TRANSFORMER", "default_registry", "load_bundled", "load_csv", "load_registry",
    "make_ablation_data", "make_estimator", "read_csv", "register", "registry_from_json",
    "write_csv",
]
