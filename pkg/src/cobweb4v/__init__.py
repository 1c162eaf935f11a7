"""Cobweb/4V: incremental concept formation over images, plus MLP baselines."""

__version__ = "0.1.0"

from cobweb4v.data import Dataset, load_mnist
from cobweb4v.predict import (
    PredictOutcome,
    log_collocation,
    predict,
    predict_label,
    predict_many,
)
from cobweb4v.stats import AttrStats, ContractError, LabelTable
from cobweb4v.tree import CobwebTree, ConceptNode, Instance, TreeConfig

__all__ = [
    "AttrStats",
    "CobwebTree",
    "ConceptNode",
    "ContractError",
    "Dataset",
    "Instance",
    "LabelTable",
    "PredictOutcome",
    "TreeConfig",
    "load_mnist",
    "log_collocation",
    "predict",
    "predict_many",
    "predict_label",
]
