"""Signed-graph message passing and Structural Balance Propagation (SBP)."""

from .balance import (
    SidReport,
    SignedGraph,
    is_structurally_balanced,
    label_sbp_graph,
    sid,
    sid_bound_check,
)
from .csbm import CsbmParams, generate
from .estimators import SignedPropagation
from .evalmodel import LinearHead, accuracy, train
from .exceptions import (
    DegenerateTrainingError,
    EdgeListParseError,
    InvalidInputError,
    NumericFailureError,
    UndefinedMetricError,
)
from .graphcore import LabelSet, SparseGraph, row_normalize
from .propagation import PropagationConfig, run_propagation, signed_step
from .spectral import build_laplacians, critical_beta

__version__ = "0.1.0"

__all__ = [
    "CsbmParams",
    "DegenerateTrainingError",
    "EdgeListParseError",
    "InvalidInputError",
    "LabelSet",
    "LinearHead",
    "NumericFailureError",
    "PropagationConfig",
    "SidReport",
    "SignedGraph",
    "SignedPropagation",
    "SparseGraph",
    "UndefinedMetricError",
    "accuracy",
    "build_laplacians",
    "critical_beta",
    "generate",
    "is_structurally_balanced",
    "label_sbp_graph",
    "row_normalize",
    "run_propagation",
    "sid",
    "sid_bound_check",
    "signed_step",
    "train",
]
