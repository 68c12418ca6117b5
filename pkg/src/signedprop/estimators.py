"""scikit-learn style wrapper around the propagation engines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .balance import feature_sbp_negative, label_sbp_negative, label_sbp_v2_prune
from .exceptions import InvalidInputError
from .graphcore import LabelSet, SparseGraph, row_normalize
from .propagation import (
    PropagationConfig,
    make_feature_sbp_v2_stepper,
    make_label_sbp_v2_stepper,
    make_sbp_stepper,
    run_propagation,
)

__all__ = ["METHODS", "build_stepper", "SignedPropagation"]

METHODS = ("sgc", "label_sbp", "feature_sbp", "label_sbp_v2", "feature_sbp_v2")


def build_stepper(method, graph, X0, labels, cfg):
    """Return the one-step map ``X -> X'`` for ``method``.

    ``sgc`` is plain ``X <- Â X`` and ignores the post-step. Label methods
    need ``labels`` with a training mask.
    """
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")
    if method.startswith("label") and labels is None:
        raise InvalidInputError(f"{method} needs labels")
    if method == "sgc":
        A_hat = row_normalize(graph)
        return lambda X: A_hat @ X
    if method == "label_sbp":
        return make_sbp_stepper(row_normalize(graph), label_sbp_negative(labels), cfg)
    if method == "feature_sbp":
        return make_sbp_stepper(row_normalize(graph), feature_sbp_negative(X0), cfg)
    if method == "label_sbp_v2":
        return make_label_sbp_v2_stepper(row_normalize(label_sbp_v2_prune(graph, labels)), cfg)
    return make_feature_sbp_v2_stepper(row_normalize(graph), X0, cfg)


class SignedPropagation(TransformerMixin, BaseEstimator):
    """Transductive feature propagation over a fixed graph.

    ``fit(X, y)`` records the graph inputs: ``y`` holds class ids with ``-1``
    on unlabeled nodes, and only the label-based methods read it.
    ``transform(X)`` propagates ``X`` for ``steps`` steps. The rows of ``X``
    must be the graph's nodes in order.

    Composes with :class:`signedprop.evalmodel.LinearHead` in a
    :class:`sklearn.pipeline.Pipeline`, since both accept the same ``y``.

    Parameters
    ----------
    graph : SparseGraph
    method : {"sgc", "label_sbp", "feature_sbp", "label_sbp_v2", "feature_sbp_v2"}
    alpha, beta, lam : float
        Attraction strength, repulsion strength and mixing weight.
    steps : int
    post_step : {"layer_norm", "clamp", "none"}
    clamp_c : float
    layer_norm_mode : {"node", "graph"}
    """

    def __init__(self, graph=None, method="label_sbp", alpha=1.0, beta=0.5, lam=0.5,
                 steps=10, post_step="layer_norm", clamp_c=1.0, layer_norm_mode="node"):
        self.graph = graph
        self.method = method
        self.alpha = alpha
        self.beta = beta
        self.lam = lam
        self.steps = steps
        self.post_step = post_step
        self.clamp_c = clamp_c
        self.layer_norm_mode = layer_norm_mode

    def _config(self):
        return PropagationConfig(alpha=self.alpha, beta=self.beta, lam=self.lam, steps=self.steps,
                                 post_step=self.post_step, clamp_c=self.clamp_c,
                                 layer_norm_mode=self.layer_norm_mode)

    def fit(self, X, y=None):
        if not isinstance(self.graph, SparseGraph):
            raise InvalidInputError("graph must be a SparseGraph")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.graph.n:
            raise InvalidInputError(f"X has {X.shape[0]} rows, graph has {self.graph.n} nodes")
        labels = None
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (self.graph.n,):
                raise InvalidInputError("y must hold one entry per node")
            mask = y >= 0
            labels = LabelSet(np.where(mask, y, 0), mask)
        cfg = self._config()
        self.stepper_ = build_stepper(self.method, self.graph, X, labels, cfg)
        self.config_ = cfg
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "stepper_")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.graph.n:
            raise InvalidInputError("transform expects the same node set as fit")
        result = run_propagation(X, self.stepper_, self.config_, neighbors=self.graph)
        self.trace_ = result.trace
        self.status_ = result.status
        return result.X
