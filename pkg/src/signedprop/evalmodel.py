"""Linear softmax head over propagated features, and accuracy scoring."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DegenerateTrainingError, InvalidInputError

__all__ = ["LinearHead", "train", "accuracy", "stratified_mask"]


def stratified_mask(classes, ratio, rng):
    """Boolean mask selecting ``round(ratio * class_size)`` nodes of each class."""
    classes = np.asarray(classes)
    mask = np.zeros(len(classes), dtype=bool)
    for c in np.unique(classes):
        idx = np.flatnonzero(classes == c)
        k = int(round(ratio * len(idx)))
        mask[rng.permutation(idx)[:k]] = True
    return mask


def _softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


class LinearHead(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression trained by full-batch gradient descent.

    Targets equal to ``-1`` are treated as unlabeled and ignored by
    :meth:`fit`, so the head can sit after a transductive propagation step in
    a :class:`sklearn.pipeline.Pipeline`.

    Parameters
    ----------
    learning_rate : float
    epochs : int
    weight_decay : float
        L2 penalty on the weights (not the bias).
    n_classes : int or None
        Number of output classes; inferred from the labeled targets if None.
    random_state : int
        Seed for the weight initialization.
    """

    def __init__(self, learning_rate=0.2, epochs=100, weight_decay=1e-5,
                 n_classes=None, random_state=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.n_classes = n_classes
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.int64)
        keep = y >= 0
        Xl, yl = X[keep], y[keep]
        if len(yl) == 0:
            raise DegenerateTrainingError("no labeled rows to train on")
        if len(np.unique(yl)) < 2:
            raise DegenerateTrainingError("training labels contain a single class")
        C = self.n_classes if self.n_classes is not None else int(yl.max()) + 1
        m, d = Xl.shape
        rng = np.random.default_rng(self.random_state)
        W = 0.01 * rng.standard_normal((d, C))
        b = np.zeros(C)
        Y = np.zeros((m, C))
        Y[np.arange(m), yl] = 1.0

        def loss(P):
            nll = -np.mean(np.log(P[np.arange(m), yl] + 1e-300))
            return nll + 0.5 * self.weight_decay * np.sum(W * W)

        losses = []
        for _ in range(self.epochs):
            P = _softmax(Xl @ W + b)
            losses.append(loss(P))
            G = (P - Y) / m
            W = W - self.learning_rate * (Xl.T @ G + self.weight_decay * W)
            b = b - self.learning_rate * G.sum(axis=0)
        losses.append(loss(_softmax(Xl @ W + b)))

        self.coef_ = W
        self.intercept_ = b
        self.classes_ = np.arange(C)
        self.n_features_in_ = d
        self.loss_curve_ = np.array(losses)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        # argmax returns the first maximum: ties go to the lower class id
        return np.argmax(self.decision_function(X), axis=1)


def train(X, labels, **params):
    """Fit a :class:`LinearHead` on the nodes selected by ``labels.train_mask``."""
    if not labels.train_mask.any():
        raise InvalidInputError("train_mask is empty")
    head = LinearHead(n_classes=labels.n_classes, **params)
    return head.fit(X, labels.masked_targets())


def accuracy(head, X, labels, eval_mask):
    """Percentage of ``eval_mask`` nodes whose predicted class is correct."""
    eval_mask = np.asarray(eval_mask, dtype=bool)
    if not eval_mask.any():
        raise InvalidInputError("eval_mask is empty")
    pred = head.predict(np.asarray(X)[eval_mask])
    return 100.0 * float(np.mean(pred == labels.classes[eval_mask]))
