"""Signed propagation, SBP updates, pairwise clamped dynamics and energy tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .balance import SignedGraph, row_softmax
from .exceptions import InvalidInputError, NumericFailureError
from .graphcore import SparseGraph

__all__ = [
    "PropagationConfig",
    "EnergyTrace",
    "PropagationResult",
    "signed_step",
    "layer_norm",
    "apply_post_step",
    "sbp_step",
    "make_sbp_stepper",
    "feature_sbp_v2_factor",
    "feature_sbp_v2_step",
    "make_feature_sbp_v2_stepper",
    "make_label_sbp_v2_stepper",
    "clamp_fc",
    "pairwise_dynamics",
    "dirichlet_energy",
    "run_propagation",
]

POST_STEPS = ("none", "layer_norm", "clamp")


@dataclass(frozen=True)
class PropagationConfig:
    """Strengths, mixing weight, depth and post-step for one propagation run.

    ``post_step`` is ``"none"``, ``"layer_norm"`` or ``"clamp"`` (bound
    ``clamp_c``). ``layer_norm_mode`` picks the normalization axis: ``"node"``
    normalizes each node's feature vector, ``"graph"`` uses one mean and
    standard deviation over the whole feature matrix.
    """

    alpha: float = 1.0
    beta: float = 0.5
    lam: float = 0.5
    steps: int = 2
    post_step: str = "layer_norm"
    clamp_c: float = 1.0
    layer_norm_mode: str = "node"
    layer_norm_eps: float = 1e-5
    divergence_norm_cap: float = 1e8

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidInputError("alpha and beta must be non-negative")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError("lambda must lie in [0, 1]")
        if self.steps < 0:
            raise InvalidInputError("steps must be non-negative")
        if self.post_step not in POST_STEPS:
            raise InvalidInputError(f"post_step must be one of {POST_STEPS}")
        if self.post_step == "clamp" and not self.clamp_c > 0:
            raise InvalidInputError("clamp bound must be positive")
        if self.layer_norm_mode not in ("node", "graph"):
            raise InvalidInputError("layer_norm_mode must be 'node' or 'graph'")


@dataclass
class EnergyTrace:
    energy: list = field(default_factory=list)
    norm: list = field(default_factory=list)

    def __len__(self):
        return len(self.energy)

    def rows(self):
        return [(k, e, m) for k, (e, m) in enumerate(zip(self.energy, self.norm))]


@dataclass
class PropagationResult:
    X: np.ndarray
    trace: EnergyTrace
    status: str
    snapshots: dict = field(default_factory=dict)


def _matmul(M, X):
    return M @ X


def signed_step(X, g, alpha, beta):
    """``(1 - alpha + beta) X + alpha pos X - beta neg X``."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != g.n:
        raise InvalidInputError(f"X has {X.shape[0]} rows, graph has {g.n} nodes")
    return (1 - alpha + beta) * X + alpha * _matmul(g.pos, X) - beta * _matmul(g.neg, X)


def layer_norm(X, eps=1e-5, mode="node"):
    """Standardize features without a learned affine map."""
    X = np.asarray(X, dtype=float)
    if mode == "graph":
        return (X - X.mean()) / np.sqrt(X.var() + eps)
    mu = X.mean(axis=1, keepdims=True)
    var = X.var(axis=1, keepdims=True)
    return (X - mu) / np.sqrt(var + eps)


def clamp_fc(z, c):
    """Saturate ``z`` to ``[-c, c]``."""
    if not c > 0:
        raise InvalidInputError("clamp bound must be positive")
    return np.clip(z, -c, c) if isinstance(z, np.ndarray) else min(max(z, -c), c)


def apply_post_step(X, cfg):
    if cfg.post_step == "layer_norm":
        return layer_norm(X, cfg.layer_norm_eps, cfg.layer_norm_mode)
    if cfg.post_step == "clamp":
        return np.clip(X, -cfg.clamp_c, cfg.clamp_c)
    return X


def _sbp_mix(X, pos, repel, cfg):
    lam = cfg.lam
    mixed = (1 - lam) * X + lam * (cfg.alpha * _matmul(pos, X) - cfg.beta * repel)
    return apply_post_step(mixed, cfg)


def sbp_step(X, pos, neg_raw, cfg):
    """One SBP update followed by ``cfg.post_step``.

    ``neg_raw`` is the raw Label- or Feature-SBP negative matrix. Use
    :func:`make_sbp_stepper` to softmax it once for repeated steps.
    """
    return _sbp_mix(np.asarray(X, dtype=float), pos, row_softmax(neg_raw) @ X, cfg)


def make_sbp_stepper(pos, neg_raw, cfg):
    """Return ``X -> X'`` for Label-/Feature-SBP; the softmax is computed once."""
    S = row_softmax(neg_raw)
    return lambda X: _sbp_mix(X, pos, S @ X, cfg)


def feature_sbp_v2_factor(X0):
    """The ``d x d`` factor ``softmax(-X0^T X0)``."""
    X0 = np.asarray(X0, dtype=float)
    return row_softmax(-(X0.T @ X0))


def feature_sbp_v2_step(X, pos, X0, cfg):
    """Feature-SBP-v2: repulsion acts across feature columns, ``O(n d^2)``."""
    return _sbp_mix(np.asarray(X, dtype=float), pos, X @ feature_sbp_v2_factor(X0), cfg)


def make_feature_sbp_v2_stepper(pos, X0, cfg):
    F = feature_sbp_v2_factor(X0)
    return lambda X: _sbp_mix(X, pos, X @ F, cfg)


def make_label_sbp_v2_stepper(pos_pruned, cfg):
    """Label-SBP-v2: attraction over the pruned graph only, no dense negative."""
    lam = cfg.lam
    return lambda X: apply_post_step((1 - lam) * X + lam * cfg.alpha * _matmul(pos_pruned, X), cfg)


def pairwise_dynamics(x0, signs, alpha, beta, c, steps, rng, record_every=1):
    """Randomized pairwise clamped dynamics on a complete signed graph.

    Each step draws one unordered pair uniformly and updates both endpoints
    from their pre-step values with ``theta = alpha`` on positive and
    ``theta = -beta`` on negative pairs::

        x_s <- clamp((1 - theta) x_s + theta x_other, -c, c)

    Returns ``(trajectory, final_state)`` where ``trajectory`` holds the state
    every ``record_every`` steps (row 0 is ``x0``).
    """
    x = [float(v) for v in np.asarray(x0, dtype=float)]
    n = len(x)
    signs = np.asarray(signs)
    if signs.shape != (n, n):
        raise InvalidInputError("signs must be an n x n matrix")
    theta = np.where(signs > 0, alpha, np.where(signs < 0, -beta, np.nan))
    off = ~np.eye(n, dtype=bool)
    if np.isnan(theta[off]).any():
        raise InvalidInputError("pairwise dynamics needs a complete signed graph")
    theta = theta.tolist()
    lo, hi = -c, c

    traj = [list(x)] if record_every else []
    chunk = 4096
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        I = rng.integers(0, n, size=m)
        J = rng.integers(0, n - 1, size=m)
        J = J + (J >= I)
        for i, j in zip(I.tolist(), J.tolist()):
            t = theta[i][j]
            xi, xj = x[i], x[j]
            a = (1 - t) * xi + t * xj
            b = (1 - t) * xj + t * xi
            x[i] = lo if a < lo else hi if a > hi else a
            x[j] = lo if b < lo else hi if b > hi else b
            done += 1
            if record_every and done % record_every == 0:
                traj.append(list(x))
    return np.array(traj), np.array(x)


def _support_pairs(neighbors, n):
    if isinstance(neighbors, SignedGraph):
        S = sp.csr_matrix(neighbors.pos) + sp.csr_matrix(abs(sp.csr_matrix(neighbors.neg)))
    elif isinstance(neighbors, SparseGraph):
        S = neighbors.adjacency()
    else:
        S = sp.csr_matrix(neighbors)
    S = abs(S)
    S = ((S + S.T) != 0).tocoo()
    keep = S.row != S.col
    if S.shape[0] != n:
        raise InvalidInputError("neighbor structure does not match X")
    return S.row[keep], S.col[keep]


def dirichlet_energy(X, neighbors):
    """Mean over nodes of the summed squared distance to each neighbor.

    For a :class:`SignedGraph` the neighborhood is the union of the positive
    and negative supports.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    r, c = _support_pairs(neighbors, X.shape[0])
    diff = X[r] - X[c]
    return float(np.sum(diff * diff) / X.shape[0])


def run_propagation(X0, stepper, cfg, neighbors=None, record_at=(), converge_tol=1e-8):
    """Iterate ``stepper`` for ``cfg.steps`` steps, tracking energy and norm.

    Status is ``"diverged"`` once ``max|X|`` exceeds ``cfg.divergence_norm_cap``
    (iteration stops there), ``"converged_to_mean"`` when every row is within
    ``converge_tol`` of the column means, ``"clustered"`` when the last step
    moved nothing by more than ``converge_tol`` but rows still differ, and
    ``"running"`` otherwise. ``record_at`` lists depths whose states are kept
    in ``result.snapshots``.
    """
    X = np.array(X0, dtype=float, copy=True)
    record_at = set(int(k) for k in record_at)
    trace = EnergyTrace()
    snapshots = {}

    def observe(k, X):
        trace.energy.append(dirichlet_energy(X, neighbors) if neighbors is not None else float("nan"))
        trace.norm.append(float(np.linalg.norm(X)))
        if k in record_at:
            snapshots[k] = X.copy()

    observe(0, X)
    status = None
    last_change = np.inf
    for k in range(1, cfg.steps + 1):
        X_new = np.asarray(stepper(X), dtype=float)
        if not np.all(np.isfinite(X_new)):
            if np.any(np.isnan(X_new)):
                raise NumericFailureError(k)
            status = "diverged"
            X = X_new
            break
        last_change = float(np.max(np.abs(X_new - X))) if X.size else 0.0
        X = X_new
        observe(k, X)
        if X.size and np.max(np.abs(X)) > cfg.divergence_norm_cap:
            status = "diverged"
            break

    if status is None:
        dev = float(np.max(np.abs(X - X.mean(axis=0)))) if X.size else 0.0
        if dev < converge_tol:
            status = "converged_to_mean"
        elif last_change < converge_tol:
            status = "clustered"
        else:
            status = "running"
    return PropagationResult(X, trace, status, snapshots)
