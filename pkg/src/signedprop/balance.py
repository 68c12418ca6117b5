"""Signed graphs, structural imbalance degree (SID) and balance detection.

Also builds the label- and feature-induced negative graphs used by SBP.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import InvalidInputError
from .graphcore import LabelSet, SparseGraph, row_normalize

__all__ = [
    "DEFAULT_ZERO_TOL",
    "SignedGraph",
    "SidReport",
    "BalanceVerdict",
    "effective_signed_matrix",
    "sid",
    "is_structurally_balanced",
    "label_sbp_negative",
    "feature_sbp_negative",
    "row_softmax",
    "label_sbp_v2_prune",
    "label_sbp_graph",
    "feature_sbp_graph",
    "sid_bound_check",
]

DEFAULT_ZERO_TOL = 1e-12


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Positive and negative propagation operators on ``n`` nodes.

    ``pos`` and ``neg`` may be dense arrays or scipy sparse matrices. When
    ``row_stochastic`` is set both must be non-negative with every nonzero row
    summing to one. Raw SBP negatives and ContraNorm's ``(XX^T)Â`` carry mixed
    signs, so the sign check is tied to that flag.
    """

    pos: object
    neg: object
    row_stochastic: bool = False

    def __post_init__(self):
        if self.pos.shape != self.neg.shape or self.pos.shape[0] != self.pos.shape[1]:
            raise InvalidInputError("pos and neg must be square matrices of equal shape")
        if self.row_stochastic:
            for name in ("pos", "neg"):
                M = getattr(self, name)
                vals = M.data if sp.issparse(M) else np.asarray(M)
                if vals.size and vals.min() < 0:
                    raise InvalidInputError(f"{name} has negative entries")
                rows = np.asarray(M.sum(axis=1)).ravel()
                nz = rows != 0
                if np.any(np.abs(rows[nz] - 1.0) > 1e-9):
                    raise InvalidInputError(f"{name} rows do not sum to 1")

    @property
    def n(self):
        return self.pos.shape[0]


@dataclass(frozen=True)
class SidReport:
    P_avg: float
    N_avg: float
    sid: float
    P_pct: float
    N_pct: float
    sid_pct: float

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class BalanceVerdict:
    """``kind`` is ``"balanced"``, ``"weakly_balanced"`` or ``"unbalanced"``."""

    kind: str
    partition: tuple | None = None

    @property
    def balanced(self):
        return self.kind == "balanced"

    @property
    def weakly_balanced(self):
        return self.kind in ("balanced", "weakly_balanced")


def effective_signed_matrix(g, alpha=1.0, beta=1.0):
    """``alpha * pos - beta * neg`` as a dense array."""
    return alpha * _dense(g.pos) - beta * _dense(g.neg)


def _class_vector(labels, n):
    y = labels.classes if isinstance(labels, LabelSet) else np.asarray(labels)
    if len(y) != n:
        raise InvalidInputError("labels must cover every node")
    if np.any(y < 0):
        raise InvalidInputError("every node needs a class id for SID")
    return np.asarray(y)


def sid(A_s, labels, zero_tol=DEFAULT_ZERO_TOL, pairs="all"):
    """Structural imbalance degree of a signed matrix against node labels.

    With ``pairs="all"`` every pair is treated as connected: a same-label
    pair counts toward ``P`` when its entry is ``<= zero_tol`` and a
    cross-label pair counts toward ``N`` when its entry is ``>= -zero_tol``.
    With ``pairs="edges"`` entries within ``zero_tol`` of zero are absent
    edges and never count, so ``P`` sees only negative and ``N`` only
    positive edges.

    Each node scores its own row; the diagonal is excluded. Percent columns
    divide each node's counts by its number of same-/cross-label partners.
    """
    if zero_tol < 0:
        raise InvalidInputError("zero_tol must be non-negative")
    if pairs not in ("all", "edges"):
        raise InvalidInputError("pairs must be 'all' or 'edges'")
    A = _dense(A_s)
    n = A.shape[0]
    y = _class_vector(labels, n)
    same = y[:, None] == y[None, :]
    np.fill_diagonal(same, False)
    cross = y[:, None] != y[None, :]

    if pairs == "all":
        P = np.sum(same & (A <= zero_tol), axis=1)
        N = np.sum(cross & (A >= -zero_tol), axis=1)
    else:
        P = np.sum(same & (A < -zero_tol), axis=1)
        N = np.sum(cross & (A > zero_tol), axis=1)
    n_same = same.sum(axis=1)
    n_cross = cross.sum(axis=1)

    def pct(count, denom):
        ok = denom > 0
        return 100.0 * float(np.mean(count[ok] / denom[ok])) if ok.any() else 0.0

    P_avg, N_avg = float(P.mean()), float(N.mean())
    P_pct, N_pct = pct(P, n_same), pct(N, n_cross)
    return SidReport(P_avg, N_avg, (P_avg + N_avg) / 2, P_pct, N_pct, (P_pct + N_pct) / 2)


def _sign_supports(g, zero_tol, alpha, beta):
    if isinstance(g, SignedGraph):
        A = effective_signed_matrix(g, alpha, beta)
    else:
        A = _dense(g)
    A = A.copy()
    np.fill_diagonal(A, 0.0)
    pos = (A > zero_tol) | (A.T > zero_tol)
    neg = (A < -zero_tol) | (A.T < -zero_tol)
    return pos, neg


def is_structurally_balanced(g, zero_tol=DEFAULT_ZERO_TOL, alpha=1.0, beta=1.0):
    """Classify a signed graph as balanced, weakly balanced or unbalanced.

    ``g`` is a :class:`SignedGraph` (signs taken from
    ``alpha*pos - beta*neg``) or a signed matrix. Positive-edge components
    are the candidate clusters; a negative edge inside one makes the graph
    unbalanced. Otherwise the graph is balanced when the components 2-color
    along negative edges, and weakly balanced when there are at least two.
    """
    pos, neg = _sign_supports(g, zero_tol, alpha, beta)
    n = pos.shape[0]
    m, comp = connected_components(sp.csr_matrix(pos), directed=False)
    ii, jj = np.nonzero(np.triu(neg, 1))
    if np.any(comp[ii] == comp[jj]) or m < 2:
        return BalanceVerdict("unbalanced")

    adj = [set() for _ in range(m)]
    for a, b in zip(comp[ii], comp[jj]):
        adj[a].add(b)
        adj[b].add(a)
    color = np.full(m, -1)
    bipartite = True
    for start in range(m):
        if not bipartite:
            break
        if color[start] >= 0:
            continue
        color[start] = 0
        queue = deque([start])
        while queue and bipartite:
            u = queue.popleft()
            for v in adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    queue.append(v)
                elif color[v] == color[u]:
                    bipartite = False
                    break
    if bipartite:
        if not np.any(color == 1):
            # no negative edges at all: any split of the components works
            color[m - 1] = 1
        node_color = color[comp]
        groups = (np.flatnonzero(node_color == 0), np.flatnonzero(node_color == 1))
        return BalanceVerdict("balanced", groups)
    groups = tuple(np.flatnonzero(comp == c) for c in range(m))
    return BalanceVerdict("weakly_balanced", groups)


def label_sbp_negative(labels):
    """Raw label-induced negative graph.

    ``+1`` for trained pairs with different classes, ``-1`` for trained pairs
    with equal classes (the diagonal included), ``0`` when either node is
    untrained.
    """
    y = labels.classes
    t = labels.train_mask
    both = t[:, None] & t[None, :]
    M = np.where(y[:, None] == y[None, :], -1.0, 1.0)
    return np.where(both, M, 0.0)


def feature_sbp_negative(X0):
    """Raw feature-induced negative graph ``-X0 X0^T``."""
    X0 = np.asarray(X0, dtype=float)
    return -(X0 @ X0.T)


def row_softmax(M):
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    M = np.asarray(M, dtype=float)
    E = np.exp(M - M.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def label_sbp_v2_prune(A, labels):
    """Drop edges whose endpoints are both trained and differ in class."""
    y, t = labels.classes, labels.train_mask
    i, j = A.edges[:, 0], A.edges[:, 1]
    drop = t[i] & t[j] & (y[i] != y[j])
    w = None if A.weights is None else A.weights[~drop]
    return SparseGraph(A.n, A.edges[~drop], w, self_loops=A.self_loops)


def label_sbp_graph(A, labels):
    """Label-SBP signed graph: ``pos = Â``, ``neg`` = raw label negative."""
    return SignedGraph(row_normalize(A), label_sbp_negative(labels))


def feature_sbp_graph(A, X0):
    """Feature-SBP signed graph: ``pos = Â``, ``neg = -X0 X0^T``."""
    return SignedGraph(row_normalize(A), feature_sbp_negative(X0))


def sid_bound_check(labels, g, alpha=1.0, beta=2.0, zero_tol=DEFAULT_ZERO_TOL, pairs="edges"):
    """Compare the Label-SBP count-form SID with ``(1 - p) n / 2``.

    The bound is a theorem for ``pairs="edges"``: every violating edge has an
    untrained endpoint, and an untrained node has at most ``n/2`` cross-label
    partners. With ``pairs="all"`` the zero entries of untrained rows all count,
    and sparse graphs can exceed the bound.

    ``beta`` must exceed ``alpha`` times the largest positive entry so that
    trained cross-class pairs stay strictly negative; with ``pos = Â`` (entries
    at most 1) the default ``beta = 2 alpha`` guarantees it.

    Returns ``(sid_count, bound, ok)``.
    """
    report = sid(effective_signed_matrix(g, alpha, beta), labels, zero_tol, pairs)
    bound = (1.0 - labels.labeled_ratio) * labels.n / 2
    return report.sid, bound, bool(report.sid <= bound + 1e-9)
