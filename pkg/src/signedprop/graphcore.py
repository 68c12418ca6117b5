"""Graphs, label sets, row normalization, homophily and file formats.

Dense matrices are plain ``numpy.ndarray`` objects in float64. Sparse
adjacency is stored as canonical undirected edge lists and materialized as
``scipy.sparse.csr_matrix`` on demand.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import EdgeListParseError, InvalidInputError, UndefinedMetricError

__all__ = [
    "SparseGraph",
    "LabelSet",
    "row_normalize",
    "homophily_level",
    "load_signed_edgelist",
    "save_signed_edgelist",
    "load_dense_csv",
    "save_dense_csv",
    "load_labels_csv",
    "save_labels_csv",
]


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Undirected graph on ``n`` nodes.

    ``edges`` holds each unordered pair once as ``(i, j)`` with ``i < j``,
    sorted lexicographically. Use :meth:`from_edges` to build one from
    arbitrary pair lists.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray | None = None
    self_loops: bool = False
    _adj: sp.csr_matrix = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.n < 0:
            raise InvalidInputError("node count must be non-negative")
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise InvalidInputError("edge endpoint out of range")
        if np.any(edges[:, 0] >= edges[:, 1]):
            raise InvalidInputError("edges must be canonical (i < j); use SparseGraph.from_edges")
        if len(edges) > 1:
            keys = edges[:, 0] * self.n + edges[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise InvalidInputError("edges must be sorted and unique; use SparseGraph.from_edges")
        object.__setattr__(self, "edges", _frozen(edges))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(edges),) or np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise InvalidInputError("weights must be finite positive reals, one per edge")
            object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_edges(cls, n, pairs, weights=None, self_loops=False):
        """Canonicalize an iterable of ``(i, j)`` pairs (either orientation).

        Duplicate pairs collapse to one edge; self-loops are rejected.
        """
        pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                           dtype=np.int64).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise InvalidInputError("self-loop in edge list")
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        keys, idx = np.unique(lo * max(n, 1) + hi, return_index=True)
        canon = np.stack([lo[idx], hi[idx]], axis=1) if len(keys) else np.empty((0, 2), np.int64)
        w = None
        if weights is not None:
            w = np.asarray(weights, dtype=float)[idx]
        return cls(n=int(n), edges=canon, weights=w, self_loops=self_loops)

    @classmethod
    def from_adjacency(cls, A, self_loops=False):
        """Build from a symmetric adjacency (dense or sparse); diagonal ignored."""
        A = sp.coo_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError("adjacency must be square")
        mask = A.row < A.col
        rows, cols, vals = A.row[mask], A.col[mask], A.data[mask]
        keep = vals != 0
        weights = vals[keep].astype(float)
        pairs = np.stack([rows[keep], cols[keep]], axis=1)
        w = None if np.all(weights == 1.0) else weights
        return cls.from_edges(A.shape[0], pairs, weights=w, self_loops=self_loops)

    @property
    def n_edges(self):
        return len(self.edges)

    def adjacency(self):
        """Symmetric CSR adjacency; identity added when ``self_loops`` is set."""
        if self._adj is None:
            w = np.ones(len(self.edges)) if self.weights is None else self.weights
            i, j = self.edges[:, 0], self.edges[:, 1]
            A = sp.coo_matrix(
                (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                shape=(self.n, self.n),
            ).tocsr()
            if self.self_loops:
                A = (A + sp.identity(self.n, format="csr")).tocsr()
            A.sort_indices()
            object.__setattr__(self, "_adj", A)
        return self._adj

    def degrees(self):
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def has_edge(self, i, j):
        return bool(self.adjacency()[i, j] != 0)

    def is_connected(self):
        if self.n == 0:
            return True
        ncomp, _ = connected_components(self.adjacency(), directed=False)
        return ncomp == 1

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        same_w = (self.weights is None and other.weights is None) or (
            self.weights is not None and other.weights is not None
            and np.array_equal(self.weights, other.weights))
        return (self.n == other.n and self.self_loops == other.self_loops
                and np.array_equal(self.edges, other.edges) and same_w)

    __hash__ = object.__hash__

    def with_self_loops(self, flag=True):
        return SparseGraph(self.n, self.edges, self.weights, self_loops=flag)


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Per-node class ids plus the training mask."""

    classes: np.ndarray
    train_mask: np.ndarray

    def __post_init__(self):
        classes = np.asarray(self.classes, dtype=np.int64).ravel()
        mask = np.asarray(self.train_mask, dtype=bool).ravel()
        if classes.shape != mask.shape:
            raise InvalidInputError("classes and train_mask differ in length")
        if classes.size and classes.min() < 0:
            raise InvalidInputError("class ids must be non-negative")
        object.__setattr__(self, "classes", _frozen(classes))
        object.__setattr__(self, "train_mask", _frozen(mask))

    def __eq__(self, other):
        if not isinstance(other, LabelSet):
            return NotImplemented
        return (np.array_equal(self.classes, other.classes)
                and np.array_equal(self.train_mask, other.train_mask))

    __hash__ = object.__hash__

    @classmethod
    def fully_labeled(cls, classes):
        classes = np.asarray(classes)
        return cls(classes, np.ones(classes.shape, dtype=bool))

    @property
    def n(self):
        return len(self.classes)

    @property
    def n_classes(self):
        return int(self.classes.max()) + 1 if self.n else 0

    @property
    def labeled_ratio(self):
        return float(self.train_mask.sum()) / self.n if self.n else 0.0

    def with_mask(self, mask):
        return LabelSet(self.classes, mask)

    def masked_targets(self):
        """Class ids with ``-1`` on untrained nodes (semi-supervised convention)."""
        y = self.classes.copy()
        y[~self.train_mask] = -1
        return y


def _as_matrix(A):
    if isinstance(A, SparseGraph):
        return A.adjacency()
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A, dtype=float)


def row_normalize(A):
    """Return ``D^{-1} A``.

    Accepts a :class:`SparseGraph`, a scipy sparse matrix or a dense array and
    returns the same storage kind (sparse CSR for graph inputs). Zero rows stay
    zero, so isolated nodes are fixed points of propagation with the result.
    """
    M = _as_matrix(A)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("row_normalize expects a square matrix")
    if sp.issparse(M):
        if M.nnz and M.data.min() < 0:
            raise InvalidInputError("row_normalize requires non-negative entries")
        deg = np.asarray(M.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg != 0)
        out = sp.diags(inv) @ M
        return out.tocsr()
    if np.any(M < 0):
        raise InvalidInputError("row_normalize requires non-negative entries")
    deg = M.sum(axis=1)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg != 0)
    return M * inv[:, None]


def homophily_level(G, labels):
    """Mean same-label neighbor fraction over non-isolated nodes.

    Isolated nodes are skipped rather than counted as zero.
    """
    A = _as_matrix(G)
    A = sp.csr_matrix(A)
    A.setdiag(0)
    A.eliminate_zeros()
    y = labels.classes if isinstance(labels, LabelSet) else np.asarray(labels)
    if len(y) != A.shape[0]:
        raise InvalidInputError("label count does not match graph size")
    B = (A != 0).astype(float).tocsr()
    deg = np.asarray(B.sum(axis=1)).ravel()
    if not np.any(deg > 0):
        raise UndefinedMetricError("homophily is undefined when every node is isolated")
    rows = np.repeat(np.arange(B.shape[0]), np.diff(B.indptr))
    same = np.bincount(rows, weights=(y[rows] == y[B.indices]).astype(float),
                       minlength=B.shape[0])
    keep = deg > 0
    return float(np.mean(same[keep] / deg[keep]))


# ---------------------------------------------------------------- file formats


def save_signed_edgelist(path, pos, neg=None):
    """Write ``n <N>`` then one ``i j s`` line per edge, sorted by ``(i, j)``."""
    n = pos.n
    if neg is None:
        neg = SparseGraph(n, np.empty((0, 2), np.int64))
    if neg.n != n:
        raise InvalidInputError("positive and negative graphs differ in size")
    rows = [(int(i), int(j), "+1") for i, j in pos.edges]
    rows += [(int(i), int(j), "-1") for i, j in neg.edges]
    rows.sort()
    for a, b in zip(rows, rows[1:]):
        if a[:2] == b[:2]:
            raise InvalidInputError(f"edge {a[0]} {a[1]} is both positive and negative")
    lines = [f"n {n}"] + [f"{i} {j} {s}" for i, j, s in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_signed_edgelist(path):
    """Parse a signed edge list; returns ``(positive, negative)`` graphs."""
    text = Path(path).read_text(encoding="utf-8")
    n = None
    signs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise EdgeListParseError("expected header 'n <count>'", lineno)
            try:
                n = int(parts[1])
            except ValueError:
                raise EdgeListParseError(f"bad node count {parts[1]!r}", lineno) from None
            if n < 0:
                raise EdgeListParseError("negative node count", lineno)
            continue
        if len(parts) != 3:
            raise EdgeListParseError(f"expected 'i j s', got {line!r}", lineno)
        try:
            i, j, s = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise EdgeListParseError(f"non-integer field in {line!r}", lineno) from None
        if s not in (1, -1):
            raise EdgeListParseError(f"sign must be +1 or -1, got {parts[2]}", lineno)
        if i == j:
            raise EdgeListParseError(f"self-loop on node {i}", lineno)
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListParseError(f"node id out of range 0..{n - 1}", lineno)
        key = (min(i, j), max(i, j))
        if key in signs and signs[key] != s:
            raise EdgeListParseError(f"contradictory sign for edge {key[0]} {key[1]}", lineno)
        signs[key] = s
    if n is None:
        raise EdgeListParseError("missing header 'n <count>'", 1)
    pos = [k for k, s in signs.items() if s == 1]
    neg = [k for k, s in signs.items() if s == -1]
    return SparseGraph.from_edges(n, pos), SparseGraph.from_edges(n, neg)


def save_dense_csv(path, X):
    """One row per line, no header; floats written with round-trip precision."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    buf = io.StringIO()
    for row in X:
        buf.write(",".join(repr(float(v)) for v in row))
        buf.write("\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_dense_csv(path):
    text = Path(path).read_text(encoding="utf-8")
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        return np.empty((0, 0))
    try:
        X = np.array([[float(v) for v in line.split(",")] for line in rows], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"malformed dense CSV {path}: {exc}") from None
    return X


def save_labels_csv(path, labels):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "class", "mask"])
    for i, (c, m) in enumerate(zip(labels.classes, labels.train_mask)):
        w.writerow([i, int(c), int(m)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_labels_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["node", "class", "mask"]:
            raise InvalidInputError("labels CSV must have header node,class,mask")
        rows = sorted((int(r["node"]), int(r["class"]), int(r["mask"])) for r in reader)
    if [r[0] for r in rows] != list(range(len(rows))):
        raise InvalidInputError("labels CSV must list nodes 0..n-1 exactly once")
    return LabelSet([r[1] for r in rows], [bool(r[2]) for r in rows])
