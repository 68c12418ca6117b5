"""Anti-oversmoothing baselines rewritten as signed propagation.

Each baseline has a direct implementation and a ``(pos, neg)`` pair. The
signed evaluation is ``c_self X + c_pos pos X - c_neg neg X``. For the
polynomial kinds (APPNP, JKNET) it is applied to the initial features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .balance import feature_sbp_negative, label_sbp_negative, row_softmax
from .exceptions import InvalidInputError, UndefinedMetricError
from .graphcore import SparseGraph, row_normalize

__all__ = [
    "KINDS",
    "BaselineKind",
    "signed_form",
    "signed_coefficients",
    "evaluate_signed_form",
    "direct_baseline_step",
    "normalization_scale",
    "verify_equivalence",
    "dropedge_mask",
    "method_signed_matrix",
]

KINDS = ("sgc", "batchnorm", "pairnorm", "contranorm", "dropedge", "residual", "appnp", "jknet")
_ALIASES = {"jknet_dagnn": "jknet", "dagnn": "jknet", "gcn": "sgc"}


@dataclass(frozen=True)
class BaselineKind:
    """A baseline tag with its parameters.

    ``alpha`` is the residual/APPNP/ContraNorm strength, ``tau`` the
    ContraNorm temperature, ``k`` the layer index for APPNP/JKNET,
    ``weights`` the JKNET fusion weights (``k + 1`` values summing to 1,
    uniform when omitted) and ``drop_mask`` a 0/1 matrix over ``Â``'s support
    marking dropped entries.
    """

    tag: str
    alpha: float = 0.5
    tau: float = 1.0
    k: int = 2
    weights: tuple | None = None
    drop_mask: object = field(default=None, compare=False)
    eps: float = 0.0

    def __post_init__(self):
        tag = _ALIASES.get(self.tag, self.tag)
        if tag not in KINDS:
            raise InvalidInputError(f"unknown baseline kind {self.tag!r}")
        object.__setattr__(self, "tag", tag)
        if self.k < 0:
            raise InvalidInputError("k must be non-negative")
        if tag == "contranorm" and not self.tau > 0:
            raise InvalidInputError("ContraNorm needs tau > 0")
        if tag == "jknet":
            w = self.weights if self.weights is not None else [1.0 / (self.k + 1)] * (self.k + 1)
            w = tuple(float(v) for v in w)
            if len(w) != self.k + 1:
                raise InvalidInputError("JKNET needs k + 1 fusion weights")
            if abs(sum(w) - 1.0) > 1e-9:
                raise InvalidInputError("JKNET fusion weights must sum to 1")
            object.__setattr__(self, "weights", w)


def _kind(kind, **params):
    return kind if isinstance(kind, BaselineKind) else BaselineKind(kind, **params)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def _powers(A, k):
    out = [np.eye(A.shape[0])]
    for _ in range(k):
        out.append(out[-1] @ A)
    return out


def _masked(A_hat, mask):
    if mask is None:
        raise InvalidInputError("dropedge needs a drop_mask")
    return A_hat * (_dense(mask) != 0)


def signed_form(kind, A_hat, X=None, **params):
    """Return the ``(pos, neg)`` matrices of a baseline as dense arrays."""
    kind = _kind(kind, **params)
    A = _dense(A_hat)
    n = A.shape[0]
    tag = kind.tag
    if tag == "sgc":
        return A, np.zeros_like(A)
    if tag in ("batchnorm", "pairnorm"):
        return A, np.full((n, n), 1.0 / n) @ A
    if tag == "contranorm":
        if X is None:
            raise InvalidInputError("ContraNorm's negative graph depends on X")
        X = np.asarray(X, dtype=float)
        return A, (X @ X.T) @ A
    if tag == "dropedge":
        return A, _masked(A, kind.drop_mask)
    if tag == "residual":
        return A, np.eye(n)
    if tag == "appnp":
        P = _powers(A, kind.k + 1)
        a = kind.alpha
        pos = sum(a**i * P[i] for i in range(kind.k + 2))
        neg = a * sum(a**j * P[j] for j in range(kind.k + 1))
        return pos, neg
    # jknet
    P = _powers(A, kind.k)
    w = kind.weights
    pos = sum(w[i] * P[i] for i in range(kind.k)) + P[kind.k]
    neg = sum(w[:kind.k]) * P[kind.k]
    return pos, neg


def signed_coefficients(kind, **params):
    """``(c_self, c_pos, c_neg)`` used to evaluate the signed pair."""
    kind = _kind(kind, **params)
    if kind.tag == "residual":
        return 1.0, kind.alpha, kind.alpha
    if kind.tag == "contranorm":
        return 0.0, 1.0 + kind.alpha, kind.alpha / kind.tau
    if kind.tag == "sgc":
        return 0.0, 1.0, 0.0
    return 0.0, 1.0, 1.0


def evaluate_signed_form(kind, A_hat, X, **params):
    kind = _kind(kind, **params)
    X = np.asarray(X, dtype=float)
    pos, neg = signed_form(kind, A_hat, X)
    c0, cp, cn = signed_coefficients(kind)
    return c0 * X + cp * (pos @ X) - cn * (neg @ X)


def _column_std(H, eps):
    var = H.var(axis=0)
    if eps == 0 and np.any(var == 0):
        raise UndefinedMetricError("zero-variance feature column with eps=0")
    return np.sqrt(var + eps)


def _pair_scale(Hc):
    g = np.linalg.norm(Hc) / np.sqrt(Hc.shape[0])
    if g == 0:
        raise UndefinedMetricError("PairNorm scale is zero")
    return g


def normalization_scale(kind, A_hat, X, **params):
    """Divisor mapping the centered numerator to full BatchNorm/PairNorm output.

    A per-column vector for BatchNorm, a scalar for PairNorm.
    """
    kind = _kind(kind, **params)
    H = _dense(A_hat) @ np.asarray(X, dtype=float)
    Hc = H - H.mean(axis=0)
    if kind.tag == "batchnorm":
        return _column_std(H, kind.eps)
    if kind.tag == "pairnorm":
        return _pair_scale(Hc)
    raise InvalidInputError("only batchnorm and pairnorm carry a scale")


def direct_baseline_step(kind, A_hat, X, centered=False, **params):
    """The baseline as originally written.

    ``X`` is the current features, or the initial features for APPNP/JKNET,
    which unroll ``k + 1`` and ``k`` steps. ``centered=True`` returns the
    BatchNorm/PairNorm numerator without the variance or norm scaling.
    """
    kind = _kind(kind, **params)
    A = _dense(A_hat)
    X = np.asarray(X, dtype=float)
    tag, a = kind.tag, kind.alpha
    if tag == "sgc":
        return A @ X
    if tag in ("batchnorm", "pairnorm"):
        H = A @ X
        Hc = H - H.mean(axis=0, keepdims=True)
        if centered:
            return Hc
        if tag == "batchnorm":
            return Hc / _column_std(H, kind.eps)
        return Hc / _pair_scale(Hc)
    if tag == "contranorm":
        H = A @ X
        return (1 + a) * H - (a / kind.tau) * (X @ (X.T @ H))
    if tag == "dropedge":
        keep = (A != 0) & (_dense(kind.drop_mask) == 0)
        out = np.zeros_like(X)
        for i in range(A.shape[0]):
            for j in np.flatnonzero(keep[i]):
                out[i] += A[i, j] * X[j]
        return out
    if tag == "residual":
        return (1 - a) * X + a * (A @ X)
    if tag == "appnp":
        Z = X
        for _ in range(kind.k + 1):
            Z = (1 - a) * X + a * (A @ Z)
        return Z
    # jknet: fuse the layer outputs X, ÂX, ..., Â^k X
    out = np.zeros_like(X)
    Z = X
    for i, w in enumerate(kind.weights):
        if i:
            Z = A @ Z
        out = out + w * Z
    return out


def _random_row_stochastic(n, rng, density=0.5):
    M = rng.random((n, n)) * (rng.random((n, n)) < density)
    empty = M.sum(axis=1) == 0
    M[empty, rng.integers(0, n, size=empty.sum())] = 1.0
    return M / M.sum(axis=1, keepdims=True)


def verify_equivalence(kind, trials=100, n=20, d=8, rng=None, k_max=6):
    """Max elementwise gap between direct and signed evaluation.

    Every trial draws ``n' <= n``, ``d' <= d``, a random row-stochastic ``Â``,
    Gaussian features and random per-kind parameters. BatchNorm and PairNorm
    are compared on the centered numerator.
    """
    tag = BaselineKind(kind).tag
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        nn = int(rng.integers(2, n + 1))
        dd = int(rng.integers(1, d + 1))
        A = _random_row_stochastic(nn, rng)
        X = rng.standard_normal((nn, dd))
        params = dict(alpha=float(rng.uniform(0.05, 0.95)), k=int(rng.integers(0, k_max + 1)),
                      tau=float(rng.uniform(0.5, 2.0)))
        if tag == "dropedge":
            params["drop_mask"] = (A != 0) & (rng.random((nn, nn)) < 0.5)
        bk = BaselineKind(tag, **params)
        direct = direct_baseline_step(bk, A, X, centered=True)
        signed = evaluate_signed_form(bk, A, X)
        worst = max(worst, float(np.max(np.abs(direct - signed))))
    return worst


def dropedge_mask(A, drop_prob, rng):
    """Drop each undirected edge independently; return ``(A_kept, A_m)``."""
    if not 0.0 <= drop_prob <= 1.0:
        raise InvalidInputError("drop_prob must lie in [0, 1]")
    drop = rng.random(A.n_edges) < drop_prob
    w = A.weights

    def sub(sel):
        return SparseGraph(A.n, A.edges[sel], None if w is None else w[sel], self_loops=A.self_loops)

    return sub(~drop), sub(drop)


def method_signed_matrix(method, graph, X=None, labels=None, k=None, **params):
    """Signed matrix ``c_pos pos - c_neg neg`` of a method on a graph.

    Also covers ``label_sbp`` (raw label negative) and ``feature_sbp`` (raw
    ``-X0 X0^T``, or its row softmax with ``softmax=True``). The polynomial
    kinds default to ``k = n - 1``, the deep limit.
    """
    A_hat = _dense(row_normalize(graph))
    n = A_hat.shape[0]
    if method == "label_sbp":
        if labels is None:
            raise InvalidInputError("label_sbp needs labels")
        return A_hat - label_sbp_negative(labels)
    if method == "feature_sbp":
        if X is None:
            raise InvalidInputError("feature_sbp needs features")
        neg = feature_sbp_negative(X)
        return A_hat - (row_softmax(neg) if params.pop("softmax", False) else neg)
    base = BaselineKind(method, **params)
    if base.tag in ("appnp", "jknet"):
        base = BaselineKind(base.tag, alpha=base.alpha, k=n - 1 if k is None else k)
    if base.tag == "dropedge" and base.drop_mask is None:
        raise InvalidInputError("dropedge needs a drop_mask")
    pos, neg = signed_form(base, A_hat, X)
    _, cp, cn = signed_coefficients(base)
    return cp * pos - cn * neg
