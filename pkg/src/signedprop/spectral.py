"""Signed Laplacians, the propagation matrix M and the critical strength beta*."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidInputError
from .graphcore import SparseGraph
from .propagation import PropagationConfig, run_propagation

__all__ = [
    "SignedLaplacians",
    "build_laplacians",
    "largest_eigenvalue",
    "f_beta",
    "g_beta",
    "critical_beta",
    "PhaseCheck",
    "expected_phase",
    "verify_phase",
    "growth_rate",
    "empirical_beta_boundary",
    "random_signed_instance",
]

DENSE_EIG_LIMIT = 500
BETA_HI_START = 10.0
BETA_HI_MAX = 2.0**20


@dataclass(frozen=True)
class SignedLaplacians:
    """``L_pos = D+ - A+``, ``L_neg_repelling = -D- + A-`` and ``M``.

    ``M = I - alpha L_pos - beta L_neg_repelling``. In ``normalized`` mode
    node ``i`` uses ``alpha / deg+_i`` and ``beta / deg-_i``, which makes
    ``M`` the matrix of the row-normalized signed step.
    """

    L_pos: np.ndarray
    L_neg_repelling: np.ndarray
    M: np.ndarray
    alpha: float
    beta: float
    mode: str = "unnormalized"


def _adj(g, n):
    if g.n != n:
        raise InvalidInputError("positive and negative graphs must share the node set")
    A = g.adjacency().toarray()
    np.fill_diagonal(A, 0.0)
    return A


def build_laplacians(pos, neg, alpha, beta, mode="unnormalized"):
    if mode not in ("unnormalized", "normalized"):
        raise InvalidInputError("mode must be 'unnormalized' or 'normalized'")
    n = pos.n
    Ap, An = _adj(pos, n), _adj(neg, n)
    if np.any((Ap != 0) & (An != 0)):
        raise InvalidInputError("an edge is both positive and negative")
    Dp, Dn = Ap.sum(axis=1), An.sum(axis=1)
    L_pos = np.diag(Dp) - Ap
    L_rep = -np.diag(Dn) + An
    if mode == "unnormalized":
        a = np.full(n, float(alpha))
        b = np.full(n, float(beta))
    else:
        with np.errstate(divide="ignore"):
            a = np.where(Dp > 0, alpha / Dp, 0.0)
            b = np.where(Dn > 0, beta / Dn, 0.0)
    M = np.eye(n) - a[:, None] * L_pos - b[:, None] * L_rep
    return SignedLaplacians(L_pos, L_rep, M, float(alpha), float(beta), mode)


def largest_eigenvalue(S, tol=1e-13, max_iter=100000):
    """Largest eigenvalue of a symmetric matrix.

    LAPACK's symmetric solver up to ``n = 500``; beyond that, power iteration
    on ``S + s I`` with ``s`` the largest absolute row sum (so every
    eigenvalue is shifted to be non-negative).
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if n <= DENSE_EIG_LIMIT:
        return float(np.linalg.eigvalsh(S)[-1])
    shift = float(np.abs(S).sum(axis=1).max())
    B = S + shift * np.eye(n)
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        lam_new = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return lam - shift


def _centered(M):
    n = M.shape[0]
    return M - np.full((n, n), 1.0 / n)


def f_beta(pos, neg, alpha, beta):
    """``lambda_max(M - 11^T/n)``."""
    return largest_eigenvalue(_centered(build_laplacians(pos, neg, alpha, beta).M))


def g_beta(pos, neg, alpha, beta):
    """``lambda_min(M - 11^T/n)``."""
    return -largest_eigenvalue(-_centered(build_laplacians(pos, neg, alpha, beta).M))


def _check_preconditions(pos, neg, alpha):
    if not pos.is_connected():
        raise InvalidInputError("positive subgraph must be connected")
    deg = _adj(pos, pos.n).sum(axis=1)
    if not 0 < alpha < 1.0 / deg.max():
        raise InvalidInputError("alpha must lie in (0, 1/max positive degree)")


def critical_beta(pos, neg, alpha, tol=1e-9):
    """Smallest ``beta`` with ``f(beta) = 1``, found by bisection.

    Returns ``math.inf`` when there are no negative edges or when ``f`` stays
    below 1 up to ``beta = 2**20``.
    """
    _check_preconditions(pos, neg, alpha)
    if neg.n_edges == 0:
        return math.inf
    lo, hi = 0.0, BETA_HI_START
    while f_beta(pos, neg, alpha, hi) <= 1.0:
        lo = hi
        hi *= 2.0
        if hi > BETA_HI_MAX:
            return math.inf
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f_beta(pos, neg, alpha, mid)
        if abs(fm - 1.0) < tol:
            break
        if fm > 1.0:
            hi = mid
        else:
            lo = mid
    return mid


@dataclass(frozen=True)
class PhaseCheck:
    """Simulated phase, the phase the theorem predicts, and ``beta*``."""

    status: str
    expected: str
    beta_star: float

    @property
    def consistent(self):
        return self.expected == "undetermined" or self.status == self.expected


def expected_phase(beta, beta_star, margin=0.05):
    if beta <= beta_star * (1 - margin):
        return "converged_to_mean"
    if beta >= beta_star * (1 + margin):
        return "diverged"
    return "undetermined"


def verify_phase(pos, neg, alpha, beta, X0, steps=10000, margin=0.05, beta_star=None):
    """Iterate ``x <- M x`` and compare the outcome with the theorem.

    A constant ``X0`` is a fixed point of ``M`` and is reported as
    ``undetermined``; so is any run that neither converges nor diverges.
    """
    if beta_star is None:
        beta_star = critical_beta(pos, neg, alpha)
    expected = expected_phase(beta, beta_star, margin)
    X0 = np.asarray(X0, dtype=float)
    if np.max(np.abs(X0 - X0.mean(axis=0))) < 1e-12:
        return PhaseCheck("undetermined", expected, beta_star)
    M = build_laplacians(pos, neg, alpha, beta).M
    cfg = PropagationConfig(alpha=alpha, beta=beta, steps=100, post_step="none")
    X = X0.copy()
    status = "undetermined"
    done = 0
    # run in chunks so a settled classification stops early
    while done < steps:
        k = min(cfg.steps, steps - done)
        res = run_propagation(X, lambda Z: M @ Z, replace(cfg, steps=k))
        done += k
        X = res.X
        if res.status in ("diverged", "converged_to_mean"):
            status = res.status
            break
    return PhaseCheck(status, expected, beta_star)


def growth_rate(M, x0, steps=3000, tail=1000):
    """Mean per-step log growth of the mean-free part of ``x`` under ``M``.

    The iterate is renormalized every step, so strongly diverging runs stay
    finite.
    """
    y = np.asarray(x0, dtype=float)
    y = y - y.mean(axis=0)
    y = y / np.linalg.norm(y)
    logs = []
    for t in range(steps):
        y = M @ y
        y = y - y.mean(axis=0)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return -math.inf
        if t >= steps - tail:
            logs.append(math.log(nrm))
        y = y / nrm
    return float(np.mean(logs))


def empirical_beta_boundary(pos, neg, alpha, x0, lo=0.0, hi=None, rel_width=0.01,
                            steps=3000):
    """Bracket the simulated convergence/divergence boundary by bisection.

    Each probe classifies ``beta`` by the sign of :func:`growth_rate`. Returns
    the bracket midpoint once its width is below ``rel_width`` of ``hi``.
    """
    def diverges(b):
        return growth_rate(build_laplacians(pos, neg, alpha, b).M, x0, steps) > 0

    if hi is None:
        hi = BETA_HI_START
        while not diverges(hi):
            lo, hi = hi, 2 * hi
            if hi > BETA_HI_MAX:
                return math.inf
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        if diverges(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def random_signed_instance(n, rng, p_pos=0.4, p_neg=0.3):
    """Random ``(pos, neg, alpha)`` meeting the ``critical_beta`` preconditions.

    The positive part is a random spanning tree plus extra edges, at least one
    remaining pair is negative, and ``alpha`` is drawn below
    ``1 / max positive degree``.
    """
    if n < 3:
        raise InvalidInputError("need at least 3 nodes")
    order = rng.permutation(n)
    tree = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    pairs = list(zip(*np.triu_indices(n, 1)))
    pairs = [(int(i), int(j)) for i, j in pairs]
    extra = [e for e in pairs if e not in tree and rng.random() < p_pos]
    free = [e for e in pairs if e not in tree and e not in extra]
    if not free:
        free.append(extra.pop(int(rng.integers(0, len(extra)))))
    neg_pairs = [e for e in free if rng.random() < p_neg] or [free[int(rng.integers(0, len(free)))]]
    pos_pairs = sorted(tree | set(extra))
    pos = SparseGraph.from_edges(n, pos_pairs)
    neg = SparseGraph.from_edges(n, sorted(neg_pairs))
    deg = np.asarray(pos.adjacency().sum(axis=1)).ravel()
    alpha = float(rng.uniform(0.1, 0.9)) / deg.max()
    return pos, neg, alpha
