"""Seeded experiment drivers shared by the CLI and the test-suite."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .balance import is_structurally_balanced, label_sbp_graph, sid, sid_bound_check
from .csbm import CsbmParams, generate
from .estimators import build_stepper
from .evalmodel import accuracy, stratified_mask, train
from .graphcore import LabelSet
from .propagation import PropagationConfig, pairwise_dynamics, run_propagation
from .spectral import (
    critical_beta,
    empirical_beta_boundary,
    random_signed_instance,
    verify_phase,
)
from .unify import KINDS, method_signed_matrix, verify_equivalence

__all__ = [
    "SID_METHODS",
    "ExperimentReport",
    "map_seeds",
    "sid_rows",
    "sid_table",
    "depth_sweep",
    "train_ratio_sweep",
    "balanced_complete_signs",
    "pairwise_clustered",
    "random_bound_instance",
    "CheckResult",
    "run_theorem_battery",
]

SID_METHODS = ("sgc", "batchnorm", "pairnorm", "contranorm", "residual", "appnp", "jknet",
               "label_sbp", "feature_sbp")


@dataclass
class ExperimentReport:
    """Config echo, seed and results of one experiment; JSON round-trips."""

    config: dict
    seed: int
    accuracies: dict = field(default_factory=dict)
    energy: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    sid: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        # JSON object keys are strings; depths are ints
        data["accuracies"] = {m: {int(k): v for k, v in d.items()} for m, d in data["accuracies"].items()}
        return cls(**data)


def map_seeds(fn, seeds, jobs=1):
    """``[fn(s) for s in seeds]``, optionally on a thread pool; order is kept."""
    if jobs <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, seeds))


def sid_rows(seed, methods, base, zero_tol=0.0):
    """Per-method SID report on the CSBM instance for ``seed``."""
    G, X, L = generate(CsbmParams(**{**base.to_dict(), "seed": seed}))
    return {m: sid(method_signed_matrix(m, G, X=X, labels=L), L, zero_tol) for m in methods}, G


def sid_table(methods, seeds, base, jobs=1):
    """Mean and standard deviation of ``P_pct``, ``N_pct``, ``sid_pct`` per method."""
    unknown = [m for m in methods if m not in SID_METHODS]
    if unknown:
        raise ValueError(f"unknown method(s) {unknown}")
    runs = map_seeds(lambda s: sid_rows(s, methods, base)[0], seeds, jobs)
    rows = []
    for m in methods:
        vals = np.array([[r[m].P_pct, r[m].N_pct, r[m].sid_pct] for r in runs])
        rows.append((m, len(seeds), *vals.mean(axis=0), *vals.std(axis=0)))
    return rows


def _one_depth_run(seed, methods, depths, base, cfg):
    G, X, L = generate(CsbmParams(**{**base.to_dict(), "seed": seed}))
    test = ~L.train_mask
    out, traces = [], {}
    for m in methods:
        stepper = build_stepper(m, G, X, L, cfg)
        run_cfg = PropagationConfig(**{**asdict(cfg), "steps": max(depths)})
        res = run_propagation(X, stepper, run_cfg, neighbors=G, record_at=depths)
        traces[m] = res.trace
        for k in depths:
            Xk = res.snapshots.get(k)
            if Xk is None:
                # propagation stopped early after diverging
                out.append((seed, k, m, math.nan))
                continue
            out.append((seed, k, m, accuracy(train(Xk, L), Xk, L, test)))
    return out, traces


def depth_sweep(methods, depths, seeds, base, cfg, jobs=1, with_traces=False):
    """Rows ``(seed, depth, method, accuracy)`` sorted by seed, then depth."""
    depths = sorted(set(int(k) for k in depths))
    runs = map_seeds(lambda s: _one_depth_run(s, methods, depths, base, cfg), seeds, jobs)
    rows = sorted((r for out, _ in runs for r in out), key=lambda r: (r[0], r[1], methods.index(r[2])))
    if with_traces:
        return rows, [t for _, t in runs]
    return rows


def train_ratio_sweep(ratios, seeds, base, cfg, jobs=1):
    """Rows ``(seed, p, accuracy, sid_count, bound)`` for Label-SBP.

    Accuracy is NaN at ``p = 1``, where no test nodes remain.
    """
    for p in ratios:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"training ratio {p} outside (0, 1]")

    def run(seed):
        G, X, L = generate(CsbmParams(**{**base.to_dict(), "seed": seed}))
        rows = []
        for p in ratios:
            mask = stratified_mask(L.classes, p, np.random.default_rng([seed, int(round(p * 1e6))]))
            Lp = L.with_mask(mask)
            sid_count, bound, _ = sid_bound_check(Lp, label_sbp_graph(G, Lp))
            if mask.all():
                acc = math.nan
            else:
                res = run_propagation(X, build_stepper("label_sbp", G, X, Lp, cfg), cfg)
                acc = accuracy(train(res.X, Lp), res.X, Lp, ~mask)
            rows.append((seed, p, acc, sid_count, bound))
        return rows

    return [r for rows in map_seeds(run, seeds, jobs) for r in rows]


def balanced_complete_signs(sizes):
    """Complete signed graph: ``+1`` inside each group, ``-1`` across, ``0`` diagonal."""
    g = np.repeat(np.arange(len(sizes)), sizes)
    S = np.where(g[:, None] == g[None, :], 1.0, -1.0)
    np.fill_diagonal(S, 0.0)
    return S, g


def pairwise_clustered(seed, group=10, alpha=0.3, beta=5.0, c=1.0, steps=50_000, tol=1e-6):
    """One seeded clamped-dynamics run on two balanced groups; True if it polarized."""
    S, g = balanced_complete_signs([group, group])
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-c, c, len(g))
    _, x = pairwise_dynamics(x0, S, alpha, beta, c, steps, rng, record_every=0)
    a, b = x[g == 0], x[g == 1]
    up_down = np.all(np.abs(a - c) < tol) and np.all(np.abs(b + c) < tol)
    down_up = np.all(np.abs(a + c) < tol) and np.all(np.abs(b - c) < tol)
    return bool(up_down or down_up)


def random_bound_instance(rng):
    """Random small CSBM with a random training ratio, for the SID bound."""
    N = int(rng.integers(2, 21)) * 2
    p, q = rng.uniform(0, 1, 2)
    ratio = float(rng.uniform(0.05, 1.0))
    params = CsbmParams(N=N, p=float(p), q=float(q), d=2, seed=int(rng.integers(1 << 31)),
                        train_ratio=ratio)
    G, _, L = generate(params)
    return G, L


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _timed(name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def _check_equivalence(seed):
    worst = {k: verify_equivalence(k, trials=100, rng=seed) for k in KINDS}
    bad = {k: v for k, v in worst.items() if not v < 1e-9}
    return not bad, f"max discrepancy {max(worst.values()):.2e}"


def _check_phase(seed, n_graphs, inject):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_graphs):
        n = int(rng.integers(3, 13))
        pos, neg, alpha = random_signed_instance(n, rng)
        bs = critical_beta(pos, neg, alpha)
        x0 = rng.standard_normal(n)
        emp = empirical_beta_boundary(pos, neg, alpha, x0)
        worst = max(worst, abs(emp - bs) / bs)
        zero = verify_phase(pos, neg, alpha, 0.0, x0, beta_star=bs)
        if zero.status != "converged_to_mean":
            return False, "beta=0 did not converge to the mean"
        for factor in (0.5, 2.0):
            chk = verify_phase(pos, neg, alpha, factor * bs, x0, beta_star=bs)
            expected = chk.expected
            if inject and factor == 0.5:
                expected = "diverged"
            if chk.status != expected:
                return False, f"beta={factor}*beta* gave {chk.status}, expected {expected}"
    if worst >= 0.05:
        return False, f"empirical boundary off by {worst:.1%}"
    return True, f"max relative gap {worst:.2%}"


def _check_pairwise(seed, runs):
    ok = sum(pairwise_clustered(seed * 100_003 + r) for r in range(runs))
    need = math.ceil(0.95 * runs)
    return ok >= need, f"{ok}/{runs} runs polarized"


def _check_sid(seed, instances):
    S, g = balanced_complete_signs([5, 7])
    balanced = sid(S, LabelSet.fully_labeled(g))
    if balanced.sid != 0:
        return False, "balanced complete graph has nonzero SID"
    if not is_structurally_balanced(S).balanced:
        return False, "balanced complete graph not detected"
    rng = np.random.default_rng(seed)
    for _ in range(instances):
        G, L = random_bound_instance(rng)
        value, bound, ok = sid_bound_check(L, label_sbp_graph(G, L))
        if not ok:
            return False, f"bound violated: {value} > {bound}"
        full = L.with_mask(np.ones(L.n, dtype=bool))
        if sid_bound_check(full, label_sbp_graph(G, full))[0] != 0:
            return False, "p=1 gives nonzero SID"
    return True, f"{instances} instances within bound"


def run_theorem_battery(seed=0, phase_graphs=20, pairwise_runs=100, bound_instances=1000,
                        inject=None):
    """Run the property battery. ``inject="phase"`` flips one expectation to force a failure."""
    return [
        _timed("equivalence", lambda: _check_equivalence(seed)),
        _timed("phase_transition", lambda: _check_phase(seed, phase_graphs, inject == "phase")),
        _timed("balance_clustering", lambda: _check_pairwise(seed, pairwise_runs)),
        _timed("sid_properties", lambda: _check_sid(seed, bound_instances)),
    ]
