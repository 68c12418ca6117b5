"""Acceptance criteria 1-8. The terminal summary lists one PASS/FAIL line each."""

import json
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from signedprop.balance import label_sbp_graph, sid, sid_bound_check, is_structurally_balanced
from signedprop.cli import main
from signedprop.csbm import DEFAULT_P, DEFAULT_Q, CsbmParams, generate
from signedprop.estimators import build_stepper
from signedprop.experiments import (
    ExperimentReport,
    balanced_complete_signs,
    depth_sweep,
    pairwise_clustered,
    random_bound_instance,
    sid_rows,
)
from signedprop.graphcore import (
    LabelSet,
    SparseGraph,
    load_dense_csv,
    load_labels_csv,
    load_signed_edgelist,
    save_dense_csv,
    save_labels_csv,
    save_signed_edgelist,
)
from signedprop.propagation import PropagationConfig, run_propagation
from signedprop.spectral import (
    build_laplacians,
    critical_beta,
    empirical_beta_boundary,
    random_signed_instance,
    verify_phase,
)
from signedprop.unify import verify_equivalence


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


@pytest.mark.criterion(1, "direct and signed baseline forms agree below 1e-9")
def test_equivalence_oracles():
    with Clock() as c:
        gaps = {k: verify_equivalence(k, trials=100, n=20, d=8, rng=2024, k_max=6)
                for k in ("residual", "appnp", "jknet", "dropedge", "contranorm", "batchnorm", "pairnorm")}
    assert all(g < 1e-9 for g in gaps.values()), gaps
    assert c.seconds < 10


@pytest.mark.criterion(2, "spectral beta* matches the simulated boundary within 5%")
def test_phase_transition():
    rng = np.random.default_rng(2)
    with Clock() as c:
        gaps = []
        for _ in range(20):
            n = int(rng.integers(3, 13))
            pos, neg, alpha = random_signed_instance(n, rng)
            assert pos.is_connected() and neg.n_edges >= 1
            assert alpha < 1 / pos.degrees().max()
            bs = critical_beta(pos, neg, alpha)
            x0 = rng.standard_normal(n)
            gaps.append(abs(empirical_beta_boundary(pos, neg, alpha, x0) - bs) / bs)
            M = build_laplacians(pos, neg, alpha, 0.0).M
            x = x0.copy()
            for _ in range(10_000):
                x = M @ x
            assert np.max(np.abs(x - x0.mean())) < 1e-8
            assert verify_phase(pos, neg, alpha, 0.0, x0, beta_star=bs).status == "converged_to_mean"
    assert max(gaps) < 0.05, max(gaps)
    assert c.seconds < 60


@pytest.mark.criterion(3, "clamped dynamics polarize a balanced complete graph")
def test_balance_clustering():
    with Clock() as c:
        polarized = sum(pairwise_clustered(seed, group=10, alpha=0.3, beta=5.0, c=1.0, steps=50_000,
                                           tol=1e-6) for seed in range(100))
    assert polarized >= 95, polarized
    assert c.seconds < 60


@pytest.mark.criterion(4, "SID is 0 when balanced and obeys the (1-p)n/2 bound")
def test_sid_properties():
    with Clock() as c:
        for sizes in ([5, 7], [3, 3, 4], [1, 9]):
            S, g = balanced_complete_signs(sizes)
            assert sid(S, LabelSet.fully_labeled(g)).sid == 0
            assert is_structurally_balanced(S).weakly_balanced
        rng = np.random.default_rng(4)
        for _ in range(1000):
            G, L = random_bound_instance(rng)
            value, bound, ok = sid_bound_check(L, label_sbp_graph(G, L))
            assert ok, (value, bound)
            full = L.with_mask(np.ones(L.n, dtype=bool))
            assert sid_bound_check(full, label_sbp_graph(G, full))[0] == 0
    assert c.seconds < 30


@pytest.mark.criterion(5, "SID table on the CSBM over 50 seeds")
def test_sid_table_reproduction():
    methods = ["sgc", "batchnorm", "pairnorm", "appnp", "jknet", "residual", "label_sbp"]
    base = CsbmParams(N=100, p=DEFAULT_P, q=DEFAULT_Q)
    with Clock() as c:
        runs = []
        for seed in range(50):
            rows, G = sid_rows(seed, methods, base)
            runs.append(rows)
            assert rows["sgc"].N_pct == 100.0
            for m in ("appnp", "jknet"):
                assert rows[m].N_pct == 100.0
                if G.is_connected():
                    assert rows[m].P_pct == 0.0
            for p in (0.5, 0.6, 0.8):
                lab = sid_rows(seed, ["label_sbp"], CsbmParams(**{**base.to_dict(), "train_ratio": p}))[0]
                assert lab["label_sbp"].sid < rows["sgc"].sid
    mean = {m: (np.mean([r[m].P_pct for r in runs]), np.mean([r[m].N_pct for r in runs])) for m in methods}
    assert mean["sgc"][0] == pytest.approx(89.87, abs=2.0)
    for m in ("batchnorm", "pairnorm"):
        assert mean[m][0] == pytest.approx(89.87, abs=2.0)
        assert mean[m][1] == pytest.approx(4.56, abs=2.0)
    assert mean["residual"][0] == pytest.approx(90.87, abs=2.0)
    assert c.seconds < 120


@pytest.mark.criterion(6, "depth-300 accuracy and energy for SGC and Label-SBP")
def test_depth_behavior():
    with Clock() as c:
        rows, traces = depth_sweep(["sgc", "label_sbp"], [300], range(10), CsbmParams(),
                                   PropagationConfig(), with_traces=True)
    acc = {m: np.array([r[3] for r in rows if r[2] == m]) for m in ("sgc", "label_sbp")}
    assert acc["sgc"].mean() == pytest.approx(45.75, abs=12)
    assert acc["label_sbp"].mean() == pytest.approx(91.25, abs=12)
    assert np.sum(acc["label_sbp"] > acc["sgc"] + 20) >= 9
    for t in traces:
        assert t["sgc"].energy[300] < 1e-6 * t["sgc"].energy[0]
        assert t["label_sbp"].energy[300] > 1e-3 * t["label_sbp"].energy[0]
    assert c.seconds < 300


def _per_step_seconds(method, n, reps):
    G, X, L = generate(CsbmParams(N=n, p=2 * math.log(n) / n, q=math.log(n) / n, d=8, seed=0))
    step = build_stepper(method, G, X, L, PropagationConfig())
    step(X)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        step(X)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _r2_linear(x, y):
    A = np.column_stack([np.ones_like(x), x])
    res = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    return 1 - res @ res / np.sum((y - y.mean()) ** 2)


def _sse_through_origin(x, y):
    coef = (x @ y) / (x @ x)
    return float(np.sum((y - coef * x) ** 2))


@pytest.mark.criterion(7, "Feature-SBP-v2 per-step time is linear in n")
def test_feature_sbp_v2_scaling():
    ns = np.array([1000.0, 2000.0, 4000.0])
    with Clock() as c:
        v2 = np.array([_per_step_seconds("feature_sbp_v2", int(n), 200) for n in ns])
        dense = np.array([_per_step_seconds("feature_sbp", int(n), 7) for n in ns])
    assert _r2_linear(ns, v2) > 0.95
    # one-parameter fits t = b n and t = c n^2
    assert _sse_through_origin(ns**2, dense) < _sse_through_origin(ns, dense)
    assert c.seconds < 180


def _cli(runner, *args):
    res = runner.invoke(main, ["--seed", "11", *args], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res.output


@pytest.mark.criterion(8, "CLI runs are bit-reproducible and files round-trip")
def test_determinism_and_round_trip(tmp_path):
    runner = CliRunner()
    cfg = tmp_path / "battery.json"
    cfg.write_text(json.dumps({"schema": 1, "phase_graphs": 2, "pairwise_runs": 2,
                               "bound_instances": 20}))
    with Clock() as c:
        commands = [
            ["sid-table", "--methods", "sgc,pairnorm,label_sbp", "--seeds", "2"],
            ["depth-sweep", "--methods", "sgc,label_sbp,feature_sbp_v2", "--depths", "0,2", "--seeds", "2"],
            ["beta-sweep", "--n", "5"],
            ["train-ratio-sweep", "--ratios", "0.4,1.0", "--seeds", "2"],
            ["verify-equivalence", "--trials", "10"],
        ]
        for cmd in commands:
            assert _cli(runner, *cmd) == _cli(runner, *cmd)

        def battery():
            report = json.loads(_cli(runner, "verify-theorems", "--config", str(cfg), "--json"))
            for check in report["checks"]:
                check.pop("seconds")  # wall time
            return report

        assert battery() == battery()

        outs = []
        d = tmp_path / "data"
        for _ in range(2):
            _cli(runner, "csbm-gen", "--out-dir", str(d), "--n", "30")
            _cli(runner, "propagate", "--graph", str(d / "graph.edgelist"), "--features",
                 str(d / "features.csv"), "--labels", str(d / "labels.csv"), "--steps", "3",
                 "--out", str(d / "x.csv"), "--trace", str(d / "t.csv"))
            outs.append([(d / f).read_bytes() for f in
                         ("graph.edgelist", "features.csv", "labels.csv", "params.json", "x.csv", "t.csv")])
        assert outs[0] == outs[1]

        rng = np.random.default_rng(8)
        pos = SparseGraph.from_edges(6, [(0, 1), (2, 3), (4, 5)])
        neg = SparseGraph.from_edges(6, [(0, 5), (1, 2)])
        save_signed_edgelist(tmp_path / "g.edgelist", pos, neg)
        p2, n2 = load_signed_edgelist(tmp_path / "g.edgelist")
        assert p2 == pos and n2 == neg
        X = rng.standard_normal((6, 3)) * 10.0 ** rng.integers(-12, 12, (6, 3))
        save_dense_csv(tmp_path / "x.csv", X)
        assert np.array_equal(load_dense_csv(tmp_path / "x.csv"), X)
        L = LabelSet(rng.integers(0, 3, 6), rng.random(6) < 0.5)
        save_labels_csv(tmp_path / "l.csv", L)
        assert load_labels_csv(tmp_path / "l.csv") == L
        G, X0, L0 = generate(CsbmParams(N=20, seed=3))
        res = run_propagation(X0, build_stepper("label_sbp", G, X0, L0, PropagationConfig()),
                              PropagationConfig(steps=3), neighbors=G)
        rep = ExperimentReport(config={"steps": 3}, seed=3, accuracies={"sgc": {3: 81.5}},
                               energy=res.trace.energy, norm=res.trace.norm,
                               sid={"sid_pct": 1.25}, wall_times={"run": 0.5})
        assert ExperimentReport.from_json(rep.to_json()) == rep
    assert c.seconds < 10
