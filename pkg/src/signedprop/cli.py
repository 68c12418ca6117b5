"""Command-line experiment runner.

Every command takes ``--config`` (JSON with ``"schema": 1``). Flags override
config values, and ``--seed`` or ``SIGNEDPROP_SEED`` override the config
seed. CSV outputs start with a ``# config_hash=...`` comment line and use
four decimals.

Exit codes: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import experiments as ex
from .csbm import CsbmParams, generate
from .estimators import METHODS, build_stepper
from .exceptions import InvalidInputError
from .graphcore import (
    load_dense_csv,
    load_labels_csv,
    load_signed_edgelist,
    save_dense_csv,
    save_labels_csv,
    save_signed_edgelist,
)
from .propagation import PropagationConfig, run_propagation
from .spectral import build_laplacians, critical_beta, f_beta, growth_rate, random_signed_instance
from .unify import KINDS, verify_equivalence

SCHEMA = 1
CSBM_KEYS = ("N", "p", "q", "d", "sigma", "train_ratio")
PROP_KEYS = ("alpha", "beta", "lam", "steps", "post_step", "clamp_c", "layer_norm_mode")


# ---------------------------------------------------------------- helpers

def load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise click.UsageError(f"cannot read config {path}: {err}")
    if not isinstance(data, dict):
        raise click.UsageError("config must be a JSON object")
    if data.get("schema") != SCHEMA:
        raise click.UsageError(f"config needs \"schema\": {SCHEMA}")
    return data


def merge(config, **flags):
    """Config values overridden by every flag that was given."""
    out = dict(config)
    # JSON configs may spell the mixing weight out in full
    if "lambda" in out:
        out.setdefault("lam", out.pop("lambda"))
    out.update({k: v for k, v in flags.items() if v is not None and v != ()})
    return out


def resolve_seed(ctx, cfg):
    seed = ctx.obj.get("seed")
    return int(seed if seed is not None else cfg.get("seed", 0))


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.4f}"
    return str(v)


def write_csv(path, cfg, header, rows):
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def csbm_base(cfg):
    return CsbmParams(**{k: cfg[k] for k in CSBM_KEYS if k in cfg})


def prop_config(cfg, **defaults):
    vals = {**defaults, **{k: cfg[k] for k in PROP_KEYS if k in cfg}}
    return PropagationConfig(**vals)


def seed_list(cfg, seed):
    n = int(cfg.get("seeds", 1))
    return [seed + i for i in range(n)]


def float_list(text):
    return [float(t) for t in text.split(",") if t.strip()] if text else None


def int_list(text):
    return [int(t) for t in text.split(",") if t.strip()] if text else None


def str_list(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else None


class Group(click.Group):
    """Maps library input errors to the usage-error exit code."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (InvalidInputError, ValueError) as err:
            if isinstance(err, click.ClickException):
                raise
            raise click.UsageError(str(err), ctx)


config_opt = click.option("--config", "config_path", type=click.Path(), default=None,
                          help="JSON config file with \"schema\": 1.")
out_opt = click.option("--out", default=None, help="Output CSV path (stdout if omitted).")
jobs_opt = click.option("--jobs", type=int, default=None, help="Worker threads over seeds.")


@click.group(cls=Group)
@click.option("--seed", type=int, default=None, envvar="SIGNEDPROP_SEED",
              help="Base seed; overrides the config. Also read from SIGNEDPROP_SEED.")
@click.pass_context
def main(ctx, seed):
    """Signed-graph propagation experiments."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


# ---------------------------------------------------------------- commands

@main.command("csbm-gen")
@config_opt
@click.option("--n", "N", type=int, default=None)
@click.option("--p", type=float, default=None)
@click.option("--q", type=float, default=None)
@click.option("--d", type=int, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--train-ratio", type=float, default=None)
@click.option("--out-dir", type=click.Path(), required=True)
@click.pass_context
def csbm_gen(ctx, config_path, out_dir, **flags):
    """Sample a CSBM and write graph, features, labels and parameters."""
    cfg = merge(load_config(config_path), **flags)
    params = CsbmParams(**{**csbm_base(cfg).to_dict(), "seed": resolve_seed(ctx, cfg)})
    G, X, L = generate(params)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_signed_edgelist(out / "graph.edgelist", G)
    save_dense_csv(out / "features.csv", X)
    save_labels_csv(out / "labels.csv", L)
    (out / "params.json").write_text(json.dumps({"schema": SCHEMA, **params.to_dict()},
                                                sort_keys=True, indent=2) + "\n")


@main.command("propagate")
@config_opt
@click.option("--method", type=click.Choice(METHODS), default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--post-step", type=click.Choice(["none", "layer_norm", "clamp"]), default=None)
@click.option("--graph", type=click.Path(exists=True), default=None)
@click.option("--features", type=click.Path(exists=True), default=None)
@click.option("--labels", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, help="CSV for the final features.")
@click.option("--trace", default=None, help="CSV for step,energy,norm.")
@click.option("--report", default=None, help="JSON ExperimentReport path.")
@click.pass_context
def propagate(ctx, config_path, out, trace, report, **flags):
    """Propagate features; without input paths a CSBM is sampled from the seed."""
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    cfg["seed"] = seed
    method = cfg.get("method", "label_sbp")
    if method not in METHODS:
        raise click.UsageError(f"unknown method {method!r}")
    if cfg.get("graph"):
        pos, neg = load_signed_edgelist(cfg["graph"])
        if neg.n_edges:
            raise click.UsageError("propagate expects an unsigned graph")
        G = pos
        if not cfg.get("features"):
            raise click.UsageError("--graph needs --features")
        X = load_dense_csv(cfg["features"])
        L = load_labels_csv(cfg["labels"]) if cfg.get("labels") else None
    else:
        G, X, L = generate(CsbmParams(**{**csbm_base(cfg).to_dict(), "seed": seed}))
    pcfg = prop_config(cfg)
    t0 = time.perf_counter()
    res = run_propagation(X, build_stepper(method, G, X, L, pcfg), pcfg, neighbors=G)
    elapsed = time.perf_counter() - t0
    save_dense_csv(out, res.X)
    if trace:
        write_csv(trace, cfg, ["step", "energy", "norm"], res.trace.rows())
    if report:
        rep = ex.ExperimentReport(config=cfg, seed=seed, energy=res.trace.energy,
                                  norm=res.trace.norm, wall_times={"propagate": elapsed})
        Path(report).write_text(rep.to_json() + "\n")
    click.echo(f"status={res.status}", err=True)


@main.command("sid-table")
@config_opt
@click.option("--methods", default=None, help="Comma-separated method names.")
@click.option("--seeds", type=int, default=None, help="Number of seeds.")
@jobs_opt
@out_opt
@click.pass_context
def sid_table(ctx, config_path, out, jobs, **flags):
    """P, N and SID percentages per method on fresh CSBM instances."""
    flags["methods"] = str_list(flags["methods"])
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    cfg["seed"] = seed
    methods = cfg.get("methods", list(ex.SID_METHODS))
    bad = [m for m in methods if m not in ex.SID_METHODS]
    if bad:
        raise click.UsageError(f"unknown method(s) {bad}")
    rows = ex.sid_table(methods, seed_list(cfg, seed), csbm_base(cfg), jobs or 1)
    write_csv(out, cfg, ["method", "seeds", "P_pct", "N_pct", "SID_pct", "P_std", "N_std", "SID_std"],
              rows)


@main.command("depth-sweep")
@config_opt
@click.option("--methods", default=None)
@click.option("--depths", default=None, help="Comma-separated depths.")
@click.option("--seeds", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@jobs_opt
@out_opt
@click.option("--report", default=None, help="JSON ExperimentReport path.")
@click.pass_context
def depth_sweep(ctx, config_path, out, jobs, report, **flags):
    """Accuracy of a fresh linear head after each propagation depth."""
    flags["methods"] = str_list(flags["methods"])
    flags["depths"] = int_list(flags["depths"])
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    cfg["seed"] = seed
    methods = cfg.get("methods", ["sgc", "label_sbp"])
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise click.UsageError(f"unknown method(s) {bad}")
    depths = cfg.get("depths", [0, 2, 10, 50, 300])
    t0 = time.perf_counter()
    rows, traces = ex.depth_sweep(methods, depths, seed_list(cfg, seed), csbm_base(cfg),
                                  prop_config(cfg), jobs or 1, with_traces=True)
    write_csv(out, cfg, ["seed", "depth", "method", "accuracy"], rows)
    if report:
        acc = {m: {} for m in methods}
        for s, k, m, a in rows:
            acc[m].setdefault(k, []).append(a)
        first = traces[0][methods[0]]
        rep = ex.ExperimentReport(config=cfg, seed=seed, accuracies=acc, energy=first.energy,
                                  norm=first.norm,
                                  wall_times={"depth_sweep": time.perf_counter() - t0})
        Path(report).write_text(rep.to_json() + "\n")


@main.command("beta-sweep")
@config_opt
@click.option("--n", "n", type=int, default=None, help="Nodes of the random signed graph.")
@click.option("--betas", default=None, help="Comma-separated beta values.")
@click.option("--graph", type=click.Path(exists=True), default=None,
              help="Signed edge list; a random instance is drawn otherwise.")
@click.option("--alpha", type=float, default=None)
@out_opt
@click.pass_context
def beta_sweep(ctx, config_path, out, **flags):
    """f(beta) and the simulated phase for a list of beta values."""
    flags["betas"] = float_list(flags["betas"])
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    cfg["seed"] = seed
    rng = np.random.default_rng(seed)
    if cfg.get("graph"):
        pos, neg = load_signed_edgelist(cfg["graph"])
        if "alpha" not in cfg:
            raise click.UsageError("--graph needs --alpha")
        alpha = float(cfg["alpha"])
    else:
        pos, neg, alpha = random_signed_instance(int(cfg.get("n", 8)), rng)
        alpha = float(cfg.get("alpha", alpha))
    bs = critical_beta(pos, neg, alpha)
    betas = cfg.get("betas") or [bs * t for t in (0.0, 0.25, 0.5, 0.9, 1.1, 1.5, 2.0)]
    x0 = rng.standard_normal(pos.n)
    rows = []
    for b in betas:
        rate = growth_rate(build_laplacians(pos, neg, alpha, b).M, x0)
        status = "diverged" if rate > 0 else "converged_to_mean"
        rows.append((b, f_beta(pos, neg, alpha, b), status))
    cfg["beta_star"] = bs
    write_csv(out, cfg, ["beta", "f_beta", "empirical_status"], rows)


@main.command("verify-equivalence")
@config_opt
@click.option("--trials", type=int, default=None)
@click.pass_context
def verify_equivalence_cmd(ctx, config_path, **flags):
    """Max gap between each baseline and its signed form; exit 1 above 1e-9."""
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    trials = int(cfg.get("trials", 100))
    failed = False
    click.echo(f"{'kind':<12} max_discrepancy")
    for k in KINDS:
        gap = verify_equivalence(k, trials=trials, rng=seed)
        failed |= not gap < 1e-9
        click.echo(f"{k:<12} {gap:.3e}")
    ctx.exit(1 if failed else 0)


@main.command("verify-theorems")
@config_opt
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
@click.option("--inject", type=click.Choice(["phase"]), default=None,
              help="Expect divergence below beta* to exercise the failure path.")
@click.option("--quick", is_flag=True, help="Smaller instance counts.")
@click.pass_context
def verify_theorems(ctx, config_path, as_json, inject, quick):
    """Run the property battery; exit 1 if any check fails."""
    cfg = load_config(config_path)
    seed = resolve_seed(ctx, cfg)
    sizes = dict(phase_graphs=20, pairwise_runs=100, bound_instances=1000)
    if quick:
        sizes = dict(phase_graphs=4, pairwise_runs=20, bound_instances=100)
    sizes.update({k: int(cfg[k]) for k in sizes if k in cfg})
    results = ex.run_theorem_battery(seed=seed, inject=inject, **sizes)
    if as_json:
        click.echo(json.dumps({"seed": seed, "checks": [r.__dict__ for r in results],
                               "ok": all(r.ok for r in results)}, indent=2))
    else:
        click.echo(f"{'check':<20} {'result':<6} {'seconds':>8}  detail")
        for r in results:
            click.echo(f"{r.name:<20} {'PASS' if r.ok else 'FAIL':<6} {r.seconds:8.2f}  {r.detail}")
    ctx.exit(0 if all(r.ok for r in results) else 1)


@main.command("train-ratio-sweep")
@config_opt
@click.option("--ratios", default=None, help="Comma-separated training ratios in (0, 1].")
@click.option("--seeds", type=int, default=None)
@click.option("--steps", type=int, default=None)
@jobs_opt
@out_opt
@click.pass_context
def train_ratio_sweep(ctx, config_path, out, jobs, **flags):
    """Label-SBP accuracy, SID and its bound across training ratios."""
    flags["ratios"] = float_list(flags["ratios"])
    cfg = merge(load_config(config_path), **flags)
    seed = resolve_seed(ctx, cfg)
    cfg["seed"] = seed
    ratios = cfg.get("ratios", [0.2, 0.4, 0.6, 0.8, 1.0])
    rows = ex.train_ratio_sweep(ratios, seed_list(cfg, seed), csbm_base(cfg),
                                prop_config(cfg, steps=10), jobs or 1)
    write_csv(out, cfg, ["seed", "p", "accuracy", "sid_count", "bound"], rows)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
