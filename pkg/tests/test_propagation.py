import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signedprop.balance import SignedGraph
from signedprop.csbm import CsbmParams, generate
from signedprop.exceptions import InvalidInputError, NumericFailureError
from signedprop.graphcore import SparseGraph, row_normalize
from signedprop.propagation import (
    PropagationConfig,
    clamp_fc,
    dirichlet_energy,
    feature_sbp_v2_factor,
    feature_sbp_v2_step,
    layer_norm,
    make_label_sbp_v2_stepper,
    make_sbp_stepper,
    pairwise_dynamics,
    run_propagation,
    sbp_step,
    signed_step,
)
from signedprop.balance import label_sbp_negative
from signedprop.experiments import balanced_complete_signs, pairwise_clustered

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.mark.parametrize("kw", [dict(alpha=-1), dict(beta=-0.1), dict(lam=1.5), dict(steps=-1),
                                dict(post_step="bogus"), dict(post_step="clamp", clamp_c=0)])
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        PropagationConfig(**kw)


def test_signed_step_examples(rng):
    X = rng.standard_normal((2, 3))
    g = SignedGraph(SWAP, np.zeros((2, 2)))
    assert np.allclose(signed_step(X, g, 1.0, 0.0), SWAP @ X)
    neg = SignedGraph(np.zeros((2, 2)), SWAP)
    assert np.allclose(signed_step(np.array([[0.0], [1.0]]), neg, 0.0, 0.5), [[-0.5], [1.5]])
    with pytest.raises(InvalidInputError):
        signed_step(np.ones((3, 1)), g, 1, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.floats(0, 2), st.floats(0, 2), st.integers(0, 2**32 - 1))
def test_constant_vectors_are_fixed_points(n, a, b, seed):
    r = np.random.default_rng(seed)
    pos = row_normalize(r.random((n, n)) + 1e-3)
    neg = row_normalize(r.random((n, n)) + 1e-3)
    X = np.full((n, 2), 3.7)
    out = signed_step(X, SignedGraph(pos, neg, row_stochastic=True), a, b)
    assert np.allclose(out, X, atol=1e-12)


def test_sbp_step_trivial_cases(rng):
    A = row_normalize(rng.random((5, 5)))
    X = rng.standard_normal((5, 4))
    neg = rng.standard_normal((5, 5))
    cfg = PropagationConfig(lam=0.0)
    assert np.allclose(sbp_step(X, A, neg, cfg), layer_norm(X))
    cfg = PropagationConfig(lam=1.0, alpha=1.0, beta=0.0, post_step="none")
    assert np.allclose(sbp_step(X, A, neg, cfg), A @ X)


def test_sbp_stepper_matches_single_step(rng):
    A = row_normalize(rng.random((6, 6)))
    X = rng.standard_normal((6, 3))
    neg = rng.standard_normal((6, 6))
    cfg = PropagationConfig(alpha=0.7, beta=0.4, lam=0.3)
    assert np.allclose(make_sbp_stepper(A, neg, cfg)(X), sbp_step(X, A, neg, cfg))


def test_layer_norm_modes(rng):
    X = rng.standard_normal((4, 5)) * 3 + 2
    Y = layer_norm(X, eps=0)
    assert np.allclose(Y.mean(axis=1), 0) and np.allclose(Y.std(axis=1), 1)
    Z = layer_norm(X, eps=0, mode="graph")
    assert Z.mean() == pytest.approx(0, abs=1e-12) and Z.std() == pytest.approx(1)


def test_feature_sbp_v2_examples(rng):
    A = row_normalize(rng.random((5, 5)))
    X0 = rng.standard_normal((5, 1))
    assert np.array_equal(feature_sbp_v2_factor(X0), [[1.0]])
    cfg = PropagationConfig(alpha=0.8, beta=0.3, lam=0.4, post_step="none")
    expect = 0.6 * X0 + 0.4 * (0.8 * (A @ X0) - 0.3 * X0)
    assert np.allclose(feature_sbp_v2_step(X0, A, X0, cfg), expect)
    Q = np.linalg.qr(rng.standard_normal((6, 3)))[0] * 2.0
    F = feature_sbp_v2_factor(Q)
    off = F[~np.eye(3, dtype=bool)]
    assert np.allclose(off, off[0])
    assert np.allclose(F.sum(axis=1), 1)


def test_label_sbp_v2_stepper_is_pure_attraction(rng):
    A = row_normalize(rng.random((4, 4)))
    X = rng.standard_normal((4, 2))
    cfg = PropagationConfig(lam=1.0, post_step="none")
    assert np.allclose(make_label_sbp_v2_stepper(A, cfg)(X), A @ X)


def test_clamp_examples_and_idempotence():
    assert clamp_fc(1.5, 1) == 1
    assert clamp_fc(-2, 1) == -1
    assert clamp_fc(0.3, 1) == 0.3
    z = np.linspace(-3, 3, 13)
    assert np.array_equal(clamp_fc(clamp_fc(z, 1.2), 1.2), clamp_fc(z, 1.2))
    with pytest.raises(InvalidInputError):
        clamp_fc(0.0, 0)


class OnePair:
    """Generator stub that always picks the pair (0, 1)."""

    def integers(self, lo, hi, size):
        return np.zeros(size, dtype=int)


def test_pairwise_hand_examples():
    S = np.array([[0, 1], [1, 0]])
    _, x = pairwise_dynamics([0.2, 0.6], S, 0.3, 1.0, 1.0, 1, OnePair())
    assert np.allclose(x, [0.32, 0.48])
    # (1 + beta) x - beta x': beta=1 gives 1.2, clamped to 1; beta=0.5 gives 0.8
    _, x = pairwise_dynamics([0.4, -0.4], -S, 0.3, 1.0, 1.0, 1, OnePair())
    assert np.allclose(x, [1.0, -1.0])
    _, x = pairwise_dynamics([0.4, -0.4], -S, 0.3, 0.5, 1.0, 1, OnePair())
    assert np.allclose(x, [0.8, -0.8])


def test_pairwise_positive_only_stays_in_hull(rng):
    n = 8
    S = np.ones((n, n))
    x0 = rng.uniform(-0.5, 0.7, n)
    traj, _ = pairwise_dynamics(x0, S, 0.4, 1.0, 1.0, 2000, rng, record_every=10)
    assert traj.min() >= x0.min() - 1e-15 and traj.max() <= x0.max() + 1e-15
    assert traj.shape == (201, n)


def test_pairwise_deterministic():
    S, _ = balanced_complete_signs([3, 3])
    a = pairwise_dynamics(np.linspace(-1, 1, 6), S, 0.3, 5, 1, 500, np.random.default_rng(7))
    b = pairwise_dynamics(np.linspace(-1, 1, 6), S, 0.3, 5, 1, 500, np.random.default_rng(7))
    assert np.array_equal(a[0], b[0])


def test_pairwise_needs_complete_graph():
    with pytest.raises(InvalidInputError):
        pairwise_dynamics([0, 0, 0], np.zeros((3, 3)), 0.3, 1, 1, 10, np.random.default_rng(0))


def test_pairwise_balanced_groups_polarize():
    assert sum(pairwise_clustered(s) for s in range(10)) >= 9


def test_dirichlet_energy_examples():
    g = SparseGraph.from_edges(2, [(0, 1)])
    assert dirichlet_energy(np.array([0.0, 1.0]), g) == 1.0
    assert dirichlet_energy(np.ones((2, 3)), g) == 0.0
    S, _ = balanced_complete_signs([2, 2])
    sg = SignedGraph(np.clip(S, 0, None), np.clip(-S, 0, None))
    x = np.array([1.0, 1.0, -1.0, -1.0])
    # only the negative (cross) pairs differ: 4 nodes x 2 partners x 4 / 4
    assert dirichlet_energy(x, sg) == 8.0


def test_run_propagation_zero_steps(rng):
    X = rng.standard_normal((3, 2))
    res = run_propagation(X, lambda Z: Z, PropagationConfig(steps=0))
    assert np.array_equal(res.X, X) and len(res.trace) == 1


def test_unsigned_propagation_smooths_monotonically(rng):
    G, X, _ = generate(CsbmParams(seed=0))
    assert G.is_connected()
    A = row_normalize(G.with_self_loops())
    cfg = PropagationConfig(steps=400, post_step="none")
    res = run_propagation(X, lambda Z: 0.5 * Z + 0.5 * (A @ Z), cfg, neighbors=G)
    e = np.array(res.trace.energy)
    assert np.all(np.diff(e) <= 1e-12)
    assert e[-1] < 1e-8
    assert res.status == "converged_to_mean"


def test_run_propagation_diverges_and_stops():
    cfg = PropagationConfig(steps=1000, post_step="none", divergence_norm_cap=1e6)
    res = run_propagation(np.array([[0.0], [1.0]]), lambda Z: 3 * Z - Z.mean(), cfg)
    assert res.status == "diverged" and len(res.trace) < 100


def test_run_propagation_nan_raises_with_step():
    seq = iter([np.ones((1, 1)), np.full((1, 1), np.nan)])
    with pytest.raises(NumericFailureError) as exc:
        run_propagation(np.zeros((1, 1)), lambda Z: next(seq), PropagationConfig(steps=5))
    assert exc.value.step == 2


def test_run_propagation_clustered_and_snapshots():
    X = np.array([[1.0], [-1.0]])
    res = run_propagation(X, lambda Z: Z, PropagationConfig(steps=3), record_at=[0, 2])
    assert res.status == "clustered"
    assert set(res.snapshots) == {0, 2}


def test_sbp_bounded_for_300_steps():
    G, X, L = generate(CsbmParams(seed=1))
    cfg = PropagationConfig(steps=300)
    res = run_propagation(X, make_sbp_stepper(row_normalize(G), label_sbp_negative(L), cfg), cfg)
    assert res.status != "diverged"
    assert max(res.trace.norm) < 1e3
