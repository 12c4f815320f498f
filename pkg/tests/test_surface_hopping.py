"""Weighted-particle transport: sampling, splitting, population series."""
import math

import numpy as np
import pytest

from pjt_sim.classical_dynamics import CrossingEvent, PhaseState, detect_crossing
from pjt_sim.errors import ZeroMomentum
from pjt_sim.pjt_model import Mode, branching_matrix, transition_coefficient
from pjt_sim.surface_hopping import (
    HoppingConfig,
    hop_split,
    run,
    sample_initial_ensemble,
)

EPS = 0.01
Q0 = math.sqrt(EPS) * np.array([5.0, 0.5])
P0 = np.array([-1.0, 0.0])


def make_cfg(n=1000, seed=0, t_grid=(0.0, 0.55), q0=None, p0=None, **kw):
    return HoppingConfig(
        epsilon=EPS, n_particles=n, seed=seed,
        q0=Q0.copy() if q0 is None else np.asarray(q0, dtype=float),
        p0=P0.copy() if p0 is None else np.asarray(p0, dtype=float),
        t_grid=np.asarray(t_grid, dtype=float), **kw)


def test_sampling_moments():
    ens = sample_initial_ensemble(make_cfg(n=100_000, seed=9))
    assert abs(np.sum(ens.weights) - 1.0) < 1e-12
    assert np.all(ens.weights == ens.weights[0])
    mean = ens.y.mean(axis=0)
    target = np.concatenate([Q0, P0])
    stderr = math.sqrt(EPS / 2.0) / math.sqrt(100_000)
    assert np.max(np.abs(mean - target)) < 4.0 * stderr
    var = ens.y.var(axis=0, ddof=1)
    assert np.max(np.abs(var / (EPS / 2.0) - 1.0)) < 0.05


def test_sampling_streams_independent_of_ensemble_size():
    a = sample_initial_ensemble(make_cfg(n=100, seed=7))
    b = sample_initial_ensemble(make_cfg(n=10_000, seed=7))
    assert np.array_equal(a.y, b.y[:100])


def test_sampling_arms_only_approaching_particles():
    inward = sample_initial_ensemble(make_cfg(n=200, seed=1))
    assert np.all(inward.armed == 1)
    outward = sample_initial_ensemble(
        make_cfg(n=200, seed=1, q0=[2.0, 0.0], p0=[1.0, 0.0]))
    assert np.all(outward.armed == 0)


def center_event():
    s = PhaseState(q=Q0.copy(), p=P0.copy(), t=0.0, mode=Mode.PLUS)
    return detect_crossing(s, 0.8)


def test_hop_split_center_weights():
    from pjt_sim.surface_hopping import Particle
    ev = center_event()
    parent = Particle(state=ev.state, weight=1.0, armed=True)
    children = hop_split(parent, ev, EPS)
    got = np.array([c.weight for c in children])
    assert np.max(np.abs(got - [0.016687, 0.758329, 0.224984])) < 1e-5
    assert [c.state.mode for c in children] == [Mode.PLUS, Mode.MINUS, Mode.ZERO]
    assert abs(np.sum(got) - 1.0) < 1e-12
    for c in children:
        assert not c.armed
        assert np.array_equal(c.state.q, ev.state.q)
        assert np.array_equal(c.state.p, ev.state.p)


def test_hop_split_identity_column_for_weak_coupling():
    from pjt_sim.surface_hopping import Particle
    ev = center_event()
    far = CrossingEvent(t_star=ev.t_star, state=ev.state, eta=50.0,
                        p_norm=ev.p_norm)
    children = hop_split(Particle(state=ev.state, weight=0.7, armed=True),
                         far, EPS)
    assert [c.weight for c in children] == [0.7, 0.0, 0.0]


def test_hop_split_rejects_zero_momentum():
    from pjt_sim.surface_hopping import Particle
    ev = center_event()
    stalled = CrossingEvent(t_star=ev.t_star, state=ev.state, eta=0.05,
                            p_norm=0.0)
    with pytest.raises(ZeroMomentum):
        hop_split(Particle(state=ev.state, weight=1.0, armed=True),
                  stalled, EPS)


def test_run_initial_row_and_conservation():
    series = run(make_cfg(n=2000, seed=4, t_grid=(0.0, 0.2, 0.4, 0.55)))
    vals = np.asarray(series.values)
    pruned = np.asarray(series.pruned_mass)
    assert np.array_equal(vals[0], [1.0, 0.0, 0.0])
    totals = vals.sum(axis=1) + pruned
    assert np.max(np.abs(totals - 1.0)) < 1e-12
    assert np.all(vals >= 0.0)


def test_run_outgoing_family_stays_on_initial_mode():
    series = run(make_cfg(n=500, seed=3, q0=[2.0, 0.0], p0=[1.0, 0.0],
                          t_grid=(0.0, 0.5, 1.0)))
    assert np.array_equal(np.asarray(series.values),
                          np.tile([1.0, 0.0, 0.0], (3, 1)))


def test_run_far_passage_is_pure_transport():
    # impact parameter ~2: the transfer underflows and the branching
    # column is exactly the identity column
    series = run(make_cfg(n=500, seed=5, q0=[0.0, 2.0], p0=[-1.0, 0.0],
                          t_grid=(0.0, 2.0, 4.0)))
    vals = np.asarray(series.values)
    assert np.array_equal(vals[:, 0], np.ones(3))
    assert np.max(vals[:, 1:]) == 0.0


def test_run_deterministic_and_seed_sensitive():
    cfg = make_cfg(n=1000, seed=7, t_grid=(0.0, 0.3, 0.55))
    v1 = np.asarray(run(cfg).values)
    v2 = np.asarray(run(cfg).values)
    assert np.array_equal(v1, v2)
    v3 = np.asarray(run(make_cfg(n=1000, seed=8, t_grid=(0.0, 0.3, 0.55))).values)
    assert not np.array_equal(v1, v3)


def test_run_matches_per_particle_split_prediction():
    """One passage inside the horizon: the series must equal the sum of
    per-particle branching columns computed independently."""
    cfg = make_cfg(n=2000, seed=11)
    ens = sample_initial_ensemble(cfg)
    pred = np.zeros(3)
    for i in range(cfg.n_particles):
        s = PhaseState(q=ens.y[i, :2].copy(), p=ens.y[i, 2:].copy(),
                       t=0.0, mode=Mode.PLUS)
        ev = detect_crossing(s, 0.55)
        w = ens.weights[i]
        if ev is None or ev.p_norm == 0.0:
            pred[0] += w
        else:
            t = transition_coefficient(np.array([ev.p_norm, 0.0]),
                                       ev.eta / math.sqrt(EPS))
            pred += w * branching_matrix(t)[:, 0]
    series = run(cfg)
    got = np.asarray(series.values[-1])
    assert np.max(np.abs(pred - got)) < 2e-6


def test_run_population_ordering_after_passage():
    series = run(make_cfg(n=4000, seed=0))
    n_plus, n_minus, n_zero = np.asarray(series.values[-1])
    assert n_minus > n_zero > n_plus
    assert n_plus < 0.2
