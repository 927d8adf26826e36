import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kickwalk.analysis import l1_distance, metrics
from kickwalk.emission import SeEvent
from kickwalk.engine import (
    KickPlan,
    RunConfig,
    kick_with_se,
    run_ensemble,
    run_trajectory,
    trajectory_rng,
)
from kickwalk.walk import apply_ideal_kick, ratchet_state, run_ideal


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(substeps=0)
    with pytest.raises(ValueError):
        RunConfig(trajectories=0)
    with pytest.raises(ValueError):
        RunConfig(delta_beta=-0.1)
    with pytest.raises(ValueError):
        RunConfig(collapse_mode="nope")
    with pytest.raises(ValueError):
        RunConfig(event_timing="late")


def test_explicit_physics_wins():
    c = RunConfig(k=1.0, p_se=0.05, omega=3e8, delta1=3e9, delta2=3e9)
    assert c.physics().omega == 3e8


@pytest.mark.parametrize("substeps", [1, 7, 4096, 60000])
def test_kick_without_se_is_ideal(substeps):
    plan = KickPlan.from_config(RunConfig(p_se=0.0, substeps=substeps))
    a = ratchet_state(12)
    b = ratchet_state(12)
    kick_with_se(a, plan, np.random.default_rng(0))
    apply_ideal_kick(b, *plan.derived.kicks)
    assert np.max(np.abs(a.amps - b.amps)) < 1e-12


def test_forced_event_matches_operator_product():
    plan = KickPlan.from_config(RunConfig(p_se=0.11, substeps=4096))
    k1, k2 = plan.derived.kicks
    s = ratchet_state(12, internal=(1.0, 0.0))
    event = SeEvent(0.5 * plan.tau_p, 2, 0.0)
    kick_with_se(s, plan, events=[event])

    # hand-composed: half kick, project onto channel 2, half kick
    ref = ratchet_state(12, internal=(1.0, 0.0))
    apply_ideal_kick(ref, 0.5 * k1, 0.5 * k2)
    w = plan.weights
    amps = np.zeros_like(ref.amps)
    amps[1] = (w.c1 * ref.amps[0] + w.c2 * ref.amps[1]) / math.sqrt(2)
    ref.amps = amps / np.linalg.norm(amps)
    apply_ideal_kick(ref, 0.5 * k1, 0.5 * k2)
    assert np.max(np.abs(s.amps - ref.amps)) < 1e-12
    assert np.all(s.amps[0] == 0)


def test_snap_timing_moves_event_to_boundary():
    plan = KickPlan.from_config(RunConfig(p_se=0.11, substeps=4, event_timing="snap"))
    event = SeEvent(0.3 * plan.tau_p, 1, 0.0)
    s = ratchet_state(12)
    kick_with_se(s, plan, events=[event])
    exact = KickPlan.from_config(RunConfig(p_se=0.11, substeps=4))
    r = ratchet_state(12)
    kick_with_se(r, exact, events=[SeEvent(0.25 * plan.tau_p, 1, 0.0)])
    assert np.max(np.abs(s.amps - r.amps)) < 1e-13


def test_trajectory_without_se_equals_ideal():
    c = RunConfig(p_se=0.0, steps=15, trajectories=1)
    pops, events = run_trajectory(c, 0.0, trajectory_rng(0, 0))
    ideal = run_ideal(1.45, 1.45, 15)[-1]
    assert events == 0
    lo = -c.grid_n_max() - 1
    ref = ideal.on_grid(lo, -lo)
    assert np.max(np.abs(pops[-1].sum(axis=0) - ref.p_total)) < 1e-12


def test_zero_steps_returns_initial():
    r = run_ensemble(RunConfig(p_se=0.11, steps=0, trajectories=3))
    d = r.final
    nz = {n: p for n, p in zip(d.n, d.p_total) if p > 0}
    assert nz == pytest.approx({0: 0.5, 1: 0.5})


def test_ensemble_normalised():
    r = run_ensemble(RunConfig(p_se=0.11, steps=5, trajectories=60, delta_beta=0.02))
    for d in r.distributions:
        assert d.p_total.sum() == pytest.approx(1.0, abs=1e-8)
    assert len(r.event_counts) == 60


def test_determinism_and_order_independence():
    c = RunConfig(p_se=0.11, steps=6, trajectories=120, delta_beta=0.01, seed=5)
    a = run_ensemble(c)
    b = run_ensemble(c)
    assert np.array_equal(a.final.p_total, b.final.p_total)
    order = list(range(120))[::-1]
    d = run_ensemble(c, order=order)
    assert np.max(np.abs(d.final.p_total - a.final.p_total)) < 1e-12
    assert a.metadata["seed"] == 5


def test_parallel_matches_serial():
    c = RunConfig(p_se=0.11, steps=4, trajectories=100)
    a = run_ensemble(c)
    b = run_ensemble(c, n_jobs=2)
    assert np.array_equal(a.final.p_total, b.final.p_total)


def test_trajectory_streams_independent_of_count():
    # trajectory i sees the same stream whatever the ensemble size
    c = RunConfig(p_se=0.11, steps=3)
    r1 = trajectory_rng(c.seed, 7).random(3)
    r2 = trajectory_rng(c.seed, 7).random(3)
    assert np.array_equal(r1, r2)
    assert not np.array_equal(r1, trajectory_rng(c.seed, 8).random(3))


def test_progress_callback():
    seen = []
    run_ensemble(RunConfig(p_se=0.0, steps=2, trajectories=4), progress=lambda t, i: seen.append(i))
    assert seen == [0, 1, 2, 3]


@given(seed=st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_trajectory_norm_property(seed):
    c = RunConfig(p_se=0.3, steps=4, trajectories=1, delta_beta=0.05)
    pops, _ = run_trajectory(c, 0.013, trajectory_rng(seed, 0))
    assert np.allclose(pops.sum(axis=(1, 2)), 1.0, atol=1e-12)


def test_exact_cos_mode_runs():
    r = run_ensemble(RunConfig(p_se=0.11, steps=5, trajectories=40, collapse_mode="exact_cos"))
    assert r.final.p_total.sum() == pytest.approx(1.0, abs=1e-10)


def test_kinetic_pulse_converges():
    c = RunConfig(p_se=0.11, steps=2, trajectories=4, finite_pulse_kinetics=True, substeps=256)
    a = run_ensemble(c)
    b = run_ensemble(c.replace(substeps=1024))
    assert l1_distance(a.final, b.final) < 1e-6


def test_phase_correction_only_changes_channel_phase():
    c = RunConfig(p_se=0.0, steps=1, trajectories=1)
    a = run_ensemble(c).final
    b = run_ensemble(c.replace(apply_phi_dyn=True)).final
    # a relative phase before the coin redistributes population
    assert not np.allclose(a.p1, b.p1)
    assert a.p_total.sum() == pytest.approx(b.p_total.sum())


@pytest.mark.slow
def test_monotone_decoherence():
    vals = []
    for p in (0.0, 0.02, 0.037, 0.11):
        r = run_ensemble(RunConfig(p_se=p, trajectories=1000 if p else 1))
        vals.append(metrics(r.final).peak_contrast)
    slack = 0.05  # about 3 sigma at 1000 trajectories
    assert all(b <= a + slack for a, b in zip(vals, vals[1:]))
