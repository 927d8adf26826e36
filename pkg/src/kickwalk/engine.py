"""Monte-Carlo trajectories of the walk with spontaneous emission.

Each kick is a finite pulse split into sub-steps.  Emission events are drawn
as Poisson times inside the pulse and applied at their times (or, optionally,
at the nearest sub-step boundary); between events the kick phases accumulate
on the angle grid.
Ensembles average trajectories over a Gaussian spread of quasimomenta.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .emission import (
    COLLAPSE_MODES,
    SeChannelWeights,
    SeEvent,
    apply_collapse,
    draw_se_times,
    sample_recoil_u,
    select_channel,
)
from .params import TALBOT_TAU, DerivedParams, PhysicsParams, derive, invert_for_targets
from .walk import (
    MomentumDistribution,
    WalkerState,
    apply_coin,
    apply_free_evolution,
    apply_theta_phase,
    coin_matrix,
    default_n_max,
    free_phases,
    momentum_distribution,
    ratchet_state,
    theta_grid,
)

FWHM_TO_SIGMA = 1 / (2 * math.sqrt(2 * math.log(2)))
RNG_SCHEME = "numpy PCG64, stream i seeded by SeedSequence(seed, spawn_key=(i,))"
BATCH_SIZE = 50
EVENT_TIMINGS = ("exact", "snap")


@dataclass(frozen=True)
class RunConfig:
    # physics
    k: float = 1.45
    k2: float | None = None
    p_se: float = 0.0
    ratio: tuple[float, float] = (1.0, 1.0)
    tau_p: float = 380e-9
    tau_se: float = 26e-9
    omega: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    tau: float = TALBOT_TAU
    # walk
    steps: int = 15
    n_max: int | None = None
    coin_alpha: float = math.pi / 4
    coin_chi: float = 0.0
    apply_phi_dyn: bool = False
    # emission
    collapse_mode: str = "mean_cos"
    substeps: int = 4096
    finite_pulse_kinetics: bool = False
    event_timing: str = "exact"
    # ensemble
    trajectories: int = 1000
    delta_beta: float = 0.0
    beta_center: float = 0.0
    seed: int = 0
    # output
    out_dir: str | None = None

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.delta_beta < 0:
            raise ValueError("delta_beta must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.collapse_mode not in COLLAPSE_MODES:
            raise ValueError(f"collapse_mode must be one of {COLLAPSE_MODES}")
        if self.event_timing not in EVENT_TIMINGS:
            raise ValueError(f"event_timing must be one of {EVENT_TIMINGS}")

    @property
    def explicit_physics(self) -> bool:
        return None not in (self.omega, self.delta1, self.delta2)

    def physics(self) -> PhysicsParams:
        if self.explicit_physics:
            return PhysicsParams(self.omega, self.delta1, self.delta2, self.tau_p, self.tau_se, tau=self.tau)
        k = self.k if self.k2 is None else (self.k, self.k2)
        return invert_for_targets(k, self.p_se, self.tau_p, self.tau_se, self.ratio, tau=self.tau)

    def grid_n_max(self) -> int:
        if self.n_max is not None:
            return self.n_max
        k = max(self.k, self.k2 or 0.0)
        return default_n_max(k, self.steps)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class KickPlan:
    """Everything a trajectory needs per kick, fixed for a run."""

    derived: DerivedParams
    weights: SeChannelWeights
    tau_p: float
    substeps: int
    mode: str = "mean_cos"
    kinetic_tau: float | None = None
    coin: np.ndarray = field(default_factory=coin_matrix)
    tau: float = TALBOT_TAU
    phase_correction: float | None = None
    event_timing: str = "exact"

    @classmethod
    def from_config(cls, config: RunConfig) -> "KickPlan":
        params = config.physics()
        derived = derive(params)
        kinetic = config.tau * params.tau_p / params.period if config.finite_pulse_kinetics else None
        return cls(
            derived=derived,
            weights=SeChannelWeights.from_derived(derived),
            tau_p=params.tau_p,
            substeps=config.substeps,
            mode=config.collapse_mode,
            kinetic_tau=kinetic,
            coin=coin_matrix(config.coin_alpha, config.coin_chi),
            tau=config.tau,
            phase_correction=derived.phi_dyn if config.apply_phi_dyn else None,
            event_timing=config.event_timing,
        )


def draw_kick_events(rng: np.random.Generator, plan: KickPlan) -> list[SeEvent]:
    events = []
    for t in draw_se_times(rng, plan.weights.gamma, plan.tau_p):
        channel = select_channel(rng, plan.weights.gamma1, plan.weights.gamma2)
        events.append(SeEvent(t, channel, sample_recoil_u(rng)))
    return events


def _kick_fraction(state: WalkerState, plan: KickPlan, fraction: float) -> None:
    if fraction <= 0:
        return
    k1, k2 = plan.derived.kicks
    _, theta = theta_grid(state.n_max, state.spacing)
    c = np.cos(theta)
    phases = np.stack([np.exp(1j * fraction * k1 * c), np.exp(-1j * fraction * k2 * c)])
    apply_theta_phase(state, phases)


def _event_fractions(events: list[SeEvent], plan: KickPlan) -> list[float]:
    """Event positions as fractions of the pulse, snapped to sub-step
    boundaries when ``plan.event_timing == "snap"``."""
    fractions = [min(1.0, max(0.0, e.t / plan.tau_p)) for e in events]
    if plan.event_timing == "snap":
        n_sub = plan.substeps
        fractions = [round(f * n_sub) / n_sub for f in fractions]
    return fractions


def _kinetic_segment(state: WalkerState, plan: KickPlan, fraction: float) -> None:
    # symmetric split: half free phase, kick, half free phase
    if fraction <= 0:
        return
    half = 0.5 * plan.kinetic_tau * fraction
    state.amps *= free_phases(state.momenta, half)
    _kick_fraction(state, plan, fraction)
    state.amps *= free_phases(state.momenta, half)


def kick_with_se(
    state: WalkerState,
    plan: KickPlan,
    rng: np.random.Generator | None = None,
    events: list[SeEvent] | None = None,
) -> WalkerState:
    """One finite kick pulse with emission events.

    Events are drawn from ``rng`` unless given explicitly.  With the default
    ``exact`` timing a sub-step containing an event is split at the event;
    ``snap`` moves each event to the nearest sub-step boundary instead.
    """
    if events is None:
        events = draw_kick_events(rng, plan) if rng is not None else []
    fractions = _event_fractions(events, plan)
    state.diagnostics["events"] = len(events)

    if plan.kinetic_tau is None:
        # delta-kick limit: kick phases commute, only the event positions matter
        done = 0.0
        for f, event in zip(fractions, events):
            _kick_fraction(state, plan, f - done)
            apply_collapse(state, event, plan.weights, plan.mode)
            done = f
        _kick_fraction(state, plan, 1.0 - done)
        return state

    n_sub = plan.substeps
    pending = list(zip(fractions, events))
    for j in range(n_sub):
        start, end = j / n_sub, (j + 1) / n_sub
        pos = start
        while pending and (pending[0][0] < end or j == n_sub - 1):
            f, event = pending.pop(0)
            _kinetic_segment(state, plan, f - pos)
            apply_collapse(state, event, plan.weights, plan.mode)
            pos = max(pos, f)
        _kinetic_segment(state, plan, end - pos)
    return state


def walk_step(state: WalkerState, plan: KickPlan, rng: np.random.Generator | None) -> WalkerState:
    kick_with_se(state, plan, rng)
    if plan.phase_correction is not None:
        state.amps[0] *= np.exp(1j * plan.phase_correction)
    apply_coin(state, plan.coin)
    apply_free_evolution(state, plan.tau)
    return state


def common_grid(n_max: int) -> tuple[int, int]:
    return -n_max - 1, n_max + 1


def initial_state(config: RunConfig, beta: float) -> WalkerState:
    n_max = config.grid_n_max()
    if config.collapse_mode == "exact_cos":
        return ratchet_state(2 * n_max, beta, spacing=0.5)
    return ratchet_state(n_max, beta)


def run_trajectory(
    config: RunConfig,
    beta: float,
    rng: np.random.Generator,
    plan: KickPlan | None = None,
) -> tuple[np.ndarray, int]:
    """One trajectory from the ratchet state at quasimomentum ``beta``.

    Returns populations of shape ``(steps + 1, 2, G)`` on the common integer
    grid of the run and the number of emission events.
    """
    plan = plan or KickPlan.from_config(config)
    n_lo, n_hi = common_grid(config.grid_n_max())
    state = initial_state(config, beta)
    out = np.empty((config.steps + 1, 2, n_hi - n_lo + 1))
    events = 0

    def record(t):
        d = momentum_distribution(state, t).on_grid(n_lo, n_hi)
        out[t, 0] = d.p1
        out[t, 1] = d.p2

    record(0)
    for t in range(1, config.steps + 1):
        walk_step(state, plan, rng)
        events += state.diagnostics.get("events", 0)
        record(t)
    return out, events


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def trajectory_beta(config: RunConfig, rng: np.random.Generator) -> float:
    if config.delta_beta == 0:
        return config.beta_center
    return config.beta_center + config.delta_beta * FWHM_TO_SIGMA * rng.standard_normal()


def _run_batch(config: RunConfig, plan: KickPlan, indices: range):
    total = None
    counts = []
    for i in indices:
        rng = trajectory_rng(config.seed, i)
        pops, n_events = run_trajectory(config, trajectory_beta(config, rng), rng, plan)
        total = pops if total is None else total + pops
        counts.append(n_events)
    return total, counts


@dataclass
class EnsembleResult:
    distributions: list[MomentumDistribution]
    event_counts: np.ndarray
    metadata: dict

    @property
    def final(self) -> MomentumDistribution:
        return self.distributions[-1]


def run_ensemble(
    config: RunConfig,
    progress: Callable[[int, int], None] | None = None,
    n_jobs: int = 1,
    order: list[int] | None = None,
) -> EnsembleResult:
    """Average ``config.trajectories`` independent trajectories.

    Trajectory ``i`` draws its quasimomentum and its emission events from its
    own stream, so results do not depend on ``n_jobs`` or on execution
    ``order``; batches are summed in index order.  ``progress(step, i)`` is
    called once per finished trajectory.
    """
    start = time.perf_counter()
    plan = KickPlan.from_config(config)
    batches = [
        range(b, min(b + BATCH_SIZE, config.trajectories))
        for b in range(0, config.trajectories, BATCH_SIZE)
    ]
    schedule = list(range(len(batches))) if order is None else _batch_order(order, len(batches))

    results = {}
    if n_jobs == 1:
        for b in schedule:
            results[b] = _run_batch(config, plan, batches[b])
            if progress:
                for i in batches[b]:
                    progress(config.steps, i)
    else:
        from joblib import Parallel, delayed

        outs = Parallel(n_jobs=n_jobs)(delayed(_run_batch)(config, plan, batches[b]) for b in schedule)
        for b, out in zip(schedule, outs):
            results[b] = out
            if progress:
                for i in batches[b]:
                    progress(config.steps, i)

    total = None
    counts = []
    for b in range(len(batches)):
        pops, c = results[b]
        total = pops if total is None else total + pops
        counts.extend(c)
    mean = total / config.trajectories

    n_lo, n_hi = common_grid(config.grid_n_max())
    grid = np.arange(n_lo, n_hi + 1)
    dists = [MomentumDistribution(grid, mean[t, 0], mean[t, 1], t) for t in range(config.steps + 1)]
    metadata = {
        "config": config.as_dict(),
        "derived": plan.derived.as_dict(),
        "physics": dataclasses.asdict(config.physics()),
        "seed": config.seed,
        "rng": RNG_SCHEME,
        "n_max": config.grid_n_max(),
        "elapsed_s": time.perf_counter() - start,
        "oracle": False,
    }
    return EnsembleResult(dists, np.asarray(counts), metadata)


def _batch_order(order: list[int], n_batches: int) -> list[int]:
    """Batch schedule induced by a trajectory execution order."""
    seen = []
    for i in order:
        b = i // BATCH_SIZE
        if b not in seen:
            seen.append(b)
    if sorted(seen) != list(range(n_batches)):
        raise ValueError("order must cover every trajectory")
    return seen
