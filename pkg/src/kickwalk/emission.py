"""Spontaneous-emission primitives: event times, decay channel, photon recoil
and the collapse of the walker onto one ground level."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PHOTON_RECOIL, DerivedParams
from .walk import NumericalInvariantError, WalkerState, fold_beta, shift_ladder

MAX_EVENTS_PER_KICK = 3

COLLAPSE_MODES = ("mean_cos", "exact_cos")


@dataclass(frozen=True)
class SeChannelWeights:
    """Decay rates and the internal amplitudes of the effective jump operators.

    A jump into channel ``m`` maps ``(a1, a2)`` to ``c1*a1 + c2*a2`` in channel
    ``m``; the same two amplitudes serve both target channels.
    """

    gamma1: float
    gamma2: float
    c1: complex
    c2: complex

    @classmethod
    def from_derived(cls, d: DerivedParams) -> "SeChannelWeights":
        return cls(d.gamma1, d.gamma2, d.c1, d.c2)

    @property
    def gamma(self) -> float:
        return self.gamma1 + self.gamma2

    def internal_matrix(self, channel: int) -> np.ndarray:
        out = np.zeros((2, 2), dtype=complex)
        out[channel - 1] = [self.c1, self.c2]
        return out


@dataclass(frozen=True)
class SeEvent:
    t: float
    channel: int
    u: float

    def __post_init__(self):
        if self.channel not in (1, 2):
            raise ValueError(f"channel must be 1 or 2, got {self.channel}")
        if not -1 <= self.u <= 1:
            raise ValueError(f"recoil projection must lie in [-1, 1], got {self.u}")


def draw_se_times(rng: np.random.Generator, gamma: float, tau_p: float) -> list[float]:
    """Event times in ``[0, tau_p)`` from a Poisson process, capped at three per kick."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    times = []
    if gamma == 0:
        return times
    t = 0.0
    while len(times) < MAX_EVENTS_PER_KICK:
        t += rng.exponential(1.0 / gamma)
        if t >= tau_p:
            break
        times.append(t)
    return times


def recoil_density(u):
    """Projected dipole emission pattern ``3/8 (1 + u^2)`` on ``[-1, 1]``."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 0.375 * (1 + u**2), 0.0)


def recoil_cdf(u):
    u = np.clip(np.asarray(u, dtype=float), -1, 1)
    return (u**3 + 3 * u + 4) / 8


def recoil_quantile(r, tol: float = 1e-12, max_iter: int = 50):
    """Invert ``(u^3 + 3u + 4) / 8 = r`` by Newton iteration from ``u = 2r - 1``."""
    r = np.asarray(r, dtype=float)
    u = 2 * r - 1
    target = 8 * r - 4
    for _ in range(max_iter):
        step = (u**3 + 3 * u - target) / (3 * u**2 + 3)
        u = u - step
        if np.all(np.abs(step) < tol):
            break
    return np.clip(u, -1.0, 1.0)


def sample_recoil_u(rng: np.random.Generator, size=None):
    u = recoil_quantile(rng.random(size))
    return float(u) if size is None else u


def select_channel(rng: np.random.Generator, gamma1: float, gamma2: float) -> int:
    """Decay channel drawn with the fixed weights ``gamma_m / gamma``."""
    gamma = gamma1 + gamma2
    if gamma <= 0:
        raise ValueError("both emission rates are zero")
    return 1 if rng.random() < gamma1 / gamma else 2


def apply_collapse(
    state: WalkerState, event: SeEvent, weights: SeChannelWeights, mode: str = "mean_cos"
) -> WalkerState:
    """Project onto the emitting channel and apply the photon recoil.

    ``mean_cos`` replaces the ``cos(theta/2)`` factor of the jump operator by
    its mean ``1/sqrt(2)``; ``exact_cos`` applies it as the average of two
    half-unit momentum shifts and therefore needs a half-integer ladder.
    The momentum kick ``-u/2`` moves the quasimomentum, with whole ladder
    steps carried into the amplitudes.
    """
    if mode not in COLLAPSE_MODES:
        raise ValueError(f"unknown collapse mode {mode!r}")
    if mode == "exact_cos" and not math.isclose(state.spacing, 0.5):
        raise ValueError("exact_cos collapse needs a ladder with spacing 1/2")

    amps = np.zeros_like(state.amps)
    amps[event.channel - 1] = weights.c1 * state.amps[0] + weights.c2 * state.amps[1]
    if mode == "mean_cos":
        amps *= 1 / math.sqrt(2)
    else:
        amps = 0.5 * (shift_ladder(amps, 1) + shift_ladder(amps, -1))

    beta, carry = fold_beta(state.beta - PHOTON_RECOIL * event.u, state.spacing)
    amps = shift_ladder(amps, carry)

    weight = float(np.sum(np.abs(amps) ** 2))
    if not weight > 0:
        raise NumericalInvariantError("collapse annihilated the state")
    state.amps = amps / math.sqrt(weight)
    state.beta = beta
    state.diagnostics["collapse_weight"] = weight
    return state
