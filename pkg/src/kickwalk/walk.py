"""Closed-system walk in momentum space.

A walker carries two internal channels, each a ladder of complex amplitudes
``a_m(n)`` over momenta ``p = n * spacing + beta`` with
``n = -n_max .. n_max``.  Kicks are diagonal in the angle ``theta`` and are
applied spectrally; free evolution is diagonal in momentum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .params import TALBOT_TAU

BOUNDARY_TOL = 1e-8


class NumericalInvariantError(RuntimeError):
    """A numerical invariant of the simulation was violated."""


class GridTooSmallError(NumericalInvariantError):
    """Probability reached the edge of the momentum ladder."""


@dataclass
class WalkerState:
    beta: float
    amps: np.ndarray
    spacing: float = 1.0
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def n_max(self) -> int:
        return (self.amps.shape[1] - 1) // 2

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def momenta(self) -> np.ndarray:
        return self.n * self.spacing + self.beta

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def copy(self) -> "WalkerState":
        return WalkerState(self.beta, self.amps.copy(), self.spacing, dict(self.diagnostics))


@dataclass
class MomentumDistribution:
    """Populations per integer momentum class ``n`` (momentum rounded to nearest)."""

    n: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    step: int = 0

    @property
    def p_total(self) -> np.ndarray:
        return self.p1 + self.p2

    def on_grid(self, n_lo: int, n_hi: int) -> "MomentumDistribution":
        """Re-express on ``n_lo..n_hi``; raises if mass would be dropped."""
        grid = np.arange(n_lo, n_hi + 1)
        p1 = np.zeros(grid.size)
        p2 = np.zeros(grid.size)
        inside = (self.n >= n_lo) & (self.n <= n_hi)
        if np.any((self.p1 + self.p2)[~inside] > 0):
            raise GridTooSmallError(f"distribution extends beyond [{n_lo}, {n_hi}]")
        idx = self.n[inside] - n_lo
        p1[idx] = self.p1[inside]
        p2[idx] = self.p2[inside]
        return MomentumDistribution(grid, p1, p2, self.step)


def default_n_max(k: float, steps: int) -> int:
    return max(2, math.ceil(10 + 2 * abs(k) * steps))


def fold_beta(beta: float, spacing: float = 1.0) -> tuple[float, int]:
    """Split a momentum offset into ``beta`` in ``[0, spacing)`` and an integer ladder carry."""
    carry = math.floor(beta / spacing)
    folded = beta - carry * spacing
    if folded >= spacing:  # rounding at the upper edge
        folded -= spacing
        carry += 1
    return folded, carry


def shift_ladder(amps: np.ndarray, shift: int) -> np.ndarray:
    """Move amplitudes ``shift`` ladder sites up, zero-filling; checks the lost mass."""
    if shift == 0:
        return amps
    out = np.zeros_like(amps)
    size = amps.shape[-1]
    if abs(shift) >= size:
        lost = np.sum(np.abs(amps) ** 2)
    elif shift > 0:
        out[..., shift:] = amps[..., :-shift]
        lost = np.sum(np.abs(amps[..., -shift:]) ** 2)
    else:
        out[..., :shift] = amps[..., -shift:]
        lost = np.sum(np.abs(amps[..., :-shift]) ** 2)
    if lost > BOUNDARY_TOL:
        raise GridTooSmallError(f"ladder shift by {shift} pushed {lost:.3g} of the norm off the grid")
    return out


def check_boundary(state: WalkerState) -> None:
    edge = np.abs(state.amps[:, [0, -1]]) ** 2
    if np.any(edge >= BOUNDARY_TOL):
        raise GridTooSmallError(
            f"boundary occupation {edge.max():.3g} at n_max={state.n_max}; enlarge the grid"
        )


def ratchet_state(
    n_max: int,
    beta: float = 0.0,
    spacing: float = 1.0,
    external=(1.0, -1j),
    internal=(1.0, 1.0),
) -> WalkerState:
    """Product of the internal superposition and the two-class ratchet ``|0> - i|1>``.

    ``beta`` may be any real offset: it is folded into ``[0, spacing)`` and the
    integer part moves the ratchet along the ladder.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    folded, carry = fold_beta(beta, spacing)
    step = round(1 / spacing)
    ext = np.asarray(external, dtype=complex)
    ext = ext / np.linalg.norm(ext)
    intl = np.asarray(internal, dtype=complex)
    intl = intl / np.linalg.norm(intl)
    amps = np.zeros((2, 2 * n_max + 1), dtype=complex)
    for j, c in enumerate(ext):
        i = n_max + carry + j * step
        if not 0 <= i < amps.shape[1]:
            raise GridTooSmallError("ratchet state does not fit on the ladder")
        amps[:, i] = intl * c
    return WalkerState(folded, amps, spacing)


# -- coins -------------------------------------------------------------------

def coin_matrix(alpha: float = math.pi / 4, chi: float = 0.0) -> np.ndarray:
    """Two-parameter coin; ``alpha=pi/4, chi=0`` is the balanced beam splitter
    ``(1/sqrt2) [[1, i], [i, 1]]``."""
    s = 1j * math.sin(alpha)
    return np.array(
        [[math.cos(alpha), s * np.exp(1j * chi)], [s * np.exp(-1j * chi), math.cos(alpha)]]
    )


BALANCED_COIN = coin_matrix()


def apply_coin(state: WalkerState, coin: np.ndarray) -> WalkerState:
    coin = np.asarray(coin, dtype=complex)
    if coin.shape != (2, 2) or not np.allclose(coin.conj().T @ coin, np.eye(2), rtol=0, atol=1e-12):
        raise ValueError("coin must be a unitary 2x2 matrix")
    state.amps = coin @ state.amps
    return state


# -- kicks -------------------------------------------------------------------

@lru_cache(maxsize=64)
def theta_grid(n_max: int, spacing: float = 1.0) -> tuple[int, np.ndarray]:
    """FFT size and the lattice angle ``theta`` at each grid point."""
    size = 1 << math.ceil(math.log2(4 * (n_max + 1)))
    x = 2 * np.pi * np.arange(size) / size
    theta = x / spacing
    theta.setflags(write=False)
    return size, theta


def to_theta(amps: np.ndarray, size: int) -> np.ndarray:
    n_max = (amps.shape[-1] - 1) // 2
    buf = np.zeros(amps.shape[:-1] + (size,), dtype=complex)
    buf[..., : n_max + 1] = amps[..., n_max:]
    buf[..., size - n_max :] = amps[..., :n_max]
    return np.fft.ifft(buf, axis=-1) * size


def from_theta(psi: np.ndarray, n_max: int) -> np.ndarray:
    size = psi.shape[-1]
    buf = np.fft.fft(psi, axis=-1) / size
    return np.concatenate([buf[..., size - n_max :], buf[..., : n_max + 1]], axis=-1)


def apply_theta_phase(state: WalkerState, phases: np.ndarray) -> WalkerState:
    """Multiply each channel by a function of ``theta`` given on the FFT grid."""
    size = phases.shape[-1]
    psi = to_theta(state.amps, size)
    state.amps = from_theta(psi * phases, state.n_max)
    check_boundary(state)
    return state


def kick_phases(n_max: int, spacing: float, k1: float, k2: float) -> np.ndarray:
    _, theta = theta_grid(n_max, spacing)
    c = np.cos(theta)
    return np.stack([np.exp(1j * k1 * c), np.exp(-1j * k2 * c)])


def apply_ideal_kick(state: WalkerState, k1: float, k2: float) -> WalkerState:
    """Conditional kick: channel 1 gets ``exp(+i k1 cos theta)``, channel 2 ``exp(-i k2 cos theta)``."""
    return apply_theta_phase(state, kick_phases(state.n_max, state.spacing, k1, k2))


# -- free evolution ----------------------------------------------------------

def free_phases(momenta: np.ndarray, tau: float) -> np.ndarray:
    # tau p^2 / 2 = 2 pi (tau / 4pi) p^2: reduce in turns to keep resonant phases exact
    turns = (tau / TALBOT_TAU) * momenta**2
    turns = turns - np.round(turns)
    return np.exp(-2j * np.pi * turns)


def apply_free_evolution(state: WalkerState, tau: float) -> WalkerState:
    state.amps = state.amps * free_phases(state.momenta, tau)
    return state


def walk_step_ideal(state: WalkerState, k1: float, k2: float, coin=BALANCED_COIN, tau: float = TALBOT_TAU):
    """Kick, coin toss, free evolution."""
    apply_ideal_kick(state, k1, k2)
    apply_coin(state, coin)
    apply_free_evolution(state, tau)
    return state


def bin_populations(momenta: np.ndarray, pops: np.ndarray, step: int = 0) -> MomentumDistribution:
    """Bin per-channel populations ``pops[m, i]`` at ``momenta[i]`` (ascending)
    to the nearest integer; exact half-integers are shared between both neighbours."""
    lower = np.floor(momenta).astype(int)
    frac = momenta - lower
    tie = np.abs(frac - 0.5) < 1e-12
    upper_w = np.where(tie, 0.5, (frac > 0.5).astype(float))
    lo = int(lower[0])
    size = int(lower[-1]) - lo + 2
    idx = lower - lo
    out = [
        np.bincount(idx, weights=w * (1 - upper_w), minlength=size)
        + np.bincount(idx + 1, weights=w * upper_w, minlength=size)
        for w in pops
    ]
    if upper_w[-1] == 0:
        size -= 1
    n = np.arange(lo, lo + size)
    return MomentumDistribution(n, out[0][:size], out[1][:size], step)


def momentum_distribution(state: WalkerState, step: int = 0) -> MomentumDistribution:
    return bin_populations(state.momenta, np.abs(state.amps) ** 2, step)


def run_ideal(k1: float, k2: float, steps: int, n_max: int | None = None, beta: float = 0.0,
              coin=BALANCED_COIN, tau: float = TALBOT_TAU) -> list[MomentumDistribution]:
    """Distributions after 0..steps ideal walk steps from the ratchet state."""
    if n_max is None:
        n_max = default_n_max(max(k1, k2), steps)
    state = ratchet_state(n_max, beta)
    out = [momentum_distribution(state, 0)]
    for t in range(1, steps + 1):
        walk_step_ideal(state, k1, k2, coin, tau)
        out.append(momentum_distribution(state, t))
    return out
