"""Laser and atom parameters and the closed-form quantities derived from them.

Units
-----
Frequencies are angular (rad/s), times in seconds.  Momentum is measured in
units of two photon recoils, so the kicking potential ``cos(theta)`` has period
``2*pi`` and a single photon recoil is half a momentum unit.  The kick period
``tau`` is the dimensionless free-evolution time of the kicked rotor,
``tau = 8 * omega_recoil * T_period``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

PHOTON_RECOIL = 0.5
"""Momentum carried by one photon, in kicked-rotor momentum units."""

RB87_RECOIL_FREQUENCY = 2 * math.pi * 3.7710e3
"""Single-photon recoil frequency of Rb-87 on the 780 nm line (rad/s)."""

TALBOT_TAU = 4 * math.pi
"""Dimensionless kick period of the full quantum resonance."""


@dataclass(frozen=True)
class PhysicsParams:
    """Three-level atom driven by a pulsed standing wave.

    ``channel_weights`` scale the per-channel emission rates.  The default
    ``(1, 1)`` is the bare model; other values stand in for branching ratios
    that the three-level abstraction does not describe (used to realise a
    prescribed decay-channel ratio at fixed kick strength).
    """

    omega: float
    delta1: float
    delta2: float
    tau_p: float
    tau_se: float
    tau: float = TALBOT_TAU
    channel_weights: tuple[float, float] = (1.0, 1.0)
    recoil_frequency: float = RB87_RECOIL_FREQUENCY

    def __post_init__(self):
        if not self.tau_p > 0:
            raise ValueError(f"tau_p must be positive, got {self.tau_p}")
        if not self.tau_se > 0:
            raise ValueError(f"tau_se must be positive, got {self.tau_se}")
        if self.delta1 == 0 or self.delta2 == 0:
            raise ValueError("detunings must be non-zero (kick strength undefined)")
        if any(w < 0 for w in self.channel_weights):
            raise ValueError("channel weights must be non-negative")
        if self.tau_se > self.tau_p / 10:
            warnings.warn(
                f"tau_se={self.tau_se:g} s is not much shorter than tau_p={self.tau_p:g} s; "
                "adiabatic elimination of the excited state is questionable",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def period(self) -> float:
        """Physical kick period in seconds."""
        return self.tau / (8 * self.recoil_frequency)


@dataclass(frozen=True)
class DerivedParams:
    k1: float
    k2: float
    gamma1: float
    gamma2: float
    gamma: float
    p_se: float
    xi1: float
    xi2: float
    phi_dyn: float
    c1: complex = field(default=0j)
    c2: complex = field(default=0j)

    @property
    def kicks(self) -> tuple[float, float]:
        """Light-shift corrected kick strengths ``(xi1*k1, xi2*k2)``."""
        return self.xi1 * self.k1, self.xi2 * self.k2

    def as_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, complex):
                out[name] = [value.real, value.imag]
            else:
                out[name] = value
        return out


def kick_strength(omega: float, tau_p: float, delta: float) -> float:
    return omega**2 * tau_p / (8 * delta)


def derive(params: PhysicsParams) -> DerivedParams:
    """Kick strengths, emission rates, light-shift factors and phase correction.

    Raises
    ------
    ValueError
        If the emission probability per kick reaches one.
    """
    p = params
    k1 = kick_strength(p.omega, p.tau_p, p.delta1)
    k2 = kick_strength(p.omega, p.tau_p, p.delta2)
    w1, w2 = p.channel_weights
    gamma1 = w1 * k1 / (p.tau_p * p.tau_se * p.delta1)
    gamma2 = w2 * k2 / (p.tau_p * p.tau_se * p.delta2)
    gamma = gamma1 + gamma2
    p_se = gamma * p.tau_p
    if p_se >= 1:
        raise ValueError(f"emission probability per kick p_se={p_se:.4g} >= 1; model regime violated")
    if gamma < 0:
        raise ValueError("negative emission rate; detuning signs inconsistent with the model")
    xi1 = 1.0 / (1.0 + gamma**2 / (4 * p.delta1**2))
    xi2 = 1.0 / (1.0 + gamma**2 / (4 * p.delta2**2))
    phi_dyn = xi1 * k1 + xi2 * k2 + (p.delta1 + p.delta2) * p.period
    c1 = p.omega / (2 * (p.delta1 - 0.5j * gamma))
    c2 = p.omega / (2 * (-p.delta2 - 0.5j * gamma))
    return DerivedParams(k1, k2, gamma1, gamma2, gamma, p_se, xi1, xi2, phi_dyn, c1, c2)


def invert_for_targets(
    k,
    p_se: float,
    tau_p: float = 380e-9,
    tau_se: float = 26e-9,
    ratio: tuple[float, float] | None = (1.0, 1.0),
    tau: float = TALBOT_TAU,
) -> PhysicsParams:
    """Find laser parameters that realise the requested kick strength(s) and
    emission probability per kick.

    Parameters
    ----------
    k : float or (float, float)
        Kick strength, or per-channel strengths for a biased walk.
    p_se : float
        Emission probability per kick, in ``[0, 1)``.
    ratio : (float, float) or None
        Relative emission rates ``gamma1:gamma2``.  ``None`` keeps the bare
        model's own ratio (``k1**2 : k2**2``).

    Without emission the detuning is put where ``omega/delta = 0.1``, inside
    the perturbative regime.
    """
    k1, k2 = (float(k), float(k)) if np.isscalar(k) else map(float, k)
    if k1 <= 0 or k2 <= 0:
        if p_se > 0:
            raise ValueError("p_se > 0 needs a non-zero kick strength")
        raise ValueError("kick strength must be positive")
    if not 0 <= p_se < 1:
        raise ValueError(f"p_se must lie in [0, 1), got {p_se}")
    natural = np.array([k1**2, k2**2]) / (k1**2 + k2**2)
    if ratio is None:
        frac = natural
    else:
        r = np.asarray(ratio, dtype=float)
        if r.shape != (2,) or np.any(r <= 0):
            raise ValueError(f"ratio components must be positive, got {ratio}")
        frac = r / r.sum()
    if p_se == 0:
        delta = 800 * max(k1, k2) / tau_p
        omega = math.sqrt(8 * delta * max(k1, k2) / tau_p)
        weights = (0.0, 0.0)
    else:
        omega = math.sqrt(8 * (k1**2 + k2**2) / (tau_p * tau_se * p_se))
        weights = tuple(float(w) for w in frac / natural)
    delta1 = omega**2 * tau_p / (8 * k1)
    delta2 = omega**2 * tau_p / (8 * k2)
    return PhysicsParams(omega, delta1, delta2, tau_p, tau_se, tau=tau, channel_weights=weights)
