"""Adiabatic elimination of the excited level of the kicked Lambda system.

:func:`reduce` evaluates the closed-form effective ground-state operators;
:func:`validate_reduction` certifies them by integrating the full three-level
master equation alongside the effective two-level one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .oracle import (
    DensityMatrix,
    Jump,
    PairGenerator,
    QuadratureRule,
    angle_grid,
    three_level_generator,
    trace_distance,
)
from .walk import NumericalInvariantError

WEAK_DRIVE_LIMIT = 0.3
DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class ThreeLevelModel:
    """Ground levels at ``E1 = -delta1`` and ``E2 = +delta2``, excited level at 0."""

    omega: float
    delta1: float
    delta2: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def energies(self) -> tuple[float, float]:
        return -self.delta1, self.delta2

    @property
    def gamma(self) -> float:
        return self.gamma1 + self.gamma2


@dataclass(frozen=True)
class EffectiveModel:
    """Effective ground-state operators.

    The Hamiltonian is ``[[h11, h12], [h21, h22]] cos^2(theta/2)``; jump ``m``
    is ``sqrt(rates[m]) cos(theta/2) jump_matrices[m]``.
    """

    h11: float
    h22: float
    h12: complex
    h21: complex
    jump_matrices: tuple
    rates: tuple
    cross_terms: bool = True

    @property
    def hamiltonian(self) -> np.ndarray:
        """Internal matrix multiplying ``cos^2(theta/2)``, as used in the dynamics."""
        h = np.array([[self.h11, self.h12], [self.h21, self.h22]], dtype=complex)
        if not self.cross_terms:
            h[0, 1] = h[1, 0] = 0
        return h


def reduce(model: ThreeLevelModel, keep_cross_terms: bool = True) -> EffectiveModel:
    """Effective Hamiltonian and Lindblad operators of the driven ground levels.

    Cross terms are reported always; ``keep_cross_terms=False`` drops them
    from :attr:`EffectiveModel.hamiltonian`.
    """
    d1, d2, om, g = model.delta1, model.delta2, model.omega, model.gamma
    if d1 == 0 or d2 == 0:
        raise ValueError("detunings must be non-zero")
    if max(abs(om / d1), abs(om / d2)) > WEAK_DRIVE_LIMIT:
        warnings.warn(
            f"Omega/Delta = {max(abs(om / d1), abs(om / d2)):.3g} exceeds {WEAK_DRIVE_LIMIT}; "
            "the adiabatic elimination is not reliable",
            RuntimeWarning,
            stacklevel=2,
        )
    h11 = -d1 * om**2 / (4 * d1**2 + g**2)
    h22 = d2 * om**2 / (4 * d2**2 + g**2)
    h12 = (d2 - d1) * om**2 / (8 * (d1 + 0.5j * g) * (-d2 - 0.5j * g))
    h21 = (d2 - d1) * om**2 / (8 * (d1 - 0.5j * g) * (-d2 + 0.5j * g))
    c = (om / (2 * (d1 - 0.5j * g)), om / (2 * (-d2 - 0.5j * g)))
    mats = []
    for m in range(2):
        a = np.zeros((2, 2), dtype=complex)
        a[m] = c
        mats.append(a)
    return EffectiveModel(h11, h22, h12, h21, tuple(mats), (model.gamma1, model.gamma2), keep_cross_terms)


def effective_generator(
    eff: EffectiveModel,
    energies: tuple[float, float],
    theta: np.ndarray,
    quadrature: QuadratureRule | None = None,
) -> PairGenerator:
    half2 = np.cos(theta / 2) ** 2
    h = eff.hamiltonian[None] * half2[:, None, None]
    h[:, 0, 0] += energies[0]
    h[:, 1, 1] += energies[1]
    half = np.cos(theta / 2)
    kernel = np.outer(half, half).astype(complex)
    if quadrature is not None:
        kernel = kernel * quadrature.recoil_kernel(theta)
    jumps = [
        Jump(math.sqrt(r) * a, half2, kernel) for a, r in zip(eff.jump_matrices, eff.rates) if r > 0
    ]
    return PairGenerator(h, jumps)


@dataclass
class ReductionReport:
    max_trace_distance: float
    excited_plateau: float
    excited_peak: float
    weak_drive_bound: float
    trace_drift: float
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    warnings: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [
            f"max ground-subspace trace distance: {self.max_trace_distance:.3e}",
            f"excited plateau: {self.excited_plateau:.3e} (bound 2*(Omega/2Delta)^2 = {2 * self.weak_drive_bound:.3e})",
            f"excited peak: {self.excited_peak:.3e}",
            f"trace drift: {self.trace_drift:.3e}",
        ]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def validate_reduction(
    model: ThreeLevelModel,
    n_max: int = 2,
    duration: float = 1000.0,
    dt: float = 0.04,
    recoil: bool = True,
    sample_every: int = 25,
) -> ReductionReport:
    """Integrate the three-level and the effective master equations from the
    same ground state and compare their ground-subspace density matrices.

    Both runs keep the ground energies ``E1 = -delta1``, ``E2 = +delta2``.
    The initial state is the ratchet ``(|0> - i|1>)/sqrt2`` in momentum with
    the internal superposition ``(|1> + |2>)/sqrt2``.  The excited plateau is
    the mean excited population over the second half of the run.
    """
    if n_max > 6:
        raise ValueError("validate_reduction is limited to n_max <= 6")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        eff = reduce(model)
    notes = [str(w.message) for w in caught]

    theta, fourier = angle_grid(n_max)
    quad = QuadratureRule.gauss_legendre() if recoil else None
    full = three_level_generator(model.omega, model.energies, (model.gamma1, model.gamma2), theta, quad)
    red = effective_generator(eff, model.energies, theta, quad)

    psi_n = np.zeros((theta.size, 2), dtype=complex)
    psi_n[n_max] = 0.5
    psi_n[n_max + 1] = -0.5j
    psi2 = fourier @ psi_n
    psi3 = np.concatenate([psi2, np.zeros((theta.size, 1))], axis=1)
    rho3 = DensityMatrix.from_pure(psi3).blocks
    rho2 = DensityMatrix.from_pure(psi2).blocks

    steps = max(1, math.ceil(duration / dt - 1e-9))
    h = duration / steps
    for gen in (full, red):
        if gen.norm_bound() * h >= 0.1:
            raise ValueError(f"dt={h:g} too large for the stability limit")

    from .oracle import _rk4

    times, dists, excited = [0.0], [0.0], [0.0]
    for s in range(1, steps + 1):
        rho3 = _rk4(rho3, full, h)
        rho2 = _rk4(rho2, red, h)
        if s % sample_every == 0 or s == steps:
            ground = DensityMatrix(rho3[:, :, :2, :2]).matrix()
            times.append(s * h)
            dists.append(trace_distance(ground, DensityMatrix(rho2).matrix()))
            excited.append(float(np.einsum("ii->", rho3[:, :, 2, 2]).real))
    drift = max(
        abs(DensityMatrix(rho3).trace() - 1),
        abs(DensityMatrix(rho2).trace() - 1),
    )
    if drift > DRIFT_LIMIT:
        raise NumericalInvariantError(f"trace drift {drift:.3g} signals an unstable step size")
    times = np.asarray(times)
    excited = np.asarray(excited)
    late = times >= 0.5 * duration
    bound = (model.omega / (2 * min(abs(model.delta1), abs(model.delta2)))) ** 2
    return ReductionReport(
        max_trace_distance=float(max(dists)),
        excited_plateau=float(excited[late].mean()),
        excited_peak=float(excited.max()),
        weak_drive_bound=bound,
        trace_drift=float(drift),
        times=times,
        distances=np.asarray(dists),
        warnings=notes,
    )
