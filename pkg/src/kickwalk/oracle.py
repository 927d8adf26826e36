"""Dense reference integrators for small grids.

Density matrices are held in the angle representation on an ``N = 2*n_max+2``
point grid (momenta ``-n_max..n_max+1``, symmetric about the walk centre), ``R[i, j, a, b] = <a, theta_i| rho |b, theta_j>``.  Every operator
of the kick pulse is diagonal in the angle, so the master equation acts on each
``(theta_i, theta_j)`` block separately and is integrated with fixed-step RK4.
The photon recoil ``exp(-i u theta / 2)`` is applied on this periodic grid,
averaged over ``u`` with a Gauss-Legendre rule; quasimomentum therefore stays
fixed in these integrators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .emission import recoil_density, sample_recoil_u
from .engine import RunConfig
from .params import DerivedParams, derive
from .walk import MomentumDistribution, bin_populations, coin_matrix, free_phases

MAX_ORACLE_N_MAX = 8
STABILITY_LIMIT = 0.1
SAFETY_FACTOR = 10


# -- grid ----------------------------------------------------------------------

def angle_grid(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Angles ``theta_j = 2 pi j / N`` (``j = -n_max..n_max+1``) and the unitary
    map ``F[j, n] = exp(i n theta_j) / sqrt(N)`` from momentum to angle."""
    n = np.arange(-n_max, n_max + 2)
    theta = 2 * np.pi * n / n.size
    return theta, np.exp(1j * np.outer(theta, n)) / math.sqrt(n.size)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for ``integral du Xi(u) f(u)`` on ``[-1, 1]``."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, n: int = 16) -> "QuadratureRule":
        x, w = np.polynomial.legendre.leggauss(n)
        return cls(x, w * recoil_density(x))

    def recoil_kernel(self, theta: np.ndarray) -> np.ndarray:
        """``chi(theta_i - theta_j) = sum_q w_q exp(-i u_q (theta_i - theta_j) / 2)``."""
        diff = theta[:, None] - theta[None, :]
        return np.einsum("q,qij->ij", self.weights, np.exp(-0.5j * self.nodes[:, None, None] * diff))


# -- generator -------------------------------------------------------------------

@dataclass
class Jump:
    """One Lindblad channel ``A (x) E`` with internal matrix ``A`` (rate included)
    and an angle-diagonal external factor.

    ``weight[i]`` is ``|E(theta_i)|^2`` and ``kernel[i, j]`` the recoil-averaged
    ``E(theta_i) E(theta_j)^*``.
    """

    op: np.ndarray
    weight: np.ndarray
    kernel: np.ndarray


@dataclass
class PairGenerator:
    """``d rho / dt = -i[H, rho] + sum D[L] rho`` for angle-diagonal operators."""

    hamiltonian: np.ndarray  # (N, d, d)
    jumps: list

    def __post_init__(self):
        self._decay = sum(
            (j.weight[:, None, None] * (j.op.conj().T @ j.op) for j in self.jumps),
            np.zeros_like(self.hamiltonian),
        )
        # H_nh = H - i/2 sum L^dag L, per angle
        self.nonhermitian = self.hamiltonian - 0.5j * self._decay

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        h = self.nonhermitian
        out = -1j * (h[:, None] @ rho - rho @ h.conj().transpose(0, 2, 1)[None, :])
        for j in self.jumps:
            out += j.kernel[:, :, None, None] * (j.op @ rho @ j.op.conj().T)
        return out

    def norm_bound(self) -> float:
        """Upper bound on the generator norm used by the stability check."""
        h = np.max(np.linalg.norm(self.hamiltonian, ord=2, axis=(1, 2)))
        d = sum(np.max(np.abs(j.kernel)) * np.linalg.norm(j.op, 2) ** 2 for j in self.jumps)
        return float(2 * h + 2 * d) or 1.0


def lindblad_step(rho: np.ndarray, generator: PairGenerator, dt: float) -> np.ndarray:
    """One classical RK4 step."""
    if generator.norm_bound() * dt >= STABILITY_LIMIT:
        raise ValueError(
            f"dt={dt:g} too large: |generator| dt = {generator.norm_bound() * dt:.3g} >= {STABILITY_LIMIT}"
        )
    return _rk4(rho, generator, dt)


def _rk4(rho, f, dt):
    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(rho, generator: PairGenerator, duration: float, dt: float | None = None, observe=None):
    """Fixed-step RK4 over ``duration``; ``dt`` defaults to the stability limit
    divided by the safety factor.  ``observe(t, rho)`` is called after each step."""
    bound = generator.norm_bound()
    if dt is None:
        dt = STABILITY_LIMIT / bound / SAFETY_FACTOR
    if bound * dt >= STABILITY_LIMIT:
        raise ValueError(f"dt={dt:g} too large: |generator| dt = {bound * dt:.3g} >= {STABILITY_LIMIT}")
    steps = max(1, math.ceil(duration / dt - 1e-9))
    h = duration / steps
    for s in range(steps):
        rho = _rk4(rho, generator, h)
        if observe is not None:
            observe((s + 1) * h, rho)
    return rho


# -- density matrices ----------------------------------------------------------

@dataclass
class DensityMatrix:
    """Pair-blocked density matrix in the angle representation."""

    blocks: np.ndarray  # (N, N, d, d)

    @classmethod
    def from_pure(cls, psi: np.ndarray) -> "DensityMatrix":
        """``psi[i, a]`` in the angle representation."""
        return cls(np.einsum("ia,jb->ijab", psi, psi.conj()))

    def matrix(self) -> np.ndarray:
        n, _, d, _ = self.blocks.shape
        return self.blocks.transpose(2, 0, 3, 1).reshape(d * n, d * n)

    def trace(self) -> complex:
        return np.einsum("iiaa->", self.blocks)

    def hermiticity_error(self) -> float:
        m = self.matrix()
        return float(np.max(np.abs(m - m.conj().T)))

    def min_eigenvalue(self) -> float:
        m = self.matrix()
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())

    def populations(self, fourier: np.ndarray) -> np.ndarray:
        """Momentum populations ``P[a, n]``."""
        # rho_n = F^dag rho_theta F, diagonal only
        tmp = np.einsum("in,ijab->njab", fourier.conj(), self.blocks)
        return np.einsum("njaa,jn->an", tmp, fourier).real


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


# -- the walk master equation ----------------------------------------------------

def internal_jump_matrix(d: DerivedParams, channel: int, normalization: str = "matched") -> np.ndarray:
    """Internal part of the effective jump into ``channel``, with its rate per kick.

    ``literal`` keeps the amplitudes ``Omega / (2 (Delta - i gamma / 2))``,
    so the jump rate is suppressed by ``(Omega / 2 Delta)^2``.  ``matched``
    rescales them to unit mean modulus and doubles the rate, so that an atom
    in one ground level with a uniform angle profile jumps into channel ``m``
    at ``gamma_m``, the rate the trajectory engine uses.
    """
    rate = (d.gamma1, d.gamma2)[channel - 1]
    c = np.array([d.c1, d.c2])
    if normalization == "matched":
        scale = math.sqrt(0.5 * np.sum(np.abs(c) ** 2))
        c = c / scale if scale > 0 else np.ones(2)
        rate = 2 * rate
    elif normalization != "literal":
        raise ValueError(f"unknown normalization {normalization!r}")
    a = np.zeros((2, 2), dtype=complex)
    a[channel - 1] = c
    return a, rate


def walk_generator(
    d: DerivedParams,
    tau_p: float,
    theta: np.ndarray,
    quadrature: QuadratureRule,
    normalization: str = "matched",
    keep_cross_terms: bool = True,
    delta: tuple[float, float] | None = None,
    omega: float | None = None,
) -> PairGenerator:
    """Generator of one kick pulse in units of the pulse length.

    The angle-independent part of the light shift is dropped (it is the
    compensated dynamical phase), leaving ``-xi1 k1 cos(theta)`` and
    ``+xi2 k2 cos(theta)`` on the diagonal.
    """
    k1, k2 = d.kicks
    cos = np.cos(theta)
    half = np.cos(theta / 2)
    h = np.zeros((theta.size, 2, 2), dtype=complex)
    h[:, 0, 0] = -k1 * cos
    h[:, 1, 1] = k2 * cos
    if keep_cross_terms and delta is not None and omega is not None and delta[0] != delta[1]:
        d1, d2 = delta
        g = d.gamma
        h12 = (d2 - d1) * omega**2 / (8 * (d1 + 0.5j * g) * (-d2 - 0.5j * g))
        h[:, 0, 1] = tau_p * h12 * half**2
        h[:, 1, 0] = np.conj(tau_p * h12) * half**2
    jumps = []
    kernel = np.outer(half, half) * quadrature.recoil_kernel(theta)
    for m in (1, 2):
        a, rate = internal_jump_matrix(d, m, normalization)
        if rate * tau_p == 0:
            continue
        jumps.append(Jump(math.sqrt(rate * tau_p) * a, half**2, kernel))
    return PairGenerator(h, jumps)


def three_level_generator(
    omega: float,
    energies: tuple[float, float],
    gammas: tuple[float, float],
    theta: np.ndarray,
    quadrature: QuadratureRule | None = None,
) -> PairGenerator:
    """Lambda system ``|1>, |2>, |e>`` with ground energies ``energies``,
    coupling ``Omega cos(theta/2) / 2`` on both arms and bare decays
    ``sqrt(gamma_m) |m><e|``.  With a quadrature rule every decay carries
    the photon recoil."""
    half = np.cos(theta / 2)
    h = np.zeros((theta.size, 3, 3), dtype=complex)
    h[:, 0, 0], h[:, 1, 1] = energies
    h[:, 2, 0] = h[:, 0, 2] = h[:, 2, 1] = h[:, 1, 2] = 0.5 * omega * half
    kernel = np.ones((theta.size, theta.size), dtype=complex)
    if quadrature is not None:
        kernel = quadrature.recoil_kernel(theta)
    jumps = []
    for m, g in enumerate(gammas):
        if g > 0:
            a = np.zeros((3, 3), dtype=complex)
            a[m, 2] = math.sqrt(g)
            jumps.append(Jump(a, np.ones(theta.size), kernel))
    return PairGenerator(h, jumps)


def _initial_ratchet(n_max: int, fourier: np.ndarray) -> np.ndarray:
    psi_n = np.zeros((2 * n_max + 2, 2), dtype=complex)
    psi_n[n_max, :] = 0.5
    psi_n[n_max + 1, :] = -0.5j
    return fourier @ psi_n


def _check_cost(n_max: int):
    if n_max > MAX_ORACLE_N_MAX:
        raise ValueError(f"dense oracle limited to n_max <= {MAX_ORACLE_N_MAX}, got {n_max}")


@dataclass
class OracleSetup:
    derived: DerivedParams
    generator: PairGenerator
    theta: np.ndarray
    fourier: np.ndarray
    coin: np.ndarray
    free: np.ndarray
    momenta: np.ndarray


def oracle_setup(config: RunConfig, n_max: int, quad_nodes: int = 16, normalization: str = "matched",
                 keep_cross_terms: bool = True) -> OracleSetup:
    _check_cost(n_max)
    params = config.physics()
    d = derive(params)
    theta, fourier = angle_grid(n_max)
    gen = walk_generator(d, params.tau_p, theta, QuadratureRule.gauss_legendre(quad_nodes), normalization,
                         keep_cross_terms, (params.delta1, params.delta2), params.omega)
    momenta = np.arange(-n_max, n_max + 2) + config.beta_center
    return OracleSetup(d, gen, theta, fourier, coin_matrix(config.coin_alpha, config.coin_chi),
                       free_phases(momenta, config.tau), momenta)


def evolve_walk_dense(
    config: RunConfig,
    steps: int | None = None,
    dt: float | None = None,
    n_max: int = 6,
    quad_nodes: int = 16,
    normalization: str = "matched",
    check_every_step: bool = True,
) -> list[MomentumDistribution]:
    """Master-equation walk: Lindblad-integrated kick pulse, then exact coin
    and free evolution, at the fixed quasimomentum ``config.beta_center``."""
    steps = config.steps if steps is None else steps
    s = oracle_setup(config, n_max, quad_nodes, normalization)
    psi = _initial_ratchet(n_max, s.fourier)
    rho = DensityMatrix.from_pure(psi).blocks
    # free evolution as an angle-space unitary
    free_theta = s.fourier @ (s.free[:, None] * s.fourier.conj().T)
    out = [_dense_distribution(rho, s, 0)]
    for t in range(1, steps + 1):
        rho = integrate(rho, s.generator, 1.0, dt)
        rho = s.coin @ rho @ s.coin.conj().T
        rho = np.einsum("ik,klab,jl->ijab", free_theta, rho, free_theta.conj())
        if check_every_step:
            _check_density(DensityMatrix(rho))
        out.append(_dense_distribution(rho, s, t))
    return out


def _check_density(rho: DensityMatrix, tol: float = 1e-9):
    from .walk import NumericalInvariantError

    if abs(rho.trace() - 1) > tol:
        raise NumericalInvariantError(f"trace drift {abs(rho.trace() - 1):.3g}")
    if rho.hermiticity_error() > tol:
        raise NumericalInvariantError(f"hermiticity drift {rho.hermiticity_error():.3g}")
    if rho.min_eigenvalue() < -1e-8:
        raise NumericalInvariantError(f"negative eigenvalue {rho.min_eigenvalue():.3g}")


def _dense_distribution(rho, s: OracleSetup, step: int) -> MomentumDistribution:
    pops = DensityMatrix(rho).populations(s.fourier)
    return bin_populations(s.momenta, pops, step)


# -- standard quantum-jump unraveling ----------------------------------------------

class _Propagator:
    """Exact no-jump propagation ``exp(-i H_nh t)`` per angle, cached by duration."""

    def __init__(self, h_nh: np.ndarray):
        self.h = h_nh
        self._cache = {}

    def __call__(self, t: float) -> np.ndarray:
        u = self._cache.get(t)
        if u is None:
            u = expm(-1j * self.h * t)
            if len(self._cache) < 8:
                self._cache[t] = u
        return u


def mcwf_standard(
    config: RunConfig,
    rng: np.random.Generator,
    trajectories: int | None = None,
    steps: int | None = None,
    n_max: int = 6,
    grid_steps: int = 200,
    normalization: str = "matched",
    keep_cross_terms: bool = True,
) -> list[MomentumDistribution]:
    """First-passage quantum-jump unraveling of the dense master equation.

    Trajectories evolve under ``H - i/2 sum L^dag L`` until the squared norm
    falls below a uniform random threshold; the jump time is located by
    bisection, the channel is chosen in proportion to ``<L_m^dag L_m>`` and
    the recoil ``u`` from its dipole distribution.
    """
    trajectories = config.trajectories if trajectories is None else trajectories
    steps = config.steps if steps is None else steps
    s = oracle_setup(config, n_max, normalization=normalization, keep_cross_terms=keep_cross_terms)
    gen = s.generator
    prop = _Propagator(gen.nonhermitian)
    dt = 1.0 / grid_steps
    u_dt = prop(dt)
    half = np.cos(s.theta / 2)
    jump_ops = [j.op for j in gen.jumps]
    free_theta = s.fourier @ (s.free[:, None] * s.fourier.conj().T)

    psi = np.repeat(_initial_ratchet(n_max, s.fourier)[None], trajectories, axis=0)  # (T, N, 2)
    threshold = rng.random(trajectories)
    acc = np.zeros((steps + 1, 2, s.momenta.size))
    acc[0] = _pure_populations(psi, s.fourier).sum(axis=0)

    def evolve(vec, u):
        return np.einsum("iab,ib->ia", u, vec)

    for t in range(1, steps + 1):
        for g in range(grid_steps):
            nxt = np.einsum("iab,tib->tia", u_dt, psi)
            norms = np.sum(np.abs(nxt) ** 2, axis=(1, 2))
            crossed = np.flatnonzero(norms <= threshold)
            for tr in crossed:
                nxt[tr], threshold[tr] = _jumps_within(
                    psi[tr], dt, threshold[tr], prop, evolve, jump_ops, half, s.theta, rng
                )
            psi = nxt
        psi = np.einsum("ab,tib->tia", s.coin, psi)
        psi = np.einsum("ij,tja->tia", free_theta, psi)
        acc[t] = _pure_populations(psi, s.fourier).sum(axis=0)
    mean = acc / trajectories
    return [bin_populations(s.momenta, mean[t], t) for t in range(steps + 1)]


def _jumps_within(vec, span, threshold, prop, evolve, jump_ops, half, theta, rng):
    """Propagate ``vec`` over ``span`` applying every jump whose threshold is crossed."""
    remaining = span
    while True:
        end = evolve(vec, prop(remaining))
        if np.sum(np.abs(end) ** 2) > threshold:
            return end, threshold
        lo, hi = 0.0, remaining
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if np.sum(np.abs(evolve(vec, expm_cached(prop, mid))) ** 2) > threshold:
                lo = mid
            else:
                hi = mid
        vec = evolve(vec, expm_cached(prop, hi))
        remaining -= hi
        rates = np.array([np.sum(np.abs(half[:, None] * (vec @ a.T)) ** 2) for a in jump_ops])
        m = rng.choice(len(jump_ops), p=rates / rates.sum())
        u = sample_recoil_u(rng)
        vec = (half * np.exp(-0.5j * u * theta))[:, None] * (vec @ jump_ops[m].T)
        vec = vec / math.sqrt(np.sum(np.abs(vec) ** 2))
        threshold = rng.random()


def expm_cached(prop, t):
    return expm(-1j * prop.h * t)


def _pure_populations(psi, fourier):
    # trajectories carry their decaying no-jump norm; normalise for the average
    amps = np.einsum("in,tia->tan", fourier.conj(), psi)
    pops = np.abs(amps) ** 2
    return pops / pops.sum(axis=(1, 2))[:, None, None]


def as_result(distributions: list[MomentumDistribution], config: RunConfig, **extra):
    """Wrap oracle distributions for the standard writers, flagged ``oracle=True``."""
    from .engine import EnsembleResult

    metadata = {
        "config": config.as_dict(),
        "derived": derive(config.physics()).as_dict(),
        "seed": config.seed,
        "oracle": True,
    }
    metadata.update(extra)
    return EnsembleResult(distributions, np.zeros(0, dtype=int), metadata)
