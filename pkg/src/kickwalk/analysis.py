"""Observables of momentum distributions and classical-walk references."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .walk import MomentumDistribution, apply_ideal_kick, momentum_distribution, ratchet_state

WALK_CENTER = 0.5
"""Reflection centre of the symmetric walk started from the ratchet state."""


@dataclass
class WalkMetrics:
    mean: float
    variance: float
    peak_positions: tuple
    peak_heights: tuple
    peak_contrast: float
    l1_gaussian: float
    window: float

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "peak_positions": list(self.peak_positions),
            "peak_heights": list(self.peak_heights),
            "peak_contrast": self.peak_contrast,
            "l1_gaussian": self.l1_gaussian,
            "window": self.window,
        }


def _probabilities(dist) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dist, MomentumDistribution):
        return np.asarray(dist.n), np.asarray(dist.p_total)
    n, p = dist
    return np.asarray(n), np.asarray(p, dtype=float)


def moments(n, p) -> tuple[float, float]:
    mean = float(np.sum(n * p))
    var = float(np.sum((n - mean) ** 2 * p))
    return mean, max(var, 0.0)


def gaussian_bins(n, mean: float, var: float) -> np.ndarray:
    """Mass of ``N(mean, var)`` in the unit bins centred on ``n``.

    A zero variance gives the point-mass limit: the bin holding ``mean``
    (split evenly if ``mean`` sits on a bin edge).
    """
    n = np.asarray(n, dtype=float)
    if var <= 0:
        return np.where(np.abs(n - mean) < 0.5, 1.0, np.where(np.abs(n - mean) == 0.5, 0.5, 0.0))
    sd = np.sqrt(var)
    return norm.cdf((n + 0.5 - mean) / sd) - norm.cdf((n - 0.5 - mean) / sd)


def l1_to_gaussian(n, p) -> float:
    """L1 distance to the moment-matched Gaussian, counting its mass off the grid."""
    mean, var = moments(n, p)
    g = gaussian_bins(n, mean, var)
    return float(np.sum(np.abs(p - g)) + max(0.0, 1.0 - g.sum()))


def l1_distance(a, b) -> float:
    """L1 distance between two distributions on possibly different grids."""
    na, pa = _probabilities(a)
    nb, pb = _probabilities(b)
    lo = int(min(na.min(), nb.min()))
    hi = int(max(na.max(), nb.max()))
    full_a = np.zeros(hi - lo + 1)
    full_b = np.zeros(hi - lo + 1)
    full_a[na - lo] = pa
    full_b[nb - lo] = pb
    return float(np.abs(full_a - full_b).sum())


def contrast_window(steps: int, k: float) -> float:
    return max(2.0, steps * k / 4)


def peak_contrast(n, p, window: float, center: float = WALK_CENTER) -> float:
    """Mass at ``|n - center| >= window`` over the mass inside the window."""
    outer = np.abs(n - center) >= window
    inner_mass = p[~outer].sum()
    outer_mass = p[outer].sum()
    if inner_mass == 0:
        return np.inf
    return float(outer_mass / inner_mass)


def local_peaks(n, p, exclude: float = 1.0, count: int = 2, rel_height: float = 1e-3):
    """The ``count`` highest local maxima with ``|n| > exclude``, ignoring
    maxima below ``rel_height`` times the largest population."""
    padded = np.concatenate([[-np.inf], p, [-np.inf]])
    is_max = (p > padded[:-2]) & (p >= padded[2:]) & (p > rel_height * p.max())
    idx = np.flatnonzero(is_max & (np.abs(n) > exclude))
    idx = idx[np.argsort(p[idx])[::-1][:count]]
    idx = np.sort(idx)
    return tuple(int(n[i]) for i in idx), tuple(float(p[i]) for i in idx)


def metrics(dist, k: float = 1.45, steps: int | None = None, window: float | None = None) -> WalkMetrics:
    n, p = _probabilities(dist)
    if steps is None:
        steps = getattr(dist, "step", 0)
    w = contrast_window(steps, k) if window is None else window
    mean, var = moments(n, p)
    positions, heights = local_peaks(n, p)
    return WalkMetrics(mean, var, positions, heights, peak_contrast(n, p, w), l1_to_gaussian(n, p), w)


# -- classical reference -------------------------------------------------------

def single_kick_kernel(k: float, n_max: int = 32) -> tuple[np.ndarray, np.ndarray]:
    """Per-step displacement distribution of a classical walker kicked from the ratchet state.

    The channel-1 kick of the ratchet is read as a displacement from either of
    its two momentum classes with equal weight; channel 2 mirrors it.  The
    result is symmetric about zero.
    """
    state = ratchet_state(n_max, internal=(1.0, 0.0))
    apply_ideal_kick(state, k, k)
    d = momentum_distribution(state)
    p1 = d.p1
    # displacement d: from class 0 lands at d, from class 1 lands at d + 1
    disp = 0.5 * (p1 + np.concatenate([p1[1:], [0.0]]))
    right = disp
    left = disp[::-1]
    # grid d.n is symmetric (-n_max..n_max), so reversal maps d -> -d
    kernel = 0.5 * (right + left)
    return d.n.copy(), kernel / kernel.sum()


def classical_walk_reference(steps: int, step_kernel=None, k: float = 1.45, initial=None):
    """``steps``-fold convolution of the displacement kernel.

    Returns the distribution and the moment-matched Gaussian on the same grid.
    ``initial`` (``(n, p)``) is convolved in as the starting distribution.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    kn, kp = single_kick_kernel(k) if step_kernel is None else map(np.asarray, step_kernel)
    n0, p = kn, kp
    for _ in range(steps - 1):
        p = np.convolve(p, kp)
        n0 = np.arange(n0[0] + kn[0], n0[0] + kn[0] + p.size)
    if initial is not None:
        ni, pi = map(np.asarray, initial)
        p = np.convolve(p, pi)
        n0 = np.arange(n0[0] + ni[0], n0[0] + ni[0] + p.size)
    mean, var = moments(n0, p)
    dist = MomentumDistribution(n0, p / 2, p / 2, steps)
    return dist, gaussian_bins(n0, mean, var)


CLASSICALITY_FACTOR = 1.5
"""A walk counts as quantum (bimodal) while its peak contrast exceeds this
multiple of the classical reference contrast at the same step and kick."""


def classicality_threshold(steps: int, k: float = 1.45, factor: float = CLASSICALITY_FACTOR) -> float:
    """Peak-contrast threshold separating bimodal from classical-like walks."""
    ref, _ = classical_walk_reference(steps, k=k, initial=([0, 1], [0.5, 0.5]))
    return factor * metrics(ref, k=k, steps=steps).peak_contrast
