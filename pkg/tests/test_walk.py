import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from kickwalk.walk import (
    BALANCED_COIN,
    GridTooSmallError,
    apply_coin,
    apply_free_evolution,
    apply_ideal_kick,
    bin_populations,
    check_boundary,
    coin_matrix,
    fold_beta,
    momentum_distribution,
    ratchet_state,
    run_ideal,
    shift_ladder,
)


def test_ratchet_state_layout():
    s = ratchet_state(4)
    d = momentum_distribution(s)
    assert s.norm() == pytest.approx(1.0, abs=1e-15)
    assert dict(zip(d.n, d.p_total))[0] == pytest.approx(0.5)
    assert dict(zip(d.n, d.p_total))[1] == pytest.approx(0.5)
    # internal superposition (|1> + |2>)/sqrt2
    assert d.p1.sum() == pytest.approx(0.5)


def test_fold_beta_carry():
    assert fold_beta(1.25) == (0.25, 1)
    b, c = fold_beta(-0.25)
    assert (b, c) == (0.75, -1)
    b, c = fold_beta(-1e-18)
    assert 0 <= b < 1


@given(st.floats(-50, 50))
def test_fold_beta_property(beta):
    b, c = fold_beta(beta)
    assert 0 <= b < 1
    assert b + c == pytest.approx(beta, abs=1e-12)


def test_balanced_coin():
    assert np.allclose(BALANCED_COIN, np.array([[1, 1j], [1j, 1]]) / math.sqrt(2), atol=1e-15)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_coin_unitary(alpha, chi):
    c = coin_matrix(alpha, chi)
    assert np.allclose(c.conj().T @ c, np.eye(2), atol=1e-13)


def test_non_unitary_coin_rejected():
    with pytest.raises(ValueError):
        apply_coin(ratchet_state(4), np.eye(2) * 2)


def test_single_kick_bessel():
    # from a single momentum class the kick populations are J_n(k)^2
    s = ratchet_state(20, external=(1.0,), internal=(1.0, 0.0))
    apply_ideal_kick(s, 1.45, 1.45)
    d = momentum_distribution(s)
    assert np.allclose(d.p1, jv(d.n, 1.45) ** 2, atol=1e-14)


def test_kick_direction():
    # the two channels of the ratchet are driven in opposite directions
    s = ratchet_state(20)
    apply_ideal_kick(s, 1.45, 1.45)
    d = momentum_distribution(s)
    m1 = np.sum(d.n * d.p1) / d.p1.sum()
    m2 = np.sum(d.n * d.p2) / d.p2.sum()
    assert m1 < 0.5 < m2
    assert m1 - 0.5 == pytest.approx(0.5 - m2, abs=1e-12)


def test_free_evolution_trivial_at_resonance():
    s = ratchet_state(6)
    before = s.amps.copy()
    apply_free_evolution(s, 4 * math.pi)
    assert np.allclose(s.amps, before, atol=1e-15)


def test_norm_conserved_per_step():
    s = ratchet_state(40)
    from kickwalk.walk import walk_step_ideal

    for _ in range(15):
        walk_step_ideal(s, 1.45, 1.45)
        assert abs(s.norm() - 1) < 1e-12


def test_ideal_walk_symmetric_about_half():
    d = run_ideal(1.45, 1.45, 15)[-1]
    p = dict(zip(d.n, d.p_total))
    for n in range(-20, 21):
        assert p.get(n, 0.0) == pytest.approx(p.get(1 - n, 0.0), abs=1e-14)


def test_grid_overflow_detected():
    s = ratchet_state(4)
    with pytest.raises(GridTooSmallError):
        apply_ideal_kick(s, 5.0, 5.0)
        check_boundary(s)


def test_shift_ladder_loses_mass():
    a = np.zeros((2, 5), dtype=complex)
    a[0, -1] = 1
    with pytest.raises(GridTooSmallError):
        shift_ladder(a, 1)
    a[0, -1] = 0
    a[0, 2] = 1
    assert np.abs(shift_ladder(a, -2)[0, 0]) == 1


def test_bin_populations_half_integers_split():
    d = momentum_distribution(ratchet_state(4, 0.5))
    nz = {n: p for n, p in zip(d.n, d.p_total) if p}
    assert nz == pytest.approx({0: 0.25, 1: 0.5, 2: 0.25})
    d = momentum_distribution(ratchet_state(4, 0.2))
    nz = {n: p for n, p in zip(d.n, d.p_total) if p}
    assert nz == pytest.approx({0: 0.5, 1: 0.5})


def test_bin_populations_conserves_mass():
    rng = np.random.default_rng(3)
    momenta = np.sort(rng.uniform(-5, 5, 40))
    pops = rng.random((2, 40))
    d = bin_populations(momenta, pops)
    assert d.p_total.sum() == pytest.approx(pops.sum())


def test_frozen_ideal_regression():
    # ideal walk k=1.45, T=15, frozen from the first converged run
    from kickwalk.analysis import metrics

    m = metrics(run_ideal(1.45, 1.45, 15)[-1])
    assert m.variance == pytest.approx(56.135880397013054, rel=1e-10)
    assert m.peak_positions == (-6, 7)
    assert m.peak_heights[0] == pytest.approx(0.0828636493018428, rel=1e-10)
    assert m.peak_contrast == pytest.approx(2.8988716789992375, rel=1e-10)
