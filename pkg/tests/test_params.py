import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kickwalk.params import (
    TALBOT_TAU,
    PhysicsParams,
    derive,
    invert_for_targets,
    kick_strength,
)


def test_kick_strength_formula():
    assert kick_strength(2.0, 3.0, 4.0) == pytest.approx(4 * 3 / 32)


def test_fig3_targets_round_trip():
    p = invert_for_targets(1.45, 0.037)
    d = derive(p)
    assert d.k1 == pytest.approx(1.45, rel=1e-14)
    assert d.k2 == pytest.approx(1.45, rel=1e-14)
    assert d.p_se == pytest.approx(0.037, rel=1e-14)
    assert d.gamma1 == pytest.approx(d.gamma2, rel=1e-14)


def test_frozen_fig3_parameters():
    # computed once by hand from the two closed forms and frozen
    p = invert_for_targets(1.45, 0.037)
    assert p.omega == pytest.approx(3.0335325494603676e8, rel=1e-12)
    assert p.delta1 == pytest.approx(3.0145530145530143e9, rel=1e-12)


def test_zero_emission_inversion():
    p = invert_for_targets(1.45, 0.0)
    d = derive(p)
    assert d.p_se == 0
    assert d.k1 == pytest.approx(1.45, rel=1e-14)
    assert p.omega / p.delta1 < 0.3


@given(
    k=st.floats(0.1, 5.0),
    p_se=st.floats(1e-4, 0.5),
    w=st.floats(0.01, 0.99),
)
@settings(max_examples=100, deadline=None)
def test_inversion_round_trip_property(k, p_se, w):
    d = derive(invert_for_targets(k, p_se, ratio=(w, 1 - w)))
    assert d.k1 == pytest.approx(k, rel=1e-12)
    assert d.p_se == pytest.approx(p_se, rel=1e-12)
    assert d.gamma1 / d.gamma == pytest.approx(w, rel=1e-12)


@given(k1=st.floats(0.2, 3.0), k2=st.floats(0.2, 3.0), p_se=st.floats(1e-3, 0.3))
@settings(max_examples=50, deadline=None)
def test_biased_walk_inversion(k1, k2, p_se):
    d = derive(invert_for_targets((k1, k2), p_se, ratio=None))
    assert (d.k1, d.k2) == pytest.approx((k1, k2), rel=1e-12)
    assert d.p_se == pytest.approx(p_se, rel=1e-12)


def test_xi_and_phase():
    p = PhysicsParams(omega=1e9, delta1=2e9, delta2=3e9, tau_p=380e-9, tau_se=26e-9)
    d = derive(p)
    assert d.xi1 == pytest.approx(1 / (1 + d.gamma**2 / (4 * p.delta1**2)), rel=1e-15)
    expected = d.xi1 * d.k1 + d.xi2 * d.k2 + (p.delta1 + p.delta2) * p.period
    assert d.phi_dyn == pytest.approx(expected, rel=1e-15)
    assert p.period == pytest.approx(TALBOT_TAU / (8 * p.recoil_frequency))


def test_collapse_amplitudes():
    p = PhysicsParams(omega=1e9, delta1=2e9, delta2=2e9, tau_p=380e-9, tau_se=26e-9)
    d = derive(p)
    assert d.c1 == pytest.approx(p.omega / (2 * (p.delta1 - 0.5j * d.gamma)))
    # equal detunings: c2 = -conj(c1)
    assert d.c2 == pytest.approx(-np.conj(d.c1), rel=1e-15)


def test_regime_errors():
    with pytest.raises(ValueError):
        PhysicsParams(omega=1.0, delta1=0.0, delta2=1.0, tau_p=1.0, tau_se=0.01)
    with pytest.raises(ValueError):
        invert_for_targets(1.45, 1.0)
    with pytest.raises(ValueError):
        derive(PhysicsParams(omega=3e9, delta1=1e8, delta2=1e8, tau_p=380e-9, tau_se=26e-9))


def test_lifetime_warning():
    with pytest.warns(RuntimeWarning):
        PhysicsParams(omega=1e9, delta1=2e9, delta2=2e9, tau_p=100e-9, tau_se=26e-9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PhysicsParams(omega=1e9, delta1=2e9, delta2=2e9, tau_p=380e-9, tau_se=26e-9)


def test_as_dict_is_json_friendly():
    import json

    d = derive(invert_for_targets(1.45, 0.11))
    out = json.loads(json.dumps(d.as_dict()))
    assert out["c1"][0] == pytest.approx(d.c1.real)
    assert math.isclose(out["p_se"], 0.11)
