import math

import numpy as np
import pytest

from kickwalk.analysis import l1_distance
from kickwalk.engine import RunConfig
from kickwalk.oracle import (
    DensityMatrix,
    Jump,
    PairGenerator,
    QuadratureRule,
    angle_grid,
    evolve_walk_dense,
    integrate,
    lindblad_step,
    mcwf_standard,
    three_level_generator,
)
from kickwalk.walk import run_ideal


def test_quadrature_rule_moments():
    q = QuadratureRule.gauss_legendre(16)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.sum(q.weights * q.nodes**2) == pytest.approx(0.4, abs=1e-12)
    assert np.sum(q.weights * q.nodes) == pytest.approx(0.0, abs=1e-15)


def test_angle_grid_is_unitary():
    _, f = angle_grid(4)
    assert np.allclose(f.conj().T @ f, np.eye(f.shape[0]), atol=1e-13)


def _two_level(h, jumps, n=1):
    theta = np.zeros(n)
    return PairGenerator(np.broadcast_to(h, (n, 2, 2)).astype(complex), jumps), theta


def test_populations_constant_without_dissipation():
    gen, _ = _two_level(np.diag([0.3, -0.7]), [])
    rho = DensityMatrix.from_pure(np.array([[0.6, 0.8j]])).blocks
    out = integrate(rho, gen, 10.0, 0.01)
    assert np.allclose(np.diag(out[0, 0]).real, [0.36, 0.64], atol=1e-12)


def test_pure_dephasing_decay():
    gamma = 0.8
    a = np.diag([math.sqrt(gamma), 0.0]).astype(complex)
    gen, _ = _two_level(np.zeros((2, 2)), [Jump(a, np.ones(1), np.ones((1, 1)))])
    psi = np.array([[1.0, 1.0]]) / math.sqrt(2)
    rho = DensityMatrix.from_pure(psi).blocks
    t = 2.0
    out = integrate(rho, gen, t, 0.01)
    assert out[0, 0, 0, 1].real == pytest.approx(0.5 * math.exp(-gamma * t / 2), abs=1e-6)


def test_stability_check():
    gen, _ = _two_level(np.diag([100.0, -100.0]), [])
    rho = DensityMatrix.from_pure(np.array([[1.0, 0.0]])).blocks
    with pytest.raises(ValueError):
        lindblad_step(rho, gen, 0.01)


def test_density_invariants_on_three_level_run():
    theta, f = angle_grid(2)
    gen = three_level_generator(0.1, (-1.0, 1.0), (0.01, 0.01), theta, QuadratureRule.gauss_legendre())
    psi = np.zeros((theta.size, 3), dtype=complex)
    psi[:, 0] = 1 / math.sqrt(theta.size)
    rho = DensityMatrix(integrate(DensityMatrix.from_pure(psi).blocks, gen, 20.0, 0.02))
    assert abs(rho.trace() - 1) < 1e-9
    assert rho.hermiticity_error() < 1e-9
    assert rho.min_eigenvalue() > -1e-8


def test_dense_walk_without_se_matches_ideal():
    dense = evolve_walk_dense(RunConfig(p_se=0.0, steps=2), n_max=8)
    ideal = run_ideal(1.45, 1.45, 2)
    for a, b in zip(dense, ideal):
        diff = a.on_grid(-20, 20).p_total - b.on_grid(-20, 20).p_total
        assert np.max(np.abs(diff)) < 1e-8


def test_dense_walk_quadrature_converged():
    c = RunConfig(p_se=0.11, steps=2)
    a = evolve_walk_dense(c, n_max=6, quad_nodes=16)[-1]
    b = evolve_walk_dense(c, n_max=6, quad_nodes=32)[-1]
    assert np.max(np.abs(a.p_total - b.p_total)) < 1e-8


def test_dense_walk_cost_guard():
    with pytest.raises(ValueError):
        evolve_walk_dense(RunConfig(p_se=0.0, steps=1), n_max=9)


def test_dense_walk_with_se_is_normalised():
    out = evolve_walk_dense(RunConfig(p_se=0.11, steps=2), n_max=6)
    for d in out:
        assert d.p_total.sum() == pytest.approx(1.0, abs=1e-9)


def test_mcwf_without_jumps_is_deterministic():
    c = RunConfig(p_se=0.0, steps=2)
    a = mcwf_standard(c, np.random.default_rng(0), trajectories=3, n_max=6)
    b = evolve_walk_dense(c, n_max=6)
    assert np.max(np.abs(a[-1].p_total - b[-1].p_total)) < 1e-10


def test_mcwf_converges_to_dense():
    c = RunConfig(p_se=0.11, steps=2)
    dense = evolve_walk_dense(c, n_max=6)
    mc = mcwf_standard(c, np.random.default_rng(1), trajectories=2000, n_max=6)
    p = dense[-1].p_total
    bound = 3 * math.sqrt(np.sum(p * (1 - p))) / math.sqrt(2000)
    assert l1_distance(mc[-1], dense[-1]) < bound


@pytest.mark.slow
def test_engine_fixed_rate_vs_standard_unraveling():
    # Finding check: the production engine's fixed-rate jumps with beta-shifting
    # recoil against the norm-based unraveling of the periodic master equation.
    from kickwalk.engine import run_ensemble

    c = RunConfig(p_se=0.037, steps=2, trajectories=10_000)
    mc = mcwf_standard(c, np.random.default_rng(3), n_max=6)
    engine = run_ensemble(c).final
    p = mc[-1].p_total
    bound = 3 * math.sqrt(np.sum(p * (1 - p))) / math.sqrt(10_000)
    assert l1_distance(engine, mc[-1]) < bound
