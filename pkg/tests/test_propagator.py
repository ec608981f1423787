import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lightcone import geometry as geo
from lightcone.errors import NumericalBreakdown
from lightcone.potentials import Constant, MovingBump, StaticBump, Zero
from lightcone.propagator import (
    EvolutionConfig, conjugated_evolve, dense_oracle_evolve, dense_propagator, evolve,
    free_step, kinetic_matrix, margin_violations, propagate, strang_step, support_radius,
)
from lightcone.spectral import WaveFunction, dispersion, l2_norm, make_grid, plane_wave

BUMP = StaticBump(0.5, (0.0,), 1.0)


def gaussian(grid, center=0.0, width=0.5, k0=0.0):
    x = grid.coords[0]
    return WaveFunction(grid, np.exp(-((x - center) ** 2) / (2 * width**2) + 1j * k0 * x)).normalized()


@pytest.fixture
def small():
    return make_grid(1, 64, 16.0)


def test_config_validation():
    for kw in (dict(dt=0.0, T=1.0), dict(dt=0.1, T=-1.0), dict(dt=0.1, T=1.0, m=0.0),
               dict(dt=1e-9, T=1.0, max_steps=100)):
        with pytest.raises(ValueError):
            EvolutionConfig(**kw)
    cfg = EvolutionConfig(dt=0.3, T=1.0)
    assert cfg.n_steps == 4 and cfg.step == pytest.approx(0.25)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.25, T=1.0, snapshot_times=(0.3,)).snapshot_steps()


def test_free_step_identity_and_group(small):
    wf = gaussian(small, k0=1.0)
    assert free_step(wf, 0.0) is wf
    back = free_step(free_step(wf, 0.37), -0.37)
    np.testing.assert_allclose(back.values, wf.values, atol=1e-12)


def test_free_step_on_mode(small):
    pw = plane_wave(small, (3,))
    xi = 2 * np.pi * 3 / 16.0
    out = free_step(pw, 0.8, m=2.0, c=0.5)
    np.testing.assert_allclose(out.values, np.exp(-0.8j * dispersion(xi * xi, 2.0, 0.5)) * pw.values,
                               atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_free_step_preserves_modulus(dt, seed):
    g = make_grid(1, 64, 16.0)
    rng = np.random.default_rng(seed)
    wf = WaveFunction(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    np.testing.assert_allclose(np.abs(np.fft.fft(free_step(wf, dt).values)),
                               np.abs(np.fft.fft(wf.values)), atol=1e-12)


def test_strang_reduces_to_free(small):
    wf = gaussian(small)
    np.testing.assert_allclose(strang_step(wf, 0.0, 0.1, Zero()).values,
                               free_step(wf, 0.1).values, atol=1e-13)


def test_strang_constant_is_global_phase(small):
    wf = gaussian(small)
    out = strang_step(wf, 0.0, 0.1, Constant(0.7))
    np.testing.assert_allclose(out.values, np.exp(-0.07j) * free_step(wf, 0.1).values, atol=1e-13)


def test_kinetic_matrix_hermitian(small):
    K = kinetic_matrix(small)
    np.testing.assert_allclose(K, K.conj().T, atol=1e-13)


def test_dense_oracle_free_equals_free_step(small):
    wf = gaussian(small)
    np.testing.assert_allclose(dense_oracle_evolve(wf, 1.0).values, free_step(wf, 1.0).values, atol=1e-10)


def test_dense_oracle_unitary_and_size_limit(small):
    U = dense_propagator(small, 1.0, MovingBump(0.5, (0.0,), 1.0, (0.5,)), substeps=20)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(64), atol=1e-10)
    with pytest.raises(ValueError):
        dense_oracle_evolve(gaussian(make_grid(1, 8192, 16.0)), 1.0)


def test_dense_oracle_self_convergence(small):
    wf = gaussian(small)
    V = MovingBump(0.5, (0.0,), 1.0, (0.5,))
    a = dense_oracle_evolve(wf, 1.0, V, substeps=1000).values
    b = dense_oracle_evolve(wf, 1.0, V, substeps=2000).values
    assert np.linalg.norm(a - b) * math.sqrt(small.cell_volume) < 1e-7


def _cfg(T, dt, **kw):
    kw.setdefault("margin_extra", 0.0)
    return EvolutionConfig(dt=dt, T=T, **kw)


def test_evolve_matches_dense_oracle(small):
    wf = gaussian(small)
    ref = dense_oracle_evolve(wf, 1.0, BUMP)
    out = evolve(wf, _cfg(1.0, 1e-3), BUMP).final
    assert l2_norm(out.with_values(out.values - ref.values)) < 1e-6


def test_strang_second_order(small):
    wf = gaussian(small)
    ref = dense_oracle_evolve(wf, 1.0, BUMP)
    errs = []
    for dt in (0.04, 0.02, 0.01, 0.005):
        out = evolve(wf, _cfg(1.0, dt), BUMP).final
        errs.append(l2_norm(out.with_values(out.values - ref.values)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios)


def test_moving_bump_matches_oracle(small):
    wf = gaussian(small)
    V = MovingBump(0.5, (0.0,), 1.0, (0.5,))
    ref = dense_oracle_evolve(wf, 1.0, V, substeps=2000)
    out = evolve(wf, _cfg(1.0, 1e-3), V).final
    assert l2_norm(out.with_values(out.values - ref.values)) < 1e-6


def test_evolve_snapshots_and_t0(small):
    wf = gaussian(small)
    traj = evolve(wf, _cfg(0.0, 0.1))
    assert traj.times == [0.0] and traj.final is wf
    traj = evolve(wf, _cfg(1.0, 0.1, snapshot_times=(0.5,), snapshot_every=5), BUMP)
    assert traj.times == pytest.approx([0.0, 0.5, 1.0])
    assert np.all(np.diff(traj.times) > 0)
    with pytest.raises(KeyError):
        traj.at(0.3)


def test_unitarity_over_many_steps():
    g = make_grid(1, 1024, 64.0)
    traj = evolve(gaussian(g), _cfg(10.0, 1e-3), BUMP)
    assert traj.max_drift <= 1e-10
    assert np.max(np.abs(np.diff(traj.norms))) <= 1e-12


def test_time_reversal_frozen_potential(small):
    wf = gaussian(small, k0=2.0)
    fwd = propagate(wf.values, small, BUMP, 1.0, 0.01)
    back = propagate(fwd, small, BUMP, 1.0, 0.01, adjoint=True)
    np.testing.assert_allclose(back, wf.values, atol=1e-8)


def test_adjoint_is_adjoint(small):
    rng = np.random.default_rng(3)
    u, v = (rng.standard_normal(64) + 1j * rng.standard_normal(64) for _ in range(2))
    V = MovingBump(0.5, (0.0,), 1.0, (0.5,))
    lhs = np.vdot(v, propagate(u, small, V, 0.5, 0.01))
    rhs = np.vdot(propagate(v, small, V, 0.5, 0.01, adjoint=True), u)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_drift_abort(small):
    with pytest.raises(NumericalBreakdown):
        evolve(gaussian(small), _cfg(1.0, 0.01, drift_abort=1e-300), BUMP)


def test_margin_policy(small):
    wf = gaussian(small, width=0.3)
    assert support_radius(wf)[0] < 3
    assert margin_violations(wf, EvolutionConfig(dt=0.1, T=1.0, margin_extra=0.0)) == []
    traj = evolve(wf, EvolutionConfig(dt=0.1, T=1.0, margin_dist=2.0))
    assert traj.warnings and "margin" in traj.warnings[0]


def test_conjugated_t0_and_inverse(small):
    g = make_grid(1, 512, 32.0)
    X, Y = geo.AxisBox([-1.0], [1.0]), geo.AxisBox([3.0], [8.0])
    wf = gaussian(g, width=1 / 6).with_values(gaussian(g, width=1 / 6).values * geo.indicator_mask(X, g))
    ell = geo.separating_functional(X, Y)
    _, r0 = conjugated_evolve(wf, ell, _cfg(0.0, 0.1))
    assert r0 == pytest.approx(1.0, abs=1e-12)
    _, rp = conjugated_evolve(wf, ell, _cfg(0.5, 1e-3))
    _, rm = conjugated_evolve(wf, ell.negated(), _cfg(0.5, 1e-3))
    assert rp <= math.exp(0.5) * 1.001 and rm <= math.exp(0.5) * 1.001
    assert rp * rm >= 1 - 1e-6


def test_conjugated_overflow_detected():
    g = make_grid(1, 1024, 2048.0)
    X, Y = geo.AxisBox([-1.0], [1.0]), geo.AxisBox([3.0], [8.0])
    wf = WaveFunction(g, geo.indicator_mask(X, g).astype(float)).normalized()
    with pytest.raises(NumericalBreakdown):
        conjugated_evolve(wf, geo.separating_functional(X, Y), _cfg(0.1, 0.01))
