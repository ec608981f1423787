import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lightcone.potentials import (
    Constant, MovingBump, Oscillating, StaticBump, Sum, Zero, admissibility_report, evaluate,
    klmn_estimate, klmn_norm, potential_from_json,
)
from lightcone.spectral import make_grid


def dense_klmn(V, grid):
    """Dense ``<grad>^-1/2 V <grad>^-1/2`` via the DFT matrix (1D)."""
    N = grid.size
    F = np.fft.fft(np.eye(N), axis=0)
    S = np.fft.ifft(((1 + grid.xi_sq) ** -0.25)[:, None] * F, axis=0)
    A = S @ np.diag(V) @ S
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (A + A.conj().T)))))


POTENTIALS = [
    Zero(),
    Constant(-0.3),
    StaticBump(0.5, (0.0,), 1.0),
    MovingBump(0.4, (1.0,), 0.7, (0.2,)),
    Oscillating(StaticBump(1.0, (0.0,), 2.0), 3.0),
    Sum((StaticBump(0.2, (1.0,), 1.0), Constant(0.1))),
]


@pytest.mark.parametrize("V", POTENTIALS, ids=lambda v: type(v).__name__)
def test_json_round_trip(V):
    g = make_grid(1, 64, 16.0)
    W = potential_from_json(json.loads(json.dumps(V.to_json())))
    for t in (0.0, 0.7):
        np.testing.assert_array_equal(evaluate(V, g, t), evaluate(W, g, t))


@pytest.mark.parametrize("bad", [
    lambda: StaticBump(1.0, (0.0,), 0.0),
    lambda: MovingBump(1.0, (0.0,), 1.0, (np.inf,)),
    lambda: Oscillating(MovingBump(1.0, (0.0,), 1.0, (1.0,)), 1.0),
    lambda: Constant(np.nan),
    lambda: potential_from_json({"quartic": {}}),
    lambda: potential_from_json({"zero": {}, "constant": {"value": 1}}),
])
def test_invalid_potentials(bad):
    with pytest.raises(ValueError):
        bad()


def test_center_dimension_checked():
    with pytest.raises(ValueError):
        StaticBump(1.0, (0.0, 0.0), 1.0)(make_grid(3, 8, 1.0))


def test_moving_bump_moves():
    g = make_grid(1, 256, 32.0)
    V = MovingBump(1.0, (0.0,), 1.0, (2.0,))
    assert g.axes[0][np.argmax(V(g, 1.5))] == pytest.approx(3.0, abs=g.h[0])


def test_klmn_constant():
    g = make_grid(1, 64, 2 * np.pi)
    for lam in (0.7, -0.3):
        assert klmn_norm(Constant(lam)(g), g) == pytest.approx(abs(lam), abs=1e-6)


def test_klmn_zero_shortcut():
    g = make_grid(1, 16, 1.0)
    res = klmn_estimate(np.zeros(16), g)
    assert res.value == 0.0 and res.converged


def test_klmn_bump_matches_dense():
    g = make_grid(1, 64, 16.0)
    V = StaticBump(0.5, (0.0,), 1.0)(g)
    ref = dense_klmn(V, g)
    assert ref == pytest.approx(0.305964841313468, rel=1e-10)
    assert klmn_norm(V, g) == pytest.approx(ref, rel=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 3.0), st.floats(-3, 3))
def test_klmn_bounds(amp, width, center):
    g = make_grid(1, 64, 16.0)
    V = StaticBump(amp, (center,), width)(g)
    est = klmn_norm(V, g, tol=1e-10)
    # lower bound on the dense value, never above sup |V|
    assert est <= dense_klmn(V, g) * (1 + 1e-9) + 1e-14
    assert est <= abs(amp) + 1e-12


def test_admissibility_static_bump_passes():
    g = make_grid(1, 256, 32.0)
    rep = admissibility_report(StaticBump(0.5, (0.0,), 1.0), g, 1.0)
    assert rep.status == "pass" and rep.klmn_sup < 1
    assert rep.dtv_sup == 0.0
    assert abs(rep.refinement_delta) < 1e-3
    assert json.loads(json.dumps(rep.to_json()))["passed"] is True


def test_admissibility_large_bump_fails():
    g = make_grid(1, 256, 32.0)
    rep = admissibility_report(StaticBump(5.0, (0.0,), 1.0), g, 1.0, refine_check=False)
    assert rep.status == "fail"
    bounded = admissibility_report(StaticBump(5.0, (0.0,), 1.0), g, 1.0, decomposition="bounded")
    assert bounded.conditions["form_bound"] == "vacuous"
    # the sup is sampled at the cell centers +-h/2
    peak = 5.0 * math.exp(-(g.h[0] / 2) ** 2)
    assert bounded.status == "pass" and bounded.linf_sup == pytest.approx(peak, rel=1e-12)


def test_admissibility_inconclusive_band():
    g = make_grid(1, 64, 8.0)
    assert admissibility_report(Constant(1.0), g, 1.0).status == "inconclusive"


def test_time_derivative_of_moving_bump():
    g = make_grid(1, 4096, 32.0)
    A, w, v = 0.5, 1.0, 0.3
    rep = admissibility_report(MovingBump(A, (0.0,), w, (v,)), g, 2.0, n_times=5, refine_check=False)
    exact = math.sqrt(2) * A * v * math.exp(-0.5) / w
    assert rep.dtv_sup == pytest.approx(exact, rel=1e-4)


def test_admissibility_arguments():
    g = make_grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        admissibility_report(Zero(), g, 1.0, decomposition="other")
    with pytest.raises(ValueError):
        admissibility_report(Zero(), g, -1.0)
