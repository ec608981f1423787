import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lightcone import geometry as geo
from lightcone.errors import ConvergenceError
from lightcone.spectral import make_grid


def test_halfspace_basics():
    with pytest.raises(ValueError, match="unit"):
        geo.HalfSpace([2.0, 0.0], 2.0)
    h = geo.HalfSpace([1.0, 0.0], 1.0)
    assert h.contains(np.array([[0.5, 3.0], [1.5, 0.0]])).tolist() == [True, False]
    np.testing.assert_allclose(h.project(np.array([3.0, 1.0])), [1.0, 1.0])


@pytest.mark.parametrize("bad", [
    lambda: geo.Ball([0.0], 0.0),
    lambda: geo.AxisBox([1.0], [0.0]),
    lambda: geo.HalfSpace([0.0, 0.0], 1.0),
    lambda: geo.HalfSpace([1.0], np.inf),
    lambda: geo.Intersection([geo.Ball([0.0], 1.0), geo.Ball([0.0, 0.0], 1.0)]),
])
def test_invalid_primitives(bad):
    with pytest.raises(ValueError):
        bad()


def test_ball_and_box_projection():
    b = geo.Ball([0.0, 0.0], 1.0)
    np.testing.assert_allclose(b.project(np.array([3.0, 4.0])), [0.6, 0.8])
    np.testing.assert_allclose(b.project(np.array([0.1, 0.2])), [0.1, 0.2])
    box = geo.AxisBox([0.0, 0.0], [1.0, 2.0])
    np.testing.assert_allclose(box.project(np.array([-1.0, 5.0])), [0.0, 2.0])


def test_intersection_projection():
    A = geo.Intersection([geo.Ball([0.0, 0.0], 1.0), geo.HalfSpace([1.0, 0.0], 0.5)])
    np.testing.assert_allclose(A.project(np.array([2.0, 2.0])), [0.5, math.sqrt(0.75)], atol=1e-8)
    assert A.contains(A.project(np.array([2.0, 2.0])), tol=1e-9)


def test_intersection_flattens():
    inner = geo.Intersection([geo.Ball([0.0], 2.0), geo.HalfSpace([1.0], 1.0)])
    outer = geo.Intersection([inner, geo.HalfSpace([-1.0], 0.0)])
    assert len(outer.parts) == 3


def test_empty_intersection_projection_fails():
    A = geo.Intersection([geo.Ball([0.0], 1.0), geo.Ball([5.0], 1.0)], max_iter=200)
    with pytest.raises(ConvergenceError):
        A.project(np.array([0.0]))


def test_distance_between_balls():
    d, a, b = geo.distance(geo.Ball([0.0, 0.0], 1.0), geo.Ball([4.0, 0.0], 1.0))
    assert d == pytest.approx(2.0, abs=1e-9)
    np.testing.assert_allclose(a, [1.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(b, [3.0, 0.0], atol=1e-9)


def test_distance_union_takes_minimum():
    X = geo.Region([geo.Ball([-5.0], 1.0), geo.Ball([0.0], 1.0)])
    assert geo.distance(X, geo.AxisBox([3.0], [8.0]))[0] == pytest.approx(2.0)
    assert not X.is_convex


def test_distance_to_halfspace():
    d = geo.distance(geo.Ball([0.0, 0.0], 1.0), geo.HalfSpace([-math.sqrt(0.5), -math.sqrt(0.5)], -3.0))[0]
    assert d == pytest.approx(2.0, abs=1e-8)


def test_separating_functional_simple():
    ell = geo.separating_functional(geo.Ball([0.0, 0.0], 1.0), geo.Ball([4.0, 0.0], 1.0))
    np.testing.assert_allclose(ell.normal, [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(ell.base, [2.0, 0.0], atol=1e-9)
    assert ell.negated()(np.array([3.0, 0.0])) == pytest.approx(1.0)


def test_separating_functional_needs_gap():
    with pytest.raises(ValueError):
        geo.separating_functional(geo.Ball([0.0], 1.0), geo.AxisBox([1.0], [2.0]))


def _primitive(draw, d, center):
    kind = draw(st.sampled_from(["ball", "box", "cap"]))
    r = draw(st.floats(0.2, 1.5))
    if kind == "ball":
        return geo.Ball(center, r)
    if kind == "box":
        half = np.array([draw(st.floats(0.1, 1.5)) for _ in range(d)])
        return geo.AxisBox(center - half, center + half)
    n = np.array([draw(st.floats(-1, 1)) for _ in range(d)])
    if np.linalg.norm(n) < 0.1:
        n = np.eye(d)[0]
    n = n / np.linalg.norm(n)
    return geo.Intersection([geo.Ball(center, r), geo.HalfSpace(n, float(n @ center) + 0.3 * r)])


@st.composite
def separated_pair(draw):
    d = draw(st.integers(1, 3))
    ca = np.array([draw(st.floats(-3, 3)) for _ in range(d)])
    direction = np.array([draw(st.floats(-1, 1)) for _ in range(d)])
    if np.linalg.norm(direction) < 0.1:
        direction = np.eye(d)[0]
    cb = ca + 5.5 * direction / np.linalg.norm(direction)
    return _primitive(draw, d, ca), _primitive(draw, d, cb)


@settings(max_examples=20, deadline=None)
@given(separated_pair(), st.integers(0, 2**32 - 1))
def test_separating_functional_property(pair, seed):
    A, B = pair
    dist, _, _ = geo.distance(A, B)
    assert dist > 0
    ell = geo.separating_functional(A, B)
    rng = np.random.default_rng(seed)
    pa = geo.sample_region(A, 2000, rng)
    pb = geo.sample_region(B, 2000, rng)
    assert np.min(ell(pa)) >= dist / 2 - 1e-8
    assert np.max(ell(pb)) <= -dist / 2 + 1e-8


def test_distance_symmetric_and_translation_invariant():
    A = geo.Ball([0.0, 1.0], 1.0)
    B = geo.AxisBox([3.0, -1.0], [4.0, 0.0])
    d1 = geo.distance(A, B)[0]
    assert geo.distance(B, A)[0] == pytest.approx(d1, abs=1e-9)
    v = np.array([2.5, -7.0])
    assert geo.distance(A.translate(v), B.translate(v))[0] == pytest.approx(d1, abs=1e-9)


def test_json_round_trip():
    obj = {"union": [{"ball": {"center": [0.0, 1.0], "radius": 2.0}},
                     {"intersection": [{"box": {"lo": [0.0, 0.0], "hi": [1.0, 1.0]}},
                                       {"halfspace": {"normal": [1.0, 0.0], "offset": 0.5}}]}]}
    R = geo.region_from_json(obj)
    R2 = geo.region_from_json(json.loads(json.dumps(R.to_json())))
    pts = np.random.default_rng(0).uniform(-3, 3, (500, 2))
    assert np.array_equal(R.contains(pts), R2.contains(pts))
    with pytest.raises(ValueError):
        geo.region_from_json({"blob": {}})


def test_indicator_mask_and_dimension_check():
    g = make_grid(1, 16, 16.0)
    m = geo.indicator_mask(geo.AxisBox([-1.0], [1.0]), g)
    assert m.sum() == 2
    with pytest.raises(ValueError):
        geo.indicator_mask(geo.Ball([0.0, 0.0], 1.0), g)


def test_distance_field():
    g = make_grid(1, 16, 16.0)
    D = geo.distance_field(geo.AxisBox([-1.0], [1.0]), g)
    np.testing.assert_allclose(D, np.maximum(np.abs(g.axes[0]) - 1, 0))


def test_sample_unbounded_needs_box():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        geo.sample_region(geo.HalfSpace([1.0], 0.0), 10, rng)
    pts = geo.sample_region(geo.HalfSpace([1.0], 0.0), 10, rng, bbox=([-5.0], [5.0]))
    assert pts.shape == (10, 1) and np.all(pts <= 0)


def test_cube_tiling_cases():
    cubes = geo.cube_tiling(geo.Ball([0.0], 0.6), 1.0)
    assert [float(z[0]) for z in cubes] == [-1.0, 0.0, 1.0]
    # strictly inside one cube
    assert [float(z[0]) for z in geo.cube_tiling(geo.AxisBox([0.1], [0.4]), 1.0)] == [0.0]
    # half-open cubes: the face at 0.5 belongs to the cube centered at 1
    assert [float(z[0]) for z in geo.cube_tiling(geo.AxisBox([0.0], [0.5]), 1.0)] == [0.0, 1.0]
    with pytest.raises(ValueError):
        geo.cube_tiling(geo.HalfSpace([1.0], 0.0), 1.0)


def test_cube_tiling_covers_samples():
    R = geo.Region([geo.Ball([0.0, 0.0], 1.3),
                    geo.Intersection([geo.Ball([3.0, 0.0], 1.0), geo.HalfSpace([0.0, 1.0], 0.2)])])
    r = 0.5
    centers = {tuple(np.round(z / r).astype(int)) for z in geo.cube_tiling(R, r)}
    pts = geo.sample_region(R, 3000, np.random.default_rng(1))
    idx = np.floor(pts / r + 0.5).astype(int)
    assert {tuple(k) for k in idx} <= centers


def test_tiling_constant_closed_form():
    assert geo.tiling_constant(3.0, 1.0, 1) == pytest.approx(2 * math.exp(-1) / (1 - math.exp(-1)),
                                                            rel=1e-10)
    assert geo.tiling_constant(3.0, 1.0, 1) == pytest.approx(1.1639534137386132, rel=1e-12)


def _brute(dist, r, d, M=120):
    ax = np.arange(-M, M + 1, dtype=float)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    nz = np.sqrt(sum(z**2 for z in grids))
    R = dist / r - math.sqrt(d)
    return math.exp(r * math.sqrt(d)) * float(np.sum(np.exp(-r * nz[nz >= R * (1 - 1e-14)])))


@pytest.mark.parametrize("dist,r,d", [(4.0, 0.5, 2), (6.0, 1.0, 2), (5.0, 1.0, 3)])
def test_tiling_constant_brute_force(dist, r, d):
    M = 120 if d < 3 else 60
    assert geo.tiling_constant(dist, r, d) == pytest.approx(_brute(dist, r, d, M), rel=1e-9)


def test_tiling_constant_domain():
    with pytest.raises(ValueError):
        geo.tiling_constant(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        geo.tiling_constant(3.0, -1.0, 1)
