import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull
from shapely.geometry import MultiPoint, Point

from fppflow.polytope import ConvexPolytope, convex_hull_distance
from fppflow.regions import Convex, DistanceBand

coords = st.floats(-2.0, 2.0)
point = st.tuples(coords, coords)


def random_poly(seed, m=7):
    rng = np.random.default_rng(seed)
    return ConvexPolytope.from_vertices(rng.normal(size=(m, 2)))


@given(st.integers(0, 10 ** 6))
def test_volume_matches_qhull(seed):
    P = random_poly(seed)
    assert P.volume() == pytest.approx(ConvexHull(P.vertices).volume, rel=1e-9)


@given(st.integers(0, 10 ** 6), point)
def test_distance_matches_shapely(seed, x):
    P = random_poly(seed)
    hull = MultiPoint([tuple(v) for v in P.vertices]).convex_hull
    assert P.distance(np.array(x)[None])[0] == pytest.approx(hull.distance(Point(x)), abs=1e-9)


@given(st.integers(0, 10 ** 6), point)
def test_contains_agrees_with_distance(seed, x):
    P = random_poly(seed)
    x = np.array(x)[None]
    d = P.distance(x)[0]
    if d > 1e-7:
        assert not P.contains(x)[0]
    elif P.contains(x, strict=True)[0]:
        assert d == 0.0


def test_box_halfspaces():
    P = ConvexPolytope.box([0, 0, 0], [1, 2, 3])
    assert P.volume() == pytest.approx(6.0)
    assert P.contains(np.array([[0.5, 1, 1]]), strict=True)[0]
    assert not P.contains(np.array([[1.0, 1, 1]]), strict=True)[0]
    assert P.contains(np.array([[1.0, 1, 1]]))[0]


def test_hull_distance_squares():
    a = ConvexPolytope.box([0, 0], [1, 1]).vertices
    b = ConvexPolytope.box([2, 3], [3, 4]).vertices
    assert convex_hull_distance(a, b) == pytest.approx(np.hypot(1, 2))


@given(st.floats(0.05, 0.9), st.floats(0.05, 0.5))
def test_band_segments_horizontal(lo, w):
    # for the half-plane x1 < 0 the band is lo <= x1 < lo + w
    P = ConvexPolytope.box([-5, -5], [0, 5])
    band = DistanceBand([P], lo, lo + w)
    xs = np.linspace(-0.2, 1.5, 40)
    P0 = np.column_stack([xs, np.zeros_like(xs)])
    P1 = P0 + [0.03, 0.0]
    got = band.segment_inside(P0, P1)
    want = (P0[:, 0] >= lo - 1e-12) & (P1[:, 0] <= lo + w + 1e-12)
    assert np.array_equal(got, want)


def test_convex_segment_inside_open():
    C = Convex.halfspace([1, 0], 0.5)
    P0 = np.array([[0.0, 0], [0.25, 0], [0.4, 0]])
    P1 = np.array([[0.5, 0], [0.5, 0], [0.6, 0]])
    assert list(C.segment_inside(P0, P1)) == [True, True, False]
