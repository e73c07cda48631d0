import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fppflow.geometry import (CylinderSpec, Everything, Minus, Neighborhood, OpenPolytopes, PolyhedralSet,
                              clip_surface_measure, cube, cube_cover, cylinder_lattice_sets, enlarge_domain, faces,
                              square_cover, tiles_disjoint, transverse)
from fppflow.lattice import ContinuousDomain, discretize
from fppflow.polytope import ConvexPatch, ConvexPolytope


def halfplane(normal, offset, dom):
    n = np.asarray(normal, float)
    return PolyhedralSet.halfspace(n / np.linalg.norm(n), offset, dom.bbox())


def test_cube_faces():
    F = faces(PolyhedralSet([ConvexPolytope.box([0, 0, 0], [1, 1, 1])]))
    assert len(F) == 6
    normals = sorted(tuple(np.round(f.normal, 9)) for f in F)
    want = sorted(tuple(s * np.eye(3)[i]) for i in range(3) for s in (-1.0, 1.0))
    assert np.allclose(normals, want)
    assert all(f.area == pytest.approx(1.0) for f in F)


def test_slab_faces():
    P = PolyhedralSet([ConvexPolytope.box([0, 0, 0], [2, 1, 0.5])])
    areas = sorted(f.area for f in faces(P))
    assert areas == pytest.approx(sorted([0.5, 0.5, 1.0, 1.0, 2.0, 2.0]))


def test_union_of_adjacent_squares_outer_boundary():
    U = PolyhedralSet([ConvexPolytope.box([0, 0], [1, 1]), ConvexPolytope.box([1, 0], [2, 1])])
    assert sum(f.area for f in faces(U)) == pytest.approx(6.0)


def test_transverse_orthogonal():
    a = ConvexPatch(np.array([[0.0, -1], [0, 1]]))
    b = ConvexPatch(np.array([[-1.0, 0], [1, 0]]))
    assert transverse([a], [b]).ok


def test_not_transverse_when_overlapping_parallel():
    a = ConvexPatch(np.array([[-1.0, 0], [0.5, 0]]))
    b = ConvexPatch(np.array([[-1.0, 0], [1, 0]]))
    r = transverse([a], [b])
    assert not r.ok and r.witness is not None


def test_transverse_tilted_cube(square):
    R = np.array([[1.0, -1], [1, 1]]) / math.sqrt(2)
    r = transverse(PolyhedralSet([cube(np.array([0.0, 0.5]), R, 0.3)]), square)
    assert r.ok
    assert r.min_angle == pytest.approx(math.pi / 4, abs=1e-9)


def test_clip_halfplane_in_square(square):
    assert clip_surface_measure(halfplane([1, 0], 0.5, square), OpenPolytopes(square.pieces)) == pytest.approx(1.0)


def test_clip_disjoint_region(square):
    far = OpenPolytopes([ConvexPolytope.box([3, 3], [4, 4])])
    assert clip_surface_measure(halfplane([1, 0], 0.5, square), far) == 0.0


def test_clip_shrinking_collar(square):
    # the line x1 = 1/2 leaves the square through two sides, so the collar holds two pieces of length delta
    P = halfplane([1, 0], 0.5, square)
    vals = [clip_surface_measure(P, Minus(Neighborhood(square.pieces, d), OpenPolytopes(square.pieces)))
            for d in (0.2, 0.1, 0.05)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals == pytest.approx([0.4, 0.2, 0.1], rel=1e-3)


def test_clip_everything_3d():
    dom = ContinuousDomain.box([0, 0, 0], [1, 1, 1])
    P = PolyhedralSet.halfspace(np.array([1.0, 0, 0]), 0.25, dom.bbox())
    assert clip_surface_measure(P, OpenPolytopes(dom.pieces)) == pytest.approx(1.0)
    assert clip_surface_measure(P, Everything()) > 1.0


def test_cube_cover_left_side(square):
    r = 0.1
    K = cube_cover(square, r)
    assert 1 <= len(K.polytopes) <= 11
    ys = np.linspace(0.0, 1.0, 101)
    pts = np.column_stack([np.zeros_like(ys), ys])
    inside = np.zeros(len(pts), bool)
    for P in K.polytopes:
        inside |= P.contains(pts, strict=True)
    assert inside.all()
    assert transverse(K, square).ok
    # every cube stays within 2 d r of the source side, hence away from the sink
    right = np.column_stack([np.ones_like(ys), ys])
    assert min(P.distance(right).min() for P in K.polytopes) >= 1.0 - 2 * 2 * r


def test_cube_cover_empty(square):
    assert cube_cover(square, 0.1, patches=[]).polytopes == []


@pytest.mark.parametrize("delta0", [0.5, 1.0, 2.0])
def test_enlarged_domain_contains_lattice(square, delta0):
    P = halfplane([1, 0], 0.5, square)
    E = enlarge_domain(square, P, delta0)
    assert E.transverse.ok
    n0 = E.min_mesh()
    assert n0 <= math.ceil(2 * 2 / E.delta1)
    for n in (n0, n0 + 1, 2 * n0):
        lat = discretize(square, n)
        assert E.contains(lat.points).all()


def test_enlarged_domain_margin(square):
    E = enlarge_domain(square, halfplane([1, 0], 0.5, square), 1.0)
    t = np.linspace(0.01, 0.99, 50)
    for p in (np.column_stack([t, np.zeros_like(t)]), np.column_stack([t, np.ones_like(t)]),
              np.column_stack([np.zeros_like(t), t]), np.column_stack([np.ones_like(t), t])):
        for shift in ([0.01, 0], [-0.01, 0], [0, 0.01], [0, -0.01]):
            assert E.contains(p + shift).all()


def test_transverse_to_enlarged_boundary(square):
    P = halfplane([1, 0.3], 0.5, square)
    E = enlarge_domain(square, P, 1.0)
    assert transverse(P, E.as_set()).ok


def test_square_cover_unit_segment(square):
    P = PolyhedralSet([ConvexPolytope.box([0, -1], [1, 0.5])])
    sc = square_cover(P, OpenPolytopes(square.pieces), 0.2, 0.2)
    assert len(sc.tiles) == 4 and sc.side == pytest.approx(0.2)
    xs = sorted(t.center[0] for t in sc.tiles)
    assert xs == pytest.approx([0.2, 0.4, 0.6, 0.8])
    assert sc.uncovered == pytest.approx(0.2)


def test_square_cover_budget_swallows_face(square):
    P = halfplane([1, 0], 0.5, square)
    sc = square_cover(P, OpenPolytopes(square.pieces), 0.2, 2.0)
    assert sc.tiles == [] and sc.uncovered == pytest.approx(1.0)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.3, 0.7), st.floats(0.05, 0.3), st.floats(0.02, 0.2))
def test_square_cover_budget(angle, c, l, eps):
    square = ContinuousDomain.unit_square()
    normal = np.array([math.cos(angle), math.sin(angle)])
    P = PolyhedralSet.halfspace(normal, c * abs(normal).sum() * 0.5 + 0.0 * c, square.bbox())
    region = OpenPolytopes(square.pieces)
    sc = square_cover(P, region, l, eps)
    H = clip_surface_measure(P, region)
    assert sc.uncovered <= eps + 1e-9
    assert len(sc.tiles) * sc.side == pytest.approx(H - sc.uncovered, abs=1e-9)
    assert sc.side <= l + 1e-12
    assert tiles_disjoint(sc.tiles)


def test_cylinder_sets_counts():
    c = CylinderSpec.square(np.array([0.5, 0.5]), np.array([1.0, 0]), 1.0, 0.5)
    s = cylinder_lattice_sets(c, 4)
    assert s.top.sum() == 5 and s.bottom.sum() == 5


def test_thin_cylinder_empty_without_error():
    c = CylinderSpec.square(np.array([0.6, 0.5]), np.array([1.0, 0]), 1.0, 0.05)
    s = cylinder_lattice_sets(c, 4)
    assert s.top.sum() == 0 and s.bottom.sum() == 0


@given(st.floats(0.0, math.pi), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.3, 1.5),
       st.integers(2, 10), st.floats(1.0, 4.0))
def test_top_bottom_disjoint(angle, x, y, side, n, hmul):
    v = np.array([math.cos(angle), math.sin(angle)])
    c = CylinderSpec.square(np.array([x, y]), v, side, hmul / n)
    s = cylinder_lattice_sets(c, n)
    assert not (s.top & s.bottom).any()


def test_cylinder_sets_3d():
    c = CylinderSpec.square(np.array([0.5, 0.5, 0.5]), np.array([0.0, 0, 1]), 1.0, 0.5)
    s = cylinder_lattice_sets(c, 4)
    assert s.top.sum() == 25 and s.bottom.sum() == 25
