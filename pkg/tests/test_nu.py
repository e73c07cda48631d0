import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fppflow.capacity import CapacityLaw
from fppflow.geometry import PolyhedralSet
from fppflow.nu import (NuTable, capacity_integral, compass_directions, constant_law_nu, default_witness,
                        estimate_nu, nu_homogeneous, nu_upper_bound, nu_zero_check, phi_tilde, triangle_from_normals,
                        triangle_normals, weak_triangle_check)

E1 = np.array([1.0, 0.0])


def l1_table(dirs, dim=2, scale=1.0):
    return NuTable.analytic(lambda v: scale * constant_law_nu(v), dirs, dim)


def vertical_cut(dom, c):
    return PolyhedralSet.halfspace(E1, c, dom.bbox())


def test_constant_law_exact_at_every_mesh():
    est = estimate_nu(E1, CapacityLaw.constant(1.0), [4, 8, 16], 2, 0)
    assert est.means == [1.0, 1.0, 1.0]
    assert est.nu_hat == 1.0


def test_constant_law_3d():
    est = estimate_nu(np.array([0.0, 0, 1]), CapacityLaw.constant(1.0), [4], 2, 0)
    assert est.nu_hat == 1.0


def test_constant_law_diagonal_approaches_l1_norm():
    v = np.array([1.0, 1.0]) / math.sqrt(2)
    est = estimate_nu(v, CapacityLaw.constant(1.0), [8, 16], 2, 0)
    assert est.means[0] <= est.means[1] <= math.sqrt(2) + 1e-9
    assert est.means[1] > 1.2


def test_subcritical_bernoulli_small():
    est = estimate_nu(E1, CapacityLaw.bernoulli(0.4), [16], 100, 1)
    assert est.nu_hat + 3 * est.se <= 0.15


def test_reflection_symmetry():
    law = CapacityLaw.exponential(1.0)
    a = estimate_nu(E1, law, [8], 60, 2)
    b = estimate_nu(-E1, law, [8], 60, 3)
    assert abs(a.nu_hat - b.nu_hat) <= 3 * math.hypot(a.se, b.se)


def test_estimate_deterministic():
    law = CapacityLaw.exponential(1.0)
    a = estimate_nu(E1, law, [4, 8], 10, 5)
    b = estimate_nu(E1, law, [4, 8], 10, 5, workers=2)
    assert a.means == b.means and a.ses == b.ses


def test_zero_check_bernoulli_subcritical():
    assert nu_zero_check(CapacityLaw.bernoulli(0.4), 2)


def test_zero_check_exponential():
    assert not nu_zero_check(CapacityLaw.exponential(1.0), 2)


@pytest.mark.parametrize("d", [2, 3])
def test_zero_check_constant_zero(d):
    assert nu_zero_check(CapacityLaw.constant(0.0), d)


def test_homogeneous_zero_vector():
    assert nu_homogeneous(l1_table([E1]), np.zeros(2)) == 0.0


def test_homogeneous_scaling():
    t = l1_table([E1])
    assert nu_homogeneous(t, 2 * E1) == 2.0


@given(st.floats(0.01, 100.0), st.sampled_from(list(range(8))))
def test_homogeneous_exact_on_table_directions(c, i):
    dirs = compass_directions(8)
    t = l1_table(dirs)
    assert nu_homogeneous(t, c * dirs[i]) == pytest.approx(c * t.get(dirs[i]), rel=1e-12)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.1, 10.0))
def test_upper_bound_dominates_l1(angle, r):
    # with an exact |.|_1 table on the compass directions the convex bound is exact for the l1 norm
    t = l1_table(compass_directions(8))
    w = r * np.array([math.cos(angle), math.sin(angle)])
    assert nu_upper_bound(t, w) >= np.abs(w).sum() - 1e-9
    assert nu_upper_bound(t, w) == pytest.approx(np.abs(w).sum(), rel=1e-7)


def test_table_roundtrip(tmp_path):
    t = l1_table(compass_directions(8))
    t.save(tmp_path / "t.json")
    u = NuTable.load(tmp_path / "t.json")
    for v in compass_directions(8):
        assert u.get(v) == t.get(v)
    assert NuTable.from_dict(t.to_dict()).to_dict() == t.to_dict()


def test_table_missing_direction_raises():
    t = l1_table([E1])
    with pytest.raises(KeyError):
        t.get(np.array([0.0, 1.0]))
    assert len(t.missing([E1, np.array([0.0, 1.0])])) == 1


def test_equilateral_triangle_constant_law():
    A, B, C = np.array([0.0, 0]), np.array([1.0, 0]), np.array([0.5, math.sqrt(3) / 2])
    normals = triangle_normals(A, B, C)
    t = l1_table(normals)
    assert weak_triangle_check(A, B, C, t).ok


def test_degenerate_equal_normals():
    # with nu(v_C) = nu(v_A) the check is the plain triangle inequality scaled by one constant
    A, B, C = np.array([0.0, 0]), np.array([2.0, 0]), np.array([0.3, 1.1])
    vA, vB, vC = triangle_normals(A, B, C)
    t = NuTable(2)
    for v in (vA, vB, vC):
        t.add(v, 1.0)
    assert weak_triangle_check(A, B, C, t).ok


@given(st.floats(0.0, 2 * math.pi), st.floats(0.0, 2 * math.pi), st.floats(0.0, 2 * math.pi))
def test_triangle_inequality_for_norm_tables(a, b, c):
    nA, nB, nC = (np.array([math.cos(x), math.sin(x)]) for x in (a, b, c))
    # exterior normals of a nondegenerate triangle positively span the plane
    M = np.column_stack([nA, nB, nC])
    assume(abs(np.linalg.det(M[:, :2])) > 0.05 and abs(np.linalg.det(M[:, 1:])) > 0.05
           and abs(np.linalg.det(M[:, [0, 2]])) > 0.05)
    try:
        A, B, C = triangle_from_normals(nA, nB, nC)
    except ValueError:
        return
    t = l1_table(triangle_normals(A, B, C))
    assert weak_triangle_check(A, B, C, t, k_se=0).ok


def test_triangle_from_normals_roundtrip():
    A, B, C = np.array([0.0, 0]), np.array([1.0, 0]), np.array([0.2, 0.7])
    nA, nB, nC = triangle_normals(A, B, C)
    A2, B2, C2 = triangle_from_normals(nA, nB, nC)
    assert np.allclose(triangle_normals(A2, B2, C2), (nA, nB, nC))


def test_capacity_integral_half_plane(square):
    assert capacity_integral(vertical_cut(square, 0.5), square, l1_table([E1, -E1])) == pytest.approx(1.0)


def test_capacity_integral_empty(square):
    P = vertical_cut(square, 3.0)
    assert capacity_integral(P, square, l1_table([E1, -E1])) == 0.0


def test_capacity_integral_linear_in_table(square):
    P = PolyhedralSet.halfspace(np.array([1.0, 0.4]) / math.hypot(1, 0.4), 0.5, square.bbox())
    dirs = list(P.normals())
    a = capacity_integral(P, square, l1_table(dirs))
    b = capacity_integral(P, square, l1_table(dirs).scaled(2.0))
    assert b == pytest.approx(2 * a)


def test_missing_direction_in_integral(square):
    P = PolyhedralSet.halfspace(np.array([1.0, 0.4]) / math.hypot(1, 0.4), 0.5, square.bbox())
    with pytest.raises(KeyError):
        capacity_integral(P, square, l1_table([E1]))


def test_phi_tilde_vertical_family(square):
    fam = [vertical_cut(square, c) for c in (0.25, 0.5, 0.75)]
    res = phi_tilde(square, fam, l1_table([E1, -E1]))
    assert res.value == pytest.approx(1.0)
    assert all(c.capacity == pytest.approx(1.0) for c in res.candidates)


def test_phi_tilde_rejects_nontransverse(square):
    fam = [vertical_cut(square, 0.5), vertical_cut(square, 1.0)]
    res = phi_tilde(square, fam, l1_table([E1, -E1]))
    bad = res.candidates[1]
    assert not bad.admissible and bad.witness is not None and bad.reason
    assert res.best == 0


@given(st.lists(st.floats(0.1, 0.9), min_size=1, max_size=4), st.floats(0.1, 0.9))
def test_phi_tilde_monotone_under_additions(cs, extra):
    from fppflow.lattice import ContinuousDomain
    square = ContinuousDomain.unit_square()
    t = l1_table([E1, -E1, np.array([0.0, 1.0]), np.array([0.0, -1.0])])
    fam = [vertical_cut(square, c) for c in cs]
    a = phi_tilde(square, fam, t).value
    b = phi_tilde(square, fam + [vertical_cut(square, extra)], t).value
    assert b <= a + 1e-12


def test_default_witness_admissible(square):
    W = default_witness(square)
    t = l1_table(list(W.normals()))
    res = phi_tilde(square, [W], t)
    assert res.candidates[0].admissible and math.isfinite(res.value)
