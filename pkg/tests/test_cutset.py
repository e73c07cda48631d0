import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fppflow.capacity import CapacityField, CapacityLaw
from fppflow.cutset import (bends, build_covering, calibrate_constants, cardinality_audit, check_calibration,
                            family_cut_check, fitted_constants, interiors_disjoint, cut_threshold, shell_count,
                            shells, uncut_path, upper_bound, upper_bound_many)
from fppflow.errors import InfeasibleError, PreconditionError
from fppflow.flow import FlowProblem, is_cutset
from fppflow.geometry import PolyhedralSet, enlarge_domain
from fppflow.lattice import ContinuousDomain, discretize
from fppflow.nu import NuTable, constant_law_nu

E1 = np.array([1.0, 0.0])


@pytest.fixture(scope="module")
def setup():
    dom = ContinuousDomain.unit_square()
    P = PolyhedralSet.halfspace(E1, 0.5, dom.bbox())
    return dom, P


@pytest.fixture(scope="module")
def scaffold(setup):
    dom, P = setup
    om = enlarge_domain(dom, P, 2.0)
    return build_covering(P, om, discretize(dom, 64), 0.2, 0.1, 0.1, 0.1, 4)


def band_edges(lat, lo, hi):
    """Oracle for P = {x1 < 1/2}: edges whose open segment lies in lo <= x1 < hi."""
    X = lat.points
    a, b = X[lat.edges[:, 0], 0], X[lat.edges[:, 1], 0]
    horiz = lat.edge_axis == 0
    eps = 1e-12
    ok = np.where(horiz, (a >= lo - eps) & (b <= hi + eps), (a >= lo - eps) & (a < hi - eps))
    return set(np.flatnonzero(ok).tolist())


def test_mesh_too_coarse(setup):
    dom, P = setup
    assert shell_count(0.1, 32, 4) == 0
    with pytest.raises(PreconditionError, match="mesh too coarse"):
        shells(P, 4, discretize(dom, 32), 0.1)


def test_two_shells_at_n32(setup):
    dom, P = setup
    lat = discretize(dom, 32)
    sf = shells(P, 4, lat, 0.25)
    assert len(sf) == 2
    for k, E in enumerate(sf.edges):
        assert len(E) > 0
        assert set(E.tolist()) == band_edges(lat, 0.5 + k * 4 / 32, 0.5 + (k + 1) * 4 / 32)


def test_shell_edges_disjoint(setup):
    dom, P = setup
    sf = shells(P, 4, discretize(dom, 64), 0.25)
    seen = set()
    for E in sf.edges:
        s = set(E.tolist())
        assert not (s & seen)
        seen |= s


@pytest.mark.parametrize("n", [16, 32, 64])
def test_every_shell_is_a_cut(setup, n):
    dom, P = setup
    lat = discretize(dom, n)
    chk = family_cut_check(shells(P, 4, lat, 0.25), lat)
    assert chk.ok and all(chk.terminals_ok)


def test_cut_threshold(setup):
    dom, P = setup
    N, rows = cut_threshold(P, dom, 4, 0.25, [16, 32, 64])
    assert N == 16 and len(rows) == 3


def test_broken_shell_has_witness_path(setup):
    dom, P = setup
    lat = discretize(dom, 32)
    E = shells(P, 4, lat, 0.25).edges[0]
    row = np.flatnonzero((lat.edge_axis == 0) & (lat.coords[lat.edges[:, 0], 1] == 16))
    weakened = np.setdiff1d(E, row)
    p = FlowProblem.on_domain(lat, np.ones(lat.num_edges))
    assert not is_cutset(weakened, p)
    path = uncut_path(p, weakened)
    assert path is not None
    assert lat.gamma1[path[0]] and lat.gamma2[path[-1]]
    steps = np.abs(np.diff(lat.coords[path], axis=0)).sum(axis=1)
    assert (steps == 1).all()
    assert uncut_path(p, E) is None


def test_cylinders_disjoint(scaffold):
    ok, witness = interiors_disjoint(scaffold.cylinders)
    assert ok and witness is None


def test_walls_and_glue_disjoint_across_k(scaffold):
    for fam in (scaffold.walls, scaffold.glue):
        seen = set()
        for E in fam:
            s = set(np.asarray(E).tolist())
            assert not (s & seen)
            seen |= s


def test_walls_nonempty(scaffold):
    assert len(scaffold.walls) >= 1
    assert all(len(W) > 0 for W in scaffold.walls)


def test_bound_holds(scaffold):
    for ub in upper_bound_many(scaffold, CapacityLaw.exponential(1.0), list(range(10))):
        assert ub.holds and ub.combined_is_cut
        assert ub.combined_capacity >= ub.phi_n - 1e-9
        assert ub.min_cut_capacity == pytest.approx(ub.phi_n, rel=1e-9)
        assert ub.bound >= ub.combined_capacity - 1e-9


def test_bound_all_pairs(scaffold):
    ub = upper_bound(scaffold, CapacityField(CapacityLaw.exponential(1.0), 99), all_pairs=True)
    assert ub.all_pairs_cut


def test_zero_capacities_tight(scaffold):
    ub = upper_bound(scaffold, CapacityField(CapacityLaw.constant(0.0), 0))
    assert ub.phi_n == ub.cylinder_sum == ub.wall_min == ub.glue_min == ub.bound == 0.0
    assert ub.holds


def test_no_bends_for_halfplane(setup):
    dom, P = setup
    S0, _ = bends(P, enlarge_domain(dom, P, 2.0))
    assert len(S0) == 0


def test_audit_theta_positive(scaffold):
    a = cardinality_audit(scaffold)
    assert a.theta0 > 0
    assert a.c2_hat > 0 and a.c6_hat > 0


@pytest.fixture(scope="module")
def sweep(setup):
    dom, P = setup
    om = enlarge_domain(dom, P, 4.0)

    def audit(n, h):
        return cardinality_audit(build_covering(P, om, discretize(dom, n), 0.8, 0.5, h, 0.25, 4))

    return {0.3: [audit(n, 0.3) for n in (16, 32, 64)], 0.15: [audit(n, 0.15) for n in (32, 64)]}


def test_audit_scaling(sweep):
    audits = sweep[0.3]
    for a, b in zip(audits, audits[1:]):
        pred = (b.n / a.n) ** (a.dim - 1)
        for f in ("wall_max", "glue_max"):
            ratio = getattr(b, f) / getattr(a, f)
            assert 0.5 * pred <= ratio <= 2 * pred


def test_halving_h_halves_walls(sweep):
    for a, b in zip(sweep[0.3][1:], sweep[0.15]):
        assert a.n == b.n
        assert 0.25 <= b.wall_max / a.wall_max <= 1.0


def test_fitted_constants(sweep):
    c2, c6 = fitted_constants(sweep[0.3])
    assert c2 >= max(a.c2_hat for a in sweep[0.3]) - 1e-12
    assert c6 >= max(a.c6_hat for a in sweep[0.3]) - 1e-12


def l1_table(P):
    return NuTable.analytic(constant_law_nu, list(P.normals()), P.dim)


def test_calibration_feasible(setup, scaffold):
    dom, P = setup
    c2, c6 = fitted_constants([cardinality_audit(scaffold)])
    cal = calibrate_constants(0.5, P, scaffold.omega_prime, CapacityLaw.exponential(1.0), l1_table(P), c2, c6,
                              zeta=4, h_bounds=scaffold.bounds)
    assert cal.feasible
    ok, _, _ = check_calibration(c2, c6, cal.eps, cal.l, cal.h, cal.eta, 2, False, cal.rhs)
    assert ok


def test_calibration_small_s_needs_larger_mesh(setup, scaffold):
    dom, P = setup
    c2, c6 = fitted_constants([cardinality_audit(scaffold)])
    law = CapacityLaw.exponential(1.0)
    cals = [calibrate_constants(s, P, scaffold.omega_prime, law, l1_table(P), c2, c6, zeta=4, n=64,
                                h_bounds=scaffold.bounds) for s in (0.5, 0.1)]
    for cal in cals:
        assert not cal.feasible and "needs larger n" in cal.message
    assert cals[1].h < cals[0].h and cals[1].eta < cals[0].eta
    assert cals[1].min_mesh > cals[0].min_mesh > 64


def test_calibration_vanishing_rhs(setup, scaffold):
    dom, P = setup
    zero = NuTable.analytic(lambda v: 0.0, list(P.normals()), 2)
    with pytest.raises(InfeasibleError):
        calibrate_constants(0.5, P, scaffold.omega_prime, CapacityLaw.exponential(1.0), zero, 1.0, 1.0)


@given(st.floats(1.0, 20.0), st.floats(0.05, 2.0), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_calibration_stable_under_upscaling(c, rhs, h, eta):
    # the right-hand side carries E[t] nu_min, which scales by c^2 when capacities scale by c
    ok, _, _ = check_calibration(2.0, 3.0, 0.05, 0.2, h, eta, 2, False, rhs)
    ok2, _, _ = check_calibration(2.0, 3.0, 0.05, 0.2, h, eta, 2, False, rhs * c * c)
    assert ok2 or not ok
