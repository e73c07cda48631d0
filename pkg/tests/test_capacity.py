import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from fppflow.capacity import (CapacityField, CapacityLaw, cramer_rate, derive_seed, exp_moment_check, sample, tilt,
                              tilt_for_mean)
from fppflow.lattice import ContinuousDomain, discretize

LAWS = [CapacityLaw.constant(1.0), CapacityLaw.bernoulli(0.4), CapacityLaw.exponential(1.0),
        CapacityLaw.uniform(0.5, 2.0), CapacityLaw.discrete([0.0, 1.0, 3.0], [0.2, 0.5, 0.3])]


def grid_keys(m, d=2):
    lower = np.stack(np.meshgrid(*[np.arange(m)] * d, indexing="ij"), -1).reshape(-1, d)
    lower = np.repeat(lower, d, axis=0)
    axis = np.tile(np.arange(d), m ** d)
    return lower, axis


def test_constant_field_is_one(square_lattices):
    caps = CapacityField(CapacityLaw.constant(1.0), 3).on(square_lattices[8])
    assert (caps == 1.0).all()


def test_bernoulli_mean():
    lower, axis = grid_keys(224)
    v = CapacityField(CapacityLaw.bernoulli(0.4), 11).values(lower, axis)
    assert len(v) >= 10 ** 5
    assert abs(v.mean() - 0.4) < 0.01
    assert set(np.unique(v)) <= {0.0, 1.0}


def test_same_seed_same_field(square_lattices):
    lat = square_lattices[16]
    law = CapacityLaw.exponential(1.0)
    assert np.array_equal(sample(law, lat, 5), sample(law, lat, 5))
    assert not np.array_equal(sample(law, lat, 5), sample(law, lat, 6))


def test_field_shared_between_graphs(square_lattices):
    # the capacity of an edge depends only on its position, so a subgraph sees the same values
    big = square_lattices[16]
    small = discretize(ContinuousDomain.box([0, 0], [0.5, 0.5]), 16)
    f = CapacityField(CapacityLaw.exponential(1.0), 9)
    cb, cs = f.on(big), f.on(small)
    keys_b = {(tuple(big.coords[a]), int(ax)): c for (a, _), ax, c in zip(big.edges, big.edge_axis, cb)}
    for (a, _), ax, c in zip(small.edges, small.edge_axis, cs):
        assert keys_b[(tuple(small.coords[a]), int(ax))] == c


@pytest.mark.parametrize("law", LAWS[1:], ids=lambda l: l.kind)
def test_marginal_distribution(law):
    lower, axis = grid_keys(120)
    v = CapacityField(law, 2).values(lower, axis)
    if law.kind in ("exponential", "uniform"):
        ref = stats.expon(scale=1.0) if law.kind == "exponential" else stats.uniform(0.5, 1.5)
        assert stats.kstest(v, ref.cdf).pvalue > 1e-3
    else:
        assert abs(v.mean() - law.mean()) < 4 * v.std() / math.sqrt(len(v))


def test_derive_seed_distinct():
    seen = {derive_seed(0, a, b) for a in range(30) for b in range(30)}
    assert len(seen) == 900


def test_exp_moment_constant():
    assert exp_moment_check(CapacityLaw.constant(1.0), 1.0) == pytest.approx(math.e)


def test_exp_moment_exponential():
    assert exp_moment_check(CapacityLaw.exponential(1.0), 0.5) == pytest.approx(2.0)


def test_exp_moment_divergent():
    assert math.isinf(exp_moment_check(CapacityLaw.exponential(1.0), 1.0))


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
@pytest.mark.parametrize("theta", [0.1, 0.3])
def test_exp_moment_against_quadrature(law, theta):
    # E[e^{theta t}] = int_0^1 exp(theta Q(u)) du
    val, _ = integrate.quad(lambda u: math.exp(theta * float(law.quantile(np.array([u]))[0])), 0, 1, limit=200,
                            points=[0.2, 0.4, 0.6, 0.7])
    assert exp_moment_check(law, theta) == pytest.approx(val, rel=1e-4)


def test_cramer_at_mean():
    assert cramer_rate(CapacityLaw.exponential(1.0), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_cramer_exponential_two():
    assert cramer_rate(CapacityLaw.exponential(1.0), 2.0) == pytest.approx(2 - 1 - math.log(2), rel=1e-9)


def test_cramer_outside_support():
    assert math.isinf(cramer_rate(CapacityLaw.bernoulli(0.5), 1.5))


@given(st.floats(0.2, 5.0))
def test_cramer_exponential_closed_form(x):
    assert cramer_rate(CapacityLaw.exponential(1.0), x) == pytest.approx(x - 1 - math.log(x), abs=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99))
def test_cramer_bernoulli_closed_form(p, x):
    want = x * math.log(x / p) + (1 - x) * math.log((1 - x) / (1 - p))
    assert cramer_rate(CapacityLaw.bernoulli(p), x) == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("law", LAWS[1:], ids=lambda l: l.kind)
def test_cramer_nonnegative_convex(law):
    lo, hi = law.support
    hi = min(hi, 6.0)
    xs = np.linspace(lo + 1e-3, hi - 1e-3, 25)
    I = np.array([cramer_rate(law, x) for x in xs])
    assert (I >= -1e-10).all()
    assert (I[:-2] + I[2:] - 2 * I[1:-1] >= -1e-7).all()


def test_tilt_identity():
    law = CapacityLaw.exponential(1.0)
    t, lm = tilt(law, 0.0)
    assert t == law and lm == 0.0


def test_tilt_exponential():
    t, lm = tilt(CapacityLaw.exponential(1.0), 0.5)
    assert t.kind == "exponential" and t.params[0] == pytest.approx(0.5)
    assert lm == pytest.approx(math.log(2))


def test_tilt_bernoulli():
    t, _ = tilt(CapacityLaw.bernoulli(0.4), 1.0)
    assert t.params[0] == pytest.approx(0.4 * math.e / (0.6 + 0.4 * math.e))


@pytest.mark.parametrize("law", LAWS[1:], ids=lambda l: l.kind)
def test_tilt_for_mean_hits_target(law):
    lo, hi = law.support
    target = law.mean() + 0.3 * (min(hi, 5.0) - law.mean())
    th = tilt_for_mean(law, target)
    assert tilt(law, th)[0].mean() == pytest.approx(target, rel=1e-6)


def test_law_roundtrip():
    for law in LAWS:
        assert CapacityLaw.from_dict(law.to_dict()) == law


@pytest.mark.parametrize("bad", [{"kind": "bernoulli", "p": 1.5}, {"kind": "exponential", "rate": -1},
                                 {"kind": "uniform", "a": 2, "b": 1}, {"kind": "constant", "c": -1}])
def test_law_rejects_invalid(bad):
    with pytest.raises(ValueError):
        CapacityLaw.from_dict(bad)
