import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from sphere_split import dirdist, sphgeo
from sphere_split.dirdist import (
    DirectionDistribution,
    beta_dim,
    exp_integral_E1,
    hits_matrix,
    hitting_measure_estimate,
    hitting_measure_isotropic,
    kappa_two_point,
    lower_incomplete_gamma,
    separation_measure_estimate,
    upper_incomplete_gamma,
)
from sphere_split.sphgeo import GeodesicSegment, UnitVector, polytope_from_halfspheres

from _cells import random_cell

E1, E2, E3 = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
QUARTER = GeodesicSegment(UnitVector(E1), UnitVector(E2))


# --- special functions ----------------------------------------------------------------


def test_beta_values():
    assert beta_dim(0) == pytest.approx(2.0)
    assert beta_dim(1) == pytest.approx(2 * math.pi)
    assert beta_dim(2) == pytest.approx(4 * math.pi)
    assert beta_dim(3) == pytest.approx(2 * math.pi**2)


def test_e1_at_one_matches_quadrature_oracle():
    oracle = integrate.quad(lambda s: math.exp(-s) / s, 1, math.inf, epsabs=1e-14)[0]
    assert exp_integral_E1(1.0) == pytest.approx(oracle, abs=1e-12)
    assert exp_integral_E1(1.0) == pytest.approx(0.21938393, abs=1e-8)


@pytest.mark.parametrize("t", [1e-6, 0.01, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0])
def test_e1_derivative(t):
    h = 1e-6 * max(t, 1e-3) if t > 1e-5 else 1e-9
    fd = (exp_integral_E1(t + h) - exp_integral_E1(t - h)) / (2 * h)
    assert fd == pytest.approx(-math.exp(-t) / t, rel=1e-6, abs=1e-12)


@given(st.floats(0.05, 30.0))
def test_lower_gamma_of_one(t):
    assert lower_incomplete_gamma(1.0, t) == pytest.approx(1.0 - math.exp(-t), abs=1e-13)


@given(st.floats(0.1, 20.0), st.floats(0.0, 40.0))
def test_incomplete_gamma_halves_sum_to_gamma(a, x):
    assert lower_incomplete_gamma(a, x) + upper_incomplete_gamma(a, x) == pytest.approx(math.gamma(a), rel=1e-10)


def test_euler_gamma():
    assert dirdist.euler_gamma() == pytest.approx(0.5772156649015329, abs=1e-15)


# --- distributions ----------------------------------------------------------------------


@given(st.sampled_from(["uniform", "axial:beta=4", "axial:beta=0.5:axis=1,0,0", "axial:beta=2:axis=0.6,0.8,0"]))
def test_parse_spec_roundtrip(spec):
    k = DirectionDistribution.parse(spec, 2)
    assert DirectionDistribution.parse(k.spec_string(), 2) == k


@pytest.mark.parametrize("bad", ["gauss", "axial", "axial:beta=1:foo=2", "axial:beta=-1"])
def test_parse_rejects_bad_specs(bad):
    with pytest.raises(ValueError):
        DirectionDistribution.parse(bad, 2)


def test_density_is_symmetric_and_normalized(rng):
    k = DirectionDistribution.axial(3, 4.0, (0.0, 1.0, 0.0, 0.0))
    u = rng.standard_normal((50000, 4))
    u /= np.linalg.norm(u, axis=1)[:, None]
    f = k.density(u)
    assert np.allclose(f, k.density(-u))
    assert abs(f.mean() - 1.0) <= 4 * f.std() / math.sqrt(len(f))


def test_axial_beta_zero_matches_uniform(rng):
    a = DirectionDistribution.axial(2, 0.0).sample_normals(20000, rng)[:, 2] ** 2
    b = DirectionDistribution.uniform(2).sample_normals(20000, rng)[:, 2] ** 2
    assert stats.ks_2samp(a, b).pvalue > 0.01


@pytest.mark.parametrize("d", [2, 3])
def test_axial_second_moment_matches_quadrature(d, rng):
    beta = 4.0
    # <u, a> has density proportional to (1 - z^2)^{(d-2)/2} under the uniform law
    w = lambda z: (1 - z * z) ** ((d - 2) / 2)
    num = integrate.quad(lambda z: z * z * (1 + beta * z * z) * w(z), -1, 1)[0]
    den = integrate.quad(lambda z: (1 + beta * z * z) * w(z), -1, 1)[0]
    U = DirectionDistribution.axial(d, beta).sample_normals(200000, rng)
    z2 = U[:, d] ** 2
    assert abs(z2.mean() - num / den) <= 4 * z2.std() / math.sqrt(len(z2))


def test_draw_and_sample_normals_agree(rng):
    from sphere_split._rng import Draws

    k = DirectionDistribution.axial(2, 4.0)
    dr = Draws(np.random.default_rng(3))
    a = np.array([k.draw(dr) for _ in range(20000)])[:, 2] ** 2
    b = k.sample_normals(20000, rng)[:, 2] ** 2
    assert stats.ks_2samp(a, b).pvalue > 0.01


@given(st.integers(0, 2**32 - 1))
def test_sampled_hypersphere_is_canonical(seed):
    S = dirdist.sample_great_hypersphere(DirectionDistribution.axial(2, 3.0), np.random.default_rng(seed))
    assert S.normal.coords == sphgeo.canonicalize(tuple(-x for x in S.normal.coords))


# --- hitting and separation --------------------------------------------------------------


def test_hitting_measure_isotropic_examples():
    assert hitting_measure_isotropic(sphgeo.hemisphere(E3)) == pytest.approx(1.0)
    assert hitting_measure_isotropic(polytope_from_halfspheres([E1, E2, E3])) == pytest.approx(0.75)
    assert hitting_measure_isotropic(QUARTER) == pytest.approx(0.5)


def test_hitting_measure_estimate_segment(rng):
    r = hitting_measure_estimate(DirectionDistribution.uniform(2), QUARTER, 100000, rng, reference=0.5)
    assert r.passed


def test_hitting_measure_of_points_is_zero(rng):
    k = DirectionDistribution.uniform(2)
    x = UnitVector((0.3, 0.4, math.sqrt(0.75)))
    assert hitting_measure_estimate(k, x, 100000, rng).point_estimate == 0.0
    assert hitting_measure_estimate(k, [x, -x], 100000, rng).point_estimate == 0.0


@given(st.integers(0, 10**6))
def test_isotropic_hitting_matches_estimate_for_random_cells(seed):
    c = random_cell(seed, 5)
    r = hitting_measure_estimate(DirectionDistribution.uniform(2), c, 20000, np.random.default_rng(seed), reference=hitting_measure_isotropic(c))
    assert abs(r.z_score) <= 4.5


def test_separation_of_orthogonal_points_is_half(rng):
    r = separation_measure_estimate(DirectionDistribution.uniform(2), UnitVector(E1), UnitVector(E2), 200000, rng, reference=0.5)
    assert r.passed


def test_separation_inclusion_exclusion(rng):
    k = DirectionDistribution.uniform(2)
    a = GeodesicSegment(UnitVector((0.3, 0.2, 1.0)), UnitVector((0.6, -0.1, 1.0)))
    b = GeodesicSegment(UnitVector((-0.3, 0.2, 1.0)), UnitVector((-0.6, -0.1, 1.0)))  # reflection of a
    U = k.sample_normals(200000, rng)
    hull = dirdist.hull_hits_matrix(U, a, b)
    ha, hb = hits_matrix(U, a), hits_matrix(U, b)
    sep = separation_measure_estimate(k, a, b, 200000, np.random.default_rng(1))
    # hull hits = separating + hits of a or b (an S meeting a or b meets the hull)
    ref = hull.mean() - (ha | hb).mean()
    se = math.hypot(sep.std_error, math.sqrt(ref * (1 - ref) / len(U)))
    assert abs(sep.point_estimate - ref) <= 4 * se


def test_separation_within_small_cap_is_bounded_by_hull(rng):
    k = DirectionDistribution.uniform(2)
    x, y = UnitVector((0.01, 0.0, 1.0)), UnitVector((0.0, 0.01, 1.0))
    U = k.sample_normals(100000, rng)
    sep = dirdist.hull_hits_matrix(U, x, y) & ~hits_matrix(U, x) & ~hits_matrix(U, y)
    assert sep.mean() <= dirdist.hull_hits_matrix(U, x, y).mean()


# --- two-point measure -------------------------------------------------------------------


def test_two_point_examples():
    u = DirectionDistribution.uniform(2)
    assert kappa_two_point(u, E1, E2) == pytest.approx(0.5)
    assert kappa_two_point(u, E1, E1) == 0.0
    assert kappa_two_point(DirectionDistribution.axial(2, 4.0), E1, E1) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_axial_two_point_exact_vs_sign_test(d, rng):
    k = DirectionDistribution.axial(d, 4.0)
    for _ in range(5):
        x, y = rng.standard_normal((2, d + 1))
        x /= np.linalg.norm(x)
        y /= np.linalg.norm(y)
        exact = kappa_two_point(k, x, y)
        n = 200000
        mc = kappa_two_point(k, x, y, n=n, rng=rng)
        assert abs(mc - exact) <= 4 * math.sqrt(exact * (1 - exact) / n) + 1e-12


def test_two_point_many_matches_scalar(rng):
    k = DirectionDistribution.axial(2, 2.0, (0.6, 0.0, 0.8))
    X = rng.standard_normal((20, 3))
    Y = rng.standard_normal((20, 3))
    X /= np.linalg.norm(X, axis=1)[:, None]
    Y /= np.linalg.norm(Y, axis=1)[:, None]
    many = dirdist.kappa_two_point_many(k, X, Y)
    assert many == pytest.approx([kappa_two_point(k, x, y) for x, y in zip(X, Y)])
