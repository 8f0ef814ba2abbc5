import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from sphere_split import analytics as an
from sphere_split.analytics import EACurve, QuadratureConfig
from sphere_split.suite import FIGURE_TABLE

# Frozen from the independent quadrature below at 1e-13 tolerance.
FROZEN = {2: 31.448492, 3: 125.133445, 18: 1.722011, 20: 0.209803}


def _var_ref(d, t):
    f = lambda z: math.sin(math.pi * z) ** (d - 2) * (-math.expm1(-z * t) / z if z else t)  # noqa: E731
    v, _ = integrate.quad(f, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=400)
    return (2 * math.pi) ** d / math.factorial(d - 2) * v


# --- variance table ------------------------------------------------------------------------


@pytest.mark.parametrize("d", [d for d in range(2, 21) if d != 18])
def test_variance_table(d):
    assert an.var_surface_isotropic(d, 1.0) == pytest.approx(FIGURE_TABLE[d - 2], abs=1e-3)


def test_variance_table_d18_entry_is_a_misprint():
    v = an.var_surface_isotropic(18, 1.0)
    assert v == pytest.approx(FROZEN[18], abs=1e-6)
    assert abs(v - FIGURE_TABLE[16]) > 0.04
    # neighbours decay smoothly through the computed value, not the tabulated one
    lo, hi = an.var_surface_isotropic(19, 1.0), an.var_surface_isotropic(17, 1.0)
    assert math.isclose(v * v, lo * hi, rel_tol=0.1)
    assert not math.isclose(FIGURE_TABLE[16] ** 2, lo * hi, rel_tol=0.1)


@pytest.mark.parametrize("d", sorted(FROZEN))
def test_variance_frozen_and_independent(d):
    v = an.var_surface_isotropic(d, 1.0)
    assert v == pytest.approx(FROZEN[d], abs=2e-6)
    assert v == pytest.approx(_var_ref(d, 1.0), rel=1e-9)


def test_variance_zero_time_and_errors():
    assert an.var_surface_isotropic(3, 0.0) == 0.0
    v, err = an.var_surface_isotropic(4, 2.0, return_error=True)
    assert 0 <= err < 1e-6 * v
    with pytest.raises(ValueError):
        an.var_surface_isotropic(1, 1.0)
    with pytest.raises(ValueError):
        an.var_surface_isotropic(2, -1.0)


@pytest.mark.parametrize("t", [0.1, 1.0, 2.0, 7.5])
def test_d2_variance_closed_form(t):
    assert an.var_surface_2d_closed(t) == pytest.approx(an.var_surface_isotropic(2, t), rel=1e-9)


def test_d2_variance_constant_at_one():
    # gamma + E1(1) = 0.7966 (not 0.7566)
    assert an.var_surface_2d_closed(1.0) / (4 * math.pi**2) == pytest.approx(0.796600, abs=1e-6)


@pytest.mark.parametrize("t", [0.1, 2.0])
def test_sigma_second_moments_two_forms(t):
    assert an.var_sigma0_2d(t) == pytest.approx(an.var_sigma0_2d_integral(t), abs=1e-8)
    assert an.cov_sigma0_sigma1_2d(t) == pytest.approx(an.cov_sigma0_sigma1_2d_integral(t), abs=1e-8)


def test_sigma_second_moments_asymptotics():
    t = 1e4
    assert an.var_sigma0_2d(t) / (t * t * math.log(t)) == pytest.approx(1.0, rel=0.1)
    assert an.cov_sigma0_sigma1_2d(t) / (t * math.log(t)) == pytest.approx(1.0, rel=0.1)
    lead = t * t * (math.log(t) + an.EULER_GAMMA - 0.75)
    assert an.var_sigma0_2d(t) == pytest.approx(lead, rel=0.01)


def test_sigma_second_moments_match_recursion():
    EA = an.ea_curves_2d_isotropic()
    for t in (0.5, 3.0):
        assert an.covariance_recursion(1, 1, t, EA, 2) == pytest.approx(an.var_sigma0_2d(t), rel=1e-8)
        assert an.covariance_recursion(0, 1, t, EA, 2) == pytest.approx(an.cov_sigma0_sigma1_2d(t), rel=1e-8)
        assert an.covariance_recursion(0, 0, t, EA, 2) == pytest.approx(an.var_surface_isotropic(2, t) / (2 * math.pi) ** 2, rel=1e-8)


def test_covariance_recursion_tabulated_curves():
    EA = an.ea_curves_2d_isotropic()
    grid = np.linspace(0, 3, 301)
    tab = {k: EACurve(tuple(grid), tuple(f(s) for s in grid), tuple(0.01 for _ in grid)) for k, f in EA.items()}
    v, se = an.covariance_recursion(1, 1, 3.0, tab, 2, return_se=True)
    assert v == pytest.approx(an.var_sigma0_2d(3.0), rel=1e-4)
    assert 0 < se < 0.1
    zero = {k: (lambda s: 0.0) for k in EA}
    assert an.covariance_recursion(1, 0, 2.0, zero, 2) == 0.0
    with pytest.raises(ValueError):
        an.covariance_recursion(2, 0, 1.0, EA, 2)
    with pytest.raises(ValueError):
        an.covariance_recursion(0, 0, 1.0, {}, 2)


def test_iterated_integral_and_weights():
    assert an.iterated_integral(lambda s: 1.0, 3, 2.0) == pytest.approx(8 / 6)
    grid = np.linspace(0, 2, 11)
    w = an.iterated_weights(grid, 3, 2.0)
    assert w @ grid == pytest.approx(2.0**4 / 24)
    with pytest.raises(ValueError):
        an.iterated_weights([0.5, 2.0], 2, 2.0)


# --- first moments -------------------------------------------------------------------------


def test_first_moments():
    assert an.expected_surface(2, 3.0) == pytest.approx(6 * math.pi)
    assert an.expected_sigma(2, 0, 3.0) == pytest.approx(4.5)
    assert an.expected_sigma(2, 2, 3.0) == 1.0
    assert an.expected_sigma(2, 1, 3.0, H_h=2 * math.pi) == pytest.approx(3.0 / 2)
    assert an.expected_cell_count(2, 3.0) == pytest.approx(11 - math.exp(-3))
    assert an.expected_cell_count(2, 0.0) == 1.0
    with pytest.raises(ValueError):
        an.expected_sigma(2, 3, 1.0)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_cell_count_series_matches_poisson(d):
    t = 2.0
    ref = math.exp(-t) + sum(
        math.exp(-t) * t**n / math.factorial(n) * 2 * sum(math.comb(n - 1, i) for i in range(d + 1)) for n in range(1, 80)
    )
    assert an.expected_cell_count(d, t) == pytest.approx(ref, rel=1e-12)


# --- capacity --------------------------------------------------------------------------------


def test_capacity_connected():
    assert an.capacity_connected(0.5, 2.0) == pytest.approx(math.exp(-1))
    assert an.capacity_connected(0.3, 0.0) == 1.0
    with pytest.raises(ValueError):
        an.capacity_connected(1.5, 1.0)


@given(
    st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.floats(0.0, 0.4), st.floats(0.01, 6.0)
)
def test_two_component_recursion_matches_closed_form(k1, k2, extra, t):
    hull = max(k1, k2) + extra
    sep = min(extra, hull - max(k1, k2))
    H = {frozenset({0}): k1, frozenset({1}): k2, frozenset({0, 1}): min(hull, 1.0)}
    S = {frozenset((frozenset({0}), frozenset({1}))): sep}
    rec = an.capacity_recursive(2, H, S, t)
    closed = an.capacity_two_components(k1, k2, min(hull, 1.0), sep, t)
    assert rec == pytest.approx(closed, abs=1e-10)


def test_two_component_degenerate_branch_is_continuous():
    a = an.capacity_two_components(0.2, 0.2, 0.4, 0.1, 2.0)
    b = an.capacity_two_components(0.2, 0.2, 0.4 - 1e-9, 0.1, 2.0)
    assert a == pytest.approx(b, abs=1e-7)


def test_capacity_recursive_validation_and_error():
    H = {frozenset({0}): 0.1, frozenset({1}): 0.1, frozenset({0, 1}): 0.3}
    with pytest.raises(ValueError):
        an.capacity_recursive(2, H, {}, 1.0)
    with pytest.raises(ValueError):
        an.capacity_recursive(7, H, {}, 1.0)
    S = {frozenset((frozenset({0}), frozenset({1}))): 0.1}
    v, err = an.capacity_recursive(2, H, S, 2.0, return_error=True)
    assert err < 1e-12 and 0 < v < 1
    assert an.capacity_recursive(2, H, S, 0.0) == 1.0


def test_capacity_recursive_no_separation_reduces_to_hull():
    H = {frozenset(s): 0.2 for s in ({0}, {1}, {2})}
    H.update({frozenset(s): 0.35 for s in ({0, 1}, {0, 2}, {1, 2})})
    H[frozenset({0, 1, 2})] = 0.5
    S = {}
    Q = (0, 1, 2)
    for r in (2, 3):
        from itertools import combinations

        for sub in combinations(Q, r):
            for P, Pc in an._partitions(sub):
                S[frozenset((P, Pc))] = 0.0
    assert an.capacity_recursive(3, H, S, 2.5) == pytest.approx(math.exp(-2.5 * 0.5), abs=1e-12)


# --- pair correlation and K ---------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("r", [0.3, math.pi / 2, 2.5])
def test_pcf_closed_forms(d, r):
    t = 2.0
    c = special.gamma(d / 2) ** 2 / (special.gamma((d - 1) / 2) * special.gamma((d + 1) / 2))
    assert an._bp_const(d) == pytest.approx(c, rel=1e-12)
    assert an.pcf_poisson(d, t, r) == pytest.approx(1 + c / (t * math.sin(r)))
    assert an.pcf_split(d, t, r) == pytest.approx(1 + math.pi * c * (1 - math.exp(-t * r / math.pi)) / (t * t * r * math.sin(r)))


@given(st.floats(0.01, 3.1), st.floats(0.05, 20.0), st.sampled_from([2, 3, 5]))
def test_pcf_split_below_poisson(r, t, d):
    gs, gp = an.pcf_split(d, t, r), an.pcf_poisson(d, t, r)
    assert 1.0 < gs <= gp
    # ratio of the excesses is (1 - e^{-x}) / x with x = t r / pi
    x = t * r / math.pi
    assert (gs - 1) / (gp - 1) == pytest.approx(-math.expm1(-x) / x, rel=1e-9)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("r", [0.4, 1.7, 3.0])
def test_k_function_forms_agree(d, r):
    t = 1.5
    assert an.k_function_split(d, t, r) == pytest.approx(an.k_function_split_alt(d, t, r), abs=1e-10)
    assert an.k_function_poisson(d, t, r) == pytest.approx(an.k_function_poisson_alt(d, t, r), abs=1e-10)


def test_k_derivative_is_pcf_times_density():
    d, t, r, h = 2, 2.0, 1.1, 1e-5
    dK = (an.k_function_split(d, t, r + h) - an.k_function_split(d, t, r - h)) / (2 * h)
    assert dK == pytest.approx(an.pcf_split(d, t, r) * math.sin(r) / 2, rel=1e-6)


def test_cap_fraction():
    assert an.cap_fraction(2, math.pi / 2) == pytest.approx(0.5)
    assert an.cap_fraction(2, 1.0) == pytest.approx((1 - math.cos(1.0)) / 2)
    assert an.cap_fraction(3, 0.0) == 0.0 and an.cap_fraction(3, math.pi) == 1.0
    with pytest.raises(ValueError):
        an.pcf_split(2, 1.0, math.pi)


# --- typical segments ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("t", [0.3, 2.0, 6.0])
def test_segment_count_two_forms(d, t):
    assert an.n1_split(d, t) == pytest.approx(an.n1_split_integral(d, t), rel=1e-9)


def test_segment_count_d2():
    assert an.n1_split(2, 3.0) == pytest.approx(9 + 1 - math.exp(-3))
    assert an.n1_split(2, 0.0) == 0.0


@pytest.mark.parametrize("d", [2, 3, 4])
def test_mean_segment_length(d):
    t = 2.5
    lo, hi = an.segment_length_bounds(d, t)
    assert lo <= an.mean_segment_length_split(d, t) <= hi
    assert an.mean_segment_length_split(d, 1e-6) == pytest.approx(2 * math.pi, rel=1e-4)
    assert an.mean_segment_length_split(d, 0.0) == 2 * math.pi


def test_mean_segment_length_is_total_over_count_d2():
    t = 2.5
    assert an.mean_segment_length_split(2, t) == pytest.approx(an.expected_surface(2, t) / an.n1_split(2, t))


@pytest.mark.parametrize("d", [2, 3])
def test_segment_to_edge_length_ratio_limit(d):
    t = 1e3
    if d == 2:
        assert an.mean_segment_length_split(d, t) / an.mean_edge_length_poisson(t) == pytest.approx(2.0, rel=1e-3)
    assert an.mean_segment_length_split(d, t) * t / math.pi == pytest.approx(d / (d - 1), rel=1e-3)


@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("t", [0.5, 3.0])
def test_birth_density_is_normalized(d, t):
    assert an.birth_density_total(d, t) == pytest.approx(1.0, abs=1e-9)
    assert an.birth_density_total(d, t, QuadratureConfig().doubled()) == pytest.approx(1.0, abs=1e-11)
    assert float(an.birth_cdf(d, t, t)) == pytest.approx(1.0)
    s = 0.4 * t
    h = 1e-6
    dF = (float(an.birth_cdf(d, t, s + h)) - float(an.birth_cdf(d, t, s - h))) / (2 * h)
    assert dF == pytest.approx(an.birth_density(d, t, s), rel=1e-5)


def test_mixture_weights_integrate_to_one():
    d, t = 3, 2.0
    v, _ = integrate.quad(lambda s: an.mixture_weight(d, t, s), 0, t)
    assert v == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        an.birth_density(2, 1.0, 1.5)


def test_mean_edge_length_poisson_limit():
    assert an.mean_edge_length_poisson(0.0) == pytest.approx(2 * math.pi)
    assert an.mean_edge_length_poisson(3.0) == pytest.approx(2 * math.pi / (6 + math.exp(-3)))


# --- registry ---------------------------------------------------------------------------------


def test_registry_and_tabulate():
    header, rows = an.tabulate("var_surface", [2, 3], t=1.0)
    assert header == ("d", "var_surface") and rows[0][1] == pytest.approx(31.4485, abs=1e-3)
    header, rows = an.tabulate("pcf", [1.0], d=2, t=1.0)
    assert len(header) == 5 and len(rows) == 1
    for name, f in an.REGISTRY.items():
        assert f.name == name and f.description
    with pytest.raises(KeyError):
        an.tabulate("nope", [1.0])
    with pytest.raises(ValueError):
        an.tabulate("pcf", [1.0], d=2)
    assert "pcf" in an.suggest("pfc")
    text = an.table_csv(("a", "b"), [(1, 2)], "x")
    assert text.splitlines() == ["# sphere-split v0.1.0 schema=x", "a,b", "1.0,2.0"]


def test_figure_variances_cached():
    vals = an.figure_variances()
    assert len(vals) == 19 and an.figure_variances() is vals
