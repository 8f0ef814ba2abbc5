"""Closed-form references and the quadratures behind them.

Everything here is a pure function of its arguments. Integrals go through
``QuadratureConfig.integrate`` (scipy's adaptive Gauss-Kronrod), which fails
loudly when the reported error exceeds the configured tolerance. Removable
endpoint singularities are handled by writing every integrand with its
analytic limit built in.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate, special

from . import __version__
from .dirdist import EULER_GAMMA, beta_dim, exp_integral_E1, lower_incomplete_gamma

TWO_PI = 2.0 * math.pi


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    limit: int = 500

    def integrate(self, f: Callable[[float], float], a: float, b: float, points=None) -> tuple[float, float]:
        """Adaptive quadrature returning (value, error estimate)."""
        if a == b:
            return 0.0, 0.0
        val, err = integrate.quad(
            f, a, b, epsabs=self.abs_tol, epsrel=self.rel_tol, limit=self.limit, points=points
        )
        if err > max(self.abs_tol, self.rel_tol * abs(val)) * 10.0:
            raise QuadratureError(f"quadrature error {err:.3g} above tolerance on [{a}, {b}]")
        return float(val), float(err)

    def doubled(self) -> "QuadratureConfig":
        return QuadratureConfig(self.abs_tol / 100.0, self.rel_tol / 100.0, self.limit * 2)


DEFAULT_QUAD = QuadratureConfig()


def _check_t(t: float, strict: bool = False) -> float:
    t = float(t)
    if math.isnan(t) or t < 0 or (strict and t == 0):
        raise ValueError("t must be " + ("> 0" if strict else ">= 0"))
    return t


def _one_minus_exp_over(x: float, t: float) -> float:
    """(1 - exp(-x t)) / x with its limit t at x = 0."""
    if x == 0.0:
        return t
    return -math.expm1(-x * t) / x


# --- capacity functional -----------------------------------------------------------


def capacity_connected(kappa_hit: float, t: float) -> float:
    if not 0.0 <= kappa_hit <= 1.0:
        raise ValueError("kappa_hit must lie in [0, 1]")
    return math.exp(-kappa_hit * _check_t(t))


def capacity_two_components(k1: float, k2: float, k_hull: float, k_sep: float, t: float) -> float:
    """Avoidance probability of C1 ∪ C2 from the hit measures of C1, C2, their hull and the separators."""
    for v in (k1, k2, k_hull, k_sep):
        if not -1e-15 <= v <= 1.0 + 1e-15:
            raise ValueError("measures must lie in [0, 1]")
    t = _check_t(t)
    a = k1 + k2 - k_hull
    base = math.exp(-t * k_hull)
    if abs(a) <= 1e-12:
        return base + t * k_sep * math.exp(-t * (k1 + k2))
    return base + k_sep * (base - math.exp(-t * (k1 + k2))) / a


def _partitions(Q: tuple[int, ...]):
    """Unordered proper partitions {P, Q \\ P}; P holds the smallest index."""
    first, rest = Q[0], Q[1:]
    for r in range(len(rest) + 1):
        for extra in combinations(rest, r):
            P = (first,) + extra
            if len(P) == len(Q):
                continue
            Pc = tuple(i for i in Q if i not in P)
            yield frozenset(P), frozenset(Pc)


def capacity_recursive(
    m: int,
    hull: Mapping[frozenset, float],
    sep: Mapping[frozenset, float],
    t: float,
    deg: int = 48,
    n_gauss: int = 64,
    return_error: bool = False,
):
    """Avoidance probability of a union of m disjoint connected components.

    ``hull[Q]`` is the hit measure of the closed convex hull of the
    components in Q (for a singleton, of the component itself). ``sep`` maps
    ``frozenset({P, Q \\ P})`` to the measure of hyperspheres separating P from
    its complement inside Q. Each U(Q, .) is carried as a Chebyshev
    interpolant on [0, t]; the convolution integrals use Gauss-Legendre.
    The error estimate compares against a run at twice the degree.
    """
    if not 1 <= m <= 6:
        raise ValueError("m must be between 1 and 6")
    t = _check_t(t)
    full = tuple(range(m))
    for r in range(1, m + 1):
        for Q in combinations(full, r):
            if frozenset(Q) not in hull:
                raise ValueError(f"missing hull measure for components {Q}")
            if r > 1:
                for P, Pc in _partitions(Q):
                    if frozenset((P, Pc)) not in sep:
                        raise ValueError(f"missing separation measure for {sorted(P)} | {sorted(Pc)}")
    if m == 1 or t == 0.0:
        val = capacity_connected(hull[frozenset(full)], t) if m == 1 else 1.0
        return (val, 0.0) if return_error else val
    val = _capacity_cheb(m, hull, sep, t, deg, n_gauss)
    if not return_error:
        return val
    val2 = _capacity_cheb(m, hull, sep, t, 2 * deg, 2 * n_gauss)
    return val2, abs(val2 - val)


def _capacity_cheb(m, hull, sep, t, deg, n_gauss) -> float:
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    memo: dict[frozenset, Callable] = {}

    def U(Q: frozenset):
        if Q in memo:
            return memo[Q]
        h = hull[Q]
        if len(Q) == 1:
            f = lambda tau, h=h: np.exp(-np.asarray(tau) * h)  # noqa: E731
            memo[Q] = f
            return f
        parts = [(U(P), U(Pc), sep[frozenset((P, Pc))]) for P, Pc in _partitions(tuple(sorted(Q)))]

        def val(tau):
            tau = np.asarray(tau, dtype=float)
            s = 0.5 * tau[:, None] * (x[None, :] + 1.0)
            ws = 0.5 * tau[:, None] * w[None, :]
            acc = np.zeros_like(tau)
            damp = np.exp(-s * h)
            for fa, fb, k in parts:
                if k == 0.0:
                    continue
                acc += k * np.sum(ws * damp * fa(tau[:, None] - s) * fb(tau[:, None] - s), axis=1)
            return np.exp(-tau * h) + acc

        cheb = np.polynomial.Chebyshev.interpolate(val, deg, domain=[0.0, t])
        memo[Q] = cheb
        return cheb

    return float(U(frozenset(range(m)))(t))


# --- first-order moments -------------------------------------------------------------


def expected_sigma(d: int, j: int, t: float, H_h: float | None = None) -> float:
    """Mean of the j-th curvature sum; ``H_h`` is the integral of h (default: h = 1)."""
    if not 0 <= j <= d:
        raise ValueError("need 0 <= j <= d")
    t = _check_t(t)
    H = beta_dim(d) if H_h is None else H_h
    return t ** (d - j) / math.factorial(d - j) * H / beta_dim(d)


def expected_surface(d: int, t: float) -> float:
    return beta_dim(d - 1) * _check_t(t)


def expected_cell_count(d: int, t: float) -> float:
    """Mean number of cells (the same for both tessellation models)."""
    t = _check_t(t)
    if d == 2:
        return t * t + 2.0 - math.exp(-t)
    total = math.exp(-t)
    n, p = 1, t * math.exp(-t)
    while n < 60 + 10 * t or p > 1e-18:
        total += p * 2 * sum(math.comb(n - 1, i) for i in range(d + 1))
        n += 1
        p *= t / n
    return total


def kappa_bar(kappa, h: Callable[[np.ndarray], np.ndarray] | None, n: int, rng: np.random.Generator):
    """Mean of h at a uniform point of a kappa-distributed great hypersphere."""
    from ._report import make_report, mean_se

    d = kappa.dim
    if h is None:
        return make_report("kappa_bar", n, 1.0, 0.0, reference=1.0)
    U = kappa.sample_normals(n, rng)
    g = rng.standard_normal((n, d + 1))
    g -= np.einsum("ij,ij->i", g, U)[:, None] * U
    X = g / np.linalg.norm(g, axis=1)[:, None]
    est, se = mean_se(np.asarray(h(X), dtype=float))
    return make_report("kappa_bar", n, est, se)


# --- variances ---------------------------------------------------------------------------


def var_surface_isotropic(d: int, t: float, quad: QuadratureConfig = DEFAULT_QUAD, return_error: bool = False):
    """Variance of the total boundary measure for the isotropic law."""
    if d < 2:
        raise ValueError("d must be >= 2")
    t = _check_t(t)
    if t == 0.0:
        return (0.0, 0.0) if return_error else 0.0
    p = d - 2

    def f(z):
        s = math.sin(math.pi * z) ** p if p else 1.0
        return s * _one_minus_exp_over(z, t)

    val, err = quad.integrate(f, 0.0, 1.0)
    scale = TWO_PI**d / math.factorial(p)
    return (scale * val, scale * err) if return_error else scale * val


def var_surface_2d_closed(t: float) -> float:
    t = _check_t(t, strict=True)
    return 4.0 * math.pi**2 * (EULER_GAMMA + math.log(t) + exp_integral_E1(t))


def var_surface_general(kappa, t: float, h=None, n: int = 100000, rng: np.random.Generator | None = None, reference=None):
    """Monte Carlo of the triple-integral variance formula for any sampleable law.

    S ~ kappa, then x, y uniform on S; the separating measure of the segment
    xy is evaluated exactly (no nested Monte Carlo, which would bias the
    nonlinear integrand).
    """
    import time

    from ._report import make_report, mean_se
    from .dirdist import kappa_two_point_many

    t0 = time.perf_counter()
    t = _check_t(t)
    rng = np.random.default_rng(0) if rng is None else rng
    d = kappa.dim
    if t == 0.0:
        return make_report("var_surface_general", n, 0.0, 0.0, reference)
    U = kappa.sample_normals(n, rng)

    def on_plane():
        g = rng.standard_normal((n, d + 1))
        g -= np.einsum("ij,ij->i", g, U)[:, None] * U
        return g / np.linalg.norm(g, axis=1)[:, None]

    X, Y = on_plane(), on_plane()
    k = kappa_two_point_many(kappa, X, Y)
    vals = np.where(k > 0, -np.expm1(-k * t) / np.where(k > 0, k, 1.0), t)
    if h is not None:
        vals = vals * np.asarray(h(X), dtype=float) * np.asarray(h(Y), dtype=float)
    est, se = mean_se(vals)
    b2 = beta_dim(d - 1) ** 2
    return make_report(
        "var_surface_general", n, b2 * est, b2 * se, reference, wall_time=time.perf_counter() - t0, t=t, kappa=kappa.spec_string()
    )


def var_sigma0_2d(t: float) -> float:
    t = _check_t(t, strict=True)
    return t * t * math.log(t) + t * t * (EULER_GAMMA - 0.75 + exp_integral_E1(t)) - t * math.expm1(-t)


def var_sigma0_2d_integral(t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    t = _check_t(t, strict=True)
    val, _ = quad.integrate(lambda z: (1 - z) ** 2 * _one_minus_exp_over(z, t), 0.0, 1.0)
    return t * t * val + 1.0 - t + 0.75 * t * t - math.exp(-t)


def cov_sigma0_sigma1_2d(t: float) -> float:
    t = _check_t(t, strict=True)
    return t * math.log(t) + t * (EULER_GAMMA - 0.5 + exp_integral_E1(t)) - 0.5 * math.expm1(-t)


def cov_sigma0_sigma1_2d_integral(t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    t = _check_t(t, strict=True)
    val, _ = quad.integrate(lambda z: (1 - z) * _one_minus_exp_over(z, t), 0.0, 1.0)
    return t * val + 0.5 * (t - 1.0 + math.exp(-t))


# --- covariance recursion ---------------------------------------------------------------


def iterated_integral(f: Callable[[float], float], n: int, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """n-fold iterated integral of f over [0, t] (Cauchy's formula)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = _check_t(t)
    val, _ = quad.integrate(lambda s: (t - s) ** (n - 1) * f(s), 0.0, t)
    return val / math.factorial(n - 1)


def iterated_weights(grid: Sequence[float], n: int, t: float) -> np.ndarray:
    """Weights w with I^n(L, t) = w @ values for the piecewise-linear interpolant L.

    Each segment integrand is a polynomial of degree n, so a Gauss-Legendre
    rule with enough nodes is exact.
    """
    g = np.asarray(grid, dtype=float)
    if g[0] > 1e-15 or g[-1] < t - 1e-12:
        raise ValueError("curve grid must cover [0, t]")
    x, w = np.polynomial.legendre.leggauss(n // 2 + 2)
    out = np.zeros(len(g))
    for k in range(len(g) - 1):
        a, b = g[k], min(g[k + 1], t)
        if a >= t:
            break
        s = 0.5 * (b - a) * (x + 1.0) + a
        ws = 0.5 * (b - a) * w * (t - s) ** (n - 1)
        lam = (s - a) / (g[k + 1] - a)
        out[k] += np.sum(ws * (1.0 - lam))
        out[k + 1] += np.sum(ws * lam)
    return out / math.factorial(n - 1)


@dataclass(frozen=True)
class EACurve:
    """Tabulated s -> E A_{i,j}(s) with optional pointwise standard errors."""

    grid: tuple
    values: tuple
    se: tuple | None = None


def covariance_recursion(
    k: int,
    l: int,
    t: float,
    EA: Mapping[tuple[int, int], EACurve | Callable[[float], float]],
    d: int,
    quad: QuadratureConfig = DEFAULT_QUAD,
    symmetric: bool = True,
    return_se: bool = False,
):
    """Cov(Sigma_{d-1-k}, Sigma_{d-1-l}) from the mean curves E A_{i,j}.

    Tabulated curves are linearly interpolated and integrated exactly; their
    pointwise SEs (independent across grid points) propagate linearly.
    """
    if not (0 <= k <= d - 1 and 0 <= l <= d - 1):
        raise ValueError("need 0 <= k, l <= d - 1")
    t = _check_t(t)
    total = 0.0
    var = 0.0
    for m in range(k + 1):
        for n_ in range(l + 1):
            key = (d - 1 - m, d - 1 - n_)
            curve = EA.get(key)
            if curve is None and symmetric:
                curve = EA.get(key[::-1])
            if curve is None:
                raise ValueError(f"missing E A curve for {key}")
            order = k + l - m - n_ + 1
            coef = math.comb(k + l - m - n_, k - m)
            if callable(curve):
                total += coef * iterated_integral(curve, order, t, quad)
            else:
                w = iterated_weights(curve.grid, order, t)
                total += coef * float(w @ np.asarray(curve.values))
                if curve.se is not None:
                    var += coef * coef * float((w * w) @ np.asarray(curve.se) ** 2)
    return (total, math.sqrt(var)) if return_se else total


def ea_curves_2d_isotropic() -> dict[tuple[int, int], Callable[[float], float]]:
    """Exact E A_{i,j} curves in d = 2 for the isotropic law."""
    return {
        (0, 0): lambda s: 0.5 * s,
        (1, 0): lambda s: -0.5 * math.expm1(-s),
        (1, 1): lambda s: _one_minus_exp_over(s, 1.0) if s > 0 else 1.0,
    }


# --- K-functions and pair correlation -----------------------------------------------


def _check_r(r: float) -> float:
    r = float(r)
    if not 0.0 < r < math.pi:
        raise ValueError("r must lie in (0, pi)")
    return r


def _bp_const(d: int) -> float:
    return beta_dim(d - 2) * beta_dim(d) / beta_dim(d - 1) ** 2


def pcf_split(d: int, t: float, r: float) -> float:
    t = _check_t(t, strict=True)
    r = _check_r(r)
    return 1.0 + math.pi * _bp_const(d) * (-math.expm1(-t * r / math.pi)) / (t * t * r * math.sin(r))


def pcf_poisson(d: int, t: float, r: float) -> float:
    t = _check_t(t, strict=True)
    r = _check_r(r)
    return 1.0 + _bp_const(d) / (t * math.sin(r))


def _sin_pow(p: int):
    return (lambda x: 1.0) if p == 0 else (lambda x: math.sin(x) ** p)


def k_function_split(d: int, t: float, r: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    t = _check_t(t, strict=True)
    r = _check_r(r)
    c = math.pi * _bp_const(d) / (t * t)
    s1, s2 = _sin_pow(d - 1), _sin_pow(d - 2)

    def f(p):
        # sin^{d-1} + c (1 - e^{-tp/pi}) / p * sin^{d-2}; limit t/pi at p = 0
        return s1(p) + c * _one_minus_exp_over(p, t / math.pi) * s2(p)

    val, _ = quad.integrate(f, 0.0, r)
    return beta_dim(d - 1) / beta_dim(d) * val


def k_function_split_alt(d: int, t: float, r: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Cap-volume plus line-contribution form of the same K-function."""
    t = _check_t(t, strict=True)
    r = _check_r(r)
    s2 = _sin_pow(d - 2)
    val, _ = quad.integrate(lambda p: (math.pi / t) * _one_minus_exp_over(p, t / math.pi) * s2(p), 0.0, r)
    return cap_fraction(d, r) + beta_dim(d - 2) / (t * beta_dim(d - 1)) * val


def k_function_poisson(d: int, t: float, r: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    t = _check_t(t, strict=True)
    r = _check_r(r)
    a, _ = quad.integrate(_sin_pow(d - 1), 0.0, r)
    b, _ = quad.integrate(_sin_pow(d - 2), 0.0, r)
    return beta_dim(d - 1) / beta_dim(d) * a + beta_dim(d - 2) / (t * beta_dim(d - 1)) * b


def cap_fraction(d: int, r: float) -> float:
    """H^d of a cap of angular radius r in S^d, divided by beta_d."""
    if r <= 0:
        return 0.0
    if r >= math.pi:
        return 1.0
    half = 0.5 * special.betainc(d / 2.0, 0.5, math.sin(r) ** 2)
    return half if r <= math.pi / 2 else 1.0 - half


def k_function_poisson_alt(d: int, t: float, r: float) -> float:
    """Cap fraction plus the normalized measure of a cap in a great subsphere."""
    t = _check_t(t, strict=True)
    r = _check_r(r)
    return cap_fraction(d, r) + cap_fraction(d - 1, r) / t


# --- maximal faces and typical segments -----------------------------------------------


def _check_s(t: float, s: float) -> tuple[float, float]:
    t = _check_t(t, strict=True)
    s = float(s)
    if not 0.0 < s < t:
        raise ValueError("need 0 < s < t")
    return t, s


def n1_poisson(d: int, s: float) -> float:
    """Mean number of edges of the Poisson tessellation."""
    s = _check_t(s)
    return s ** (d - 1) / math.factorial(d - 1) * (2.0 * s + math.exp(-s))


def _den(d: int, t: float) -> float:
    if d == 2:
        return 2.0 * t * t - 2.0 * math.expm1(-t)
    return 2.0 * t**d + d * lower_incomplete_gamma(d - 1, t)


def n1_split(d: int, t: float) -> float:
    """Mean number of maximal segments of the splitting tessellation."""
    if d < 2:
        raise ValueError("d must be >= 2")
    t = _check_t(t)
    if t == 0.0:
        return 0.0
    return 2.0 ** (d - 2) / math.factorial(d - 2) * _den(d, t) / d


def n1_split_integral(d: int, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """The same count through the mixing identity with Poisson edge counts."""
    t = _check_t(t)
    val, _ = quad.integrate(lambda s: n1_poisson(d, s) / s if s > 0 else (1.0 if d == 2 else 0.0), 0.0, t)
    return (d - 1) * 2.0 ** (d - 2) * val


def mean_segment_length_split(d: int, t: float) -> float:
    t = _check_t(t)
    if t == 0.0:
        return TWO_PI
    return d / (d - 1) * TWO_PI * t ** (d - 1) / _den(d, t)


def mean_edge_length_poisson(t: float) -> float:
    t = _check_t(t)
    return TWO_PI / (2.0 * t + math.exp(-t))


def segment_length_bounds(d: int, t: float) -> tuple[float, float]:
    t = _check_t(t, strict=True)
    upper = d / (d - 1) * math.pi / t
    return upper / (1.0 + math.factorial(d - 1) / t**d), upper


def birth_density(d: int, t: float, s: float) -> float:
    t, s = _check_s(t, s)
    return d * s ** (d - 2) * (2.0 * s + math.exp(-s)) / _den(d, t)


def birth_cdf(d: int, t: float, s):
    """Distribution function of the birth time (vectorized in s)."""
    t = _check_t(t, strict=True)
    s = np.clip(np.asarray(s, dtype=float), 0.0, t)
    if d == 2:
        return (s * s - np.expm1(-s)) / (t * t - math.expm1(-t))
    g = np.vectorize(lambda x: lower_incomplete_gamma(d - 1, x) if x > 0 else 0.0)(s)
    return (2.0 * s**d + d * g) / _den(d, t)


def mixture_weight(d: int, t: float, s: float) -> float:
    """Weight of the Poisson edge law at time s in the typical-segment mixture."""
    t, s = _check_s(t, s)
    return (d - 1) * 2.0 ** (d - 2) * n1_poisson(d, s) / (s * n1_split(d, t))


def birth_density_total(d: int, t: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    t = _check_t(t, strict=True)
    val, _ = quad.integrate(lambda s: birth_density(d, t, s) if 0 < s < t else 0.0, 0.0, t)
    return val


# --- registry and tabulation ----------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    name: str
    grid_param: str
    params: tuple
    columns: tuple
    evaluate: Callable[..., tuple]
    description: str


def _row_var_surface(d, t):
    return (var_surface_isotropic(int(d), t),)


def _row_pcf(d, t, r):
    return (k_function_split(int(d), t, r), pcf_split(int(d), t, r), k_function_poisson(int(d), t, r), pcf_poisson(int(d), t, r))


REGISTRY: dict[str, Formula] = {
    f.name: f
    for f in [
        Formula("var_surface", "d", ("t",), ("var_surface",), lambda d, t: _row_var_surface(d, t), "variance of the total boundary measure, isotropic"),
        Formula("pcf", "r", ("d", "t"), ("K_split", "g_split", "K_poisson", "g_poisson"), lambda r, d, t: _row_pcf(d, t, r), "K-functions and pair correlation of both models"),
        Formula("mean_segment_length", "t", ("d",), ("mean_segment_length",), lambda t, d: (mean_segment_length_split(int(d), t),), "mean length of the typical maximal segment"),
        Formula("mean_edge_length_poisson", "t", (), ("mean_edge_length",), lambda t: (mean_edge_length_poisson(t),), "mean length of the typical Poisson edge"),
        Formula("n1_split", "t", ("d",), ("n1_split",), lambda t, d: (n1_split(int(d), t),), "mean number of maximal segments"),
        Formula("n1_poisson", "t", ("d",), ("n1_poisson",), lambda t, d: (n1_poisson(int(d), t),), "mean number of Poisson edges"),
        Formula("birth_density", "s", ("d", "t"), ("density",), lambda s, d, t: (birth_density(int(d), t, s),), "birth-time density of the typical maximal segment"),
        Formula("expected_sigma", "t", ("d", "j"), ("expected_sigma",), lambda t, d, j: (expected_sigma(int(d), int(j), t),), "mean curvature sum, h = 1"),
        Formula("expected_surface", "t", ("d",), ("expected_surface",), lambda t, d: (expected_surface(int(d), t),), "mean total boundary measure"),
        Formula("expected_cells", "t", ("d",), ("expected_cells",), lambda t, d: (expected_cell_count(int(d), t),), "mean number of cells"),
        Formula("var_sigma0", "t", (), ("var_sigma0",), lambda t: (var_sigma0_2d(t),), "variance of the Euler-type sum, d = 2"),
        Formula("cov_sigma0_sigma1", "t", (), ("cov_sigma0_sigma1",), lambda t: (cov_sigma0_sigma1_2d(t),), "covariance of the two lowest curvature sums, d = 2"),
        Formula("capacity_segment", "t", ("length",), ("avoidance",), lambda t, length: (capacity_connected(length / math.pi, t),), "avoidance probability of a segment, isotropic"),
    ]
}


def suggest(name: str) -> list[str]:
    import difflib

    return difflib.get_close_matches(name, list(REGISTRY), n=3, cutoff=0.3) or sorted(REGISTRY)


def tabulate(name: str, grid: Sequence[float], **params) -> tuple[tuple, list[tuple]]:
    if name not in REGISTRY:
        raise KeyError(name)
    f = REGISTRY[name]
    missing = [p for p in f.params if p not in params]
    if missing:
        raise ValueError(f"formula {name!r} needs parameters {missing}")
    rows = [(g,) + tuple(f.evaluate(g, **{p: params[p] for p in f.params})) for g in grid]
    return (f.grid_param,) + f.columns, rows


def table_csv(header: Sequence[str], rows: Sequence[Sequence[float]], schema: str) -> str:
    buf = io.StringIO()
    buf.write(f"# sphere-split v{__version__} schema={schema}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


@lru_cache(maxsize=None)
def figure_variances(t: float = 1.0, d_max: int = 20) -> tuple[float, ...]:
    return tuple(var_surface_isotropic(d, t) for d in range(2, d_max + 1))
