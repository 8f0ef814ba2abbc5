"""Direction distributions for great hyperspheres, hitting measures, and the
special functions used by the closed-form references.

Two families are supported. ``Uniform`` is the rotation-invariant law.
``AxialQuadratic(axis, beta)`` has density proportional to
``1 + beta * <u, axis>**2`` with respect to the uniform law on normals. It is
symmetric under ``u -> -u`` with a bounded density, and it is sampled by
rejection against the uniform law with acceptance bound ``1 + beta``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import sphgeo
from ._report import EstimateReport, make_report, wilson_se
from ._rng import Draws
from .sphgeo import GeodesicSegment, GreatHypersphere, SphericalPolytope, UnitVector

EULER_GAMMA = 0.57721566490153286060651209008240243

# E1 switches from the power series to the continued fraction at this argument.
E1_SWITCH = 1.0
_MACHEPS = 2.220446049250313e-16
_FPMIN = 1e-300


# --- special functions ---------------------------------------------------------------


def euler_gamma() -> float:
    return EULER_GAMMA


def beta_dim(j: int) -> float:
    """H^j(S^j) = 2 pi^{(j+1)/2} / Gamma((j+1)/2)."""
    if j < 0:
        raise ValueError("j must be >= 0")
    return 2.0 * math.pi ** ((j + 1) / 2.0) / math.gamma((j + 1) / 2.0)


def exp_integral_E1(t: float) -> float:
    """E1(t) = int_t^inf e^{-s}/s ds for t > 0.

    Power series for t <= 1, Lentz continued fraction above.
    """
    t = float(t)
    if not t > 0.0 or math.isinf(t):
        if t == math.inf:
            return 0.0
        raise ValueError("E1 needs t > 0")
    if t <= E1_SWITCH:
        total = 0.0
        term = 1.0
        k = 1
        while True:
            term *= -t / k
            add = term / k
            total += add
            if abs(add) < _MACHEPS * abs(total) * 0.1:
                break
            k += 1
        return -EULER_GAMMA - math.log(t) - total
    b = t + 1.0
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _MACHEPS:
            break
    return h * math.exp(-t)


def _gamma_series(a: float, x: float) -> float:
    ap = a
    total = delta = 1.0 / a
    for _ in range(100000):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _MACHEPS * 0.1:
            break
    return total * math.exp(-x + a * math.log(x))


def _gamma_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _MACHEPS:
            break
    return math.exp(-x + a * math.log(x)) * h


def lower_incomplete_gamma(a: float, x: float) -> float:
    """gamma(a, x) = int_0^x s^{a-1} e^{-s} ds (not regularized)."""
    if not a > 0.0:
        raise ValueError("a must be > 0")
    if x < 0.0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return math.gamma(a) - _gamma_cf(a, x)


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Gamma(a, x) = int_x^inf s^{a-1} e^{-s} ds (not regularized)."""
    if not a > 0.0:
        raise ValueError("a must be > 0")
    if x < 0.0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return math.gamma(a)
    if x < a + 1.0:
        return math.gamma(a) - _gamma_series(a, x)
    return _gamma_cf(a, x)


# --- distributions -------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionDistribution:
    dim: int
    kind: str = "uniform"
    axis: tuple | None = None
    beta: float = 0.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("d must be >= 2")
        if self.kind not in ("uniform", "axial"):
            raise ValueError(f"unknown direction distribution kind {self.kind!r}")
        if self.kind == "axial":
            if self.beta < 0:
                raise ValueError("beta must be >= 0")
            axis = self.axis
            if axis is None:
                axis = tuple(float(i == self.dim) for i in range(self.dim + 1))
            axis = UnitVector(axis).coords
            if len(axis) != self.dim + 1:
                raise ValueError("axis dimension does not match d")
            object.__setattr__(self, "axis", axis)
            object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def uniform(cls, d: int) -> "DirectionDistribution":
        return cls(d)

    @classmethod
    def axial(cls, d: int, beta: float, axis=None) -> "DirectionDistribution":
        return cls(d, "axial", None if axis is None else tuple(axis), beta)

    @classmethod
    def parse(cls, spec: str, d: int) -> "DirectionDistribution":
        """Parse ``uniform`` or ``axial:beta=<v>:axis=<c0,c1,...>``."""
        spec = spec.strip()
        if spec == "uniform":
            return cls.uniform(d)
        parts = spec.split(":")
        if parts[0] != "axial":
            raise ValueError(f"unknown kappa spec {spec!r}; expected 'uniform' or 'axial:beta=..:axis=..'")
        beta, axis = None, None
        for p in parts[1:]:
            key, _, val = p.partition("=")
            if key == "beta":
                beta = float(val)
            elif key == "axis":
                axis = tuple(float(v) for v in val.split(","))
            else:
                raise ValueError(f"unknown kappa option {key!r}")
        if beta is None:
            raise ValueError("axial kappa needs beta=<value>")
        return cls.axial(d, beta, axis)

    def spec_string(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return f"axial:beta={self.beta!r}:axis=" + ",".join(repr(x) for x in self.axis)

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform" or self.beta == 0.0

    def density(self, u) -> np.ndarray:
        """Density of normals relative to the uniform probability on S^d."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.is_uniform:
            return np.ones(len(u))
        c = u @ np.asarray(self.axis)
        return (1.0 + self.beta * c * c) / (1.0 + self.beta / (self.dim + 1))

    def draw(self, draws: Draws) -> tuple:
        """One normal (not canonicalized) from a buffered stream."""
        D = self.dim + 1
        unit = draws.unit3 if D == 3 else (lambda: draws.unit(D))
        if self.is_uniform:
            return unit()
        a, beta = self.axis, self.beta
        bound = 1.0 + beta
        while True:
            u = unit()
            c = sum(x * y for x, y in zip(u, a))
            if draws.uniform() * bound <= 1.0 + beta * c * c:
                return u

    def sample_normals(self, n: int, rng: np.random.Generator) -> np.ndarray:
        D = self.dim + 1
        if self.is_uniform:
            g = rng.standard_normal((n, D))
            return g / np.linalg.norm(g, axis=1)[:, None]
        out = []
        have = 0
        a = np.asarray(self.axis)
        while have < n:
            m = int((n - have) * (1.0 + self.beta) / (1.0 + self.beta / D)) + 16
            g = rng.standard_normal((m, D))
            g /= np.linalg.norm(g, axis=1)[:, None]
            c = g @ a
            keep = rng.random(m) * (1.0 + self.beta) <= 1.0 + self.beta * c * c
            out.append(g[keep])
            have += int(keep.sum())
        return np.concatenate(out)[:n]


def sample_great_hypersphere(kappa: DirectionDistribution, rng: np.random.Generator) -> GreatHypersphere:
    return GreatHypersphere.from_normal(kappa.sample_normals(1, rng)[0])


# --- hitting structure of compact sets ----------------------------------------------


def _as_items(C) -> list:
    if isinstance(C, (GeodesicSegment, SphericalPolytope, UnitVector)):
        return [C]
    return list(C)


def _item_points(item) -> np.ndarray | None:
    """Finite generating points of a polytopal item (None = not pointed)."""
    if isinstance(item, UnitVector):
        return np.asarray([item.coords])
    if isinstance(item, GeodesicSegment):
        return np.asarray([item.a.coords, item.b.coords])
    if item.dim == 2:
        if len(item.halfspheres) < 3:
            return None
        return np.asarray(item.vertex_cycle)
    if item.lineality:
        return None
    return np.asarray(item.extreme_rays)


def hits_matrix(U: np.ndarray, C, eps: float = sphgeo.EPS) -> np.ndarray:
    """Boolean mask: which rows of U (normals) give hyperspheres meeting C."""
    hit = np.zeros(len(U), dtype=bool)
    for item in _as_items(C):
        pts = _item_points(item)
        if pts is None:
            # hemisphere, lune, sphere or a cone with lineality: every
            # hypersphere meets it
            hit |= True
            continue
        s = U @ pts.T
        hit |= (s.min(axis=1) <= eps) & (s.max(axis=1) >= -eps)
    return hit


def hull_hits_matrix(U: np.ndarray, B1, B2, eps: float = sphgeo.EPS) -> np.ndarray:
    """Hits of the spherically convex hull of B1 ∪ B2 (positive hull of their points)."""
    pts = []
    for item in _as_items(B1) + _as_items(B2):
        p = _item_points(item)
        if p is None:
            return np.ones(len(U), dtype=bool)
        pts.append(p)
    P = np.vstack(pts)
    s = U @ P.T
    return (s.min(axis=1) <= eps) & (s.max(axis=1) >= -eps)


def hitting_measure_isotropic(c) -> float:
    """Uniform-law probability that a great hypersphere meets c."""
    if isinstance(c, GeodesicSegment):
        return c.length / math.pi
    if isinstance(c, UnitVector):
        return 0.0
    if isinstance(c, GreatHypersphere):
        return 1.0
    if c.dim != 2:
        rep = hitting_measure_estimate(DirectionDistribution.uniform(c.dim), c, 200000, np.random.default_rng(0))
        return rep.point_estimate
    if len(c.halfspheres) == 0:
        return 1.0
    return sphgeo.perimeter_2d(c) / (2.0 * math.pi)


def hitting_measure_estimate(
    kappa: DirectionDistribution, C, n: int, rng: np.random.Generator, reference: float | None = None
) -> EstimateReport:
    t0 = time.perf_counter()
    U = kappa.sample_normals(n, rng)
    k = int(hits_matrix(U, C).sum())
    p, se = wilson_se(k, n)
    return make_report("hitting_measure", n, p, se, reference, wall_time=time.perf_counter() - t0)


def separation_measure_estimate(
    kappa: DirectionDistribution, B1, B2, n: int, rng: np.random.Generator, reference: float | None = None
) -> EstimateReport:
    """Frequency of hyperspheres missing B1 and B2 but meeting their hull."""
    t0 = time.perf_counter()
    U = kappa.sample_normals(n, rng)
    sep = hull_hits_matrix(U, B1, B2) & ~hits_matrix(U, B1) & ~hits_matrix(U, B2)
    p, se = wilson_se(int(sep.sum()), n)
    return make_report("separation_measure", n, p, se, reference, wall_time=time.perf_counter() - t0)


def _axial_two_point(kappa: DirectionDistribution, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact kappa(xy) for the axial family, vectorized over rows of x, y.

    Separating normals form a double wedge of opening ell in the plane of x, y.
    Averaging 1 + beta <u,a>^2 over it splits into the in-plane angular part
    and the orthogonal part, both elementary.
    """
    d = kappa.dim
    a = np.asarray(kappa.axis)
    c = np.clip(np.einsum("ij,ij->i", x, y), -1.0, 1.0)
    ell = np.arccos(c)
    w = y - c[:, None] * x
    nw = np.linalg.norm(w, axis=1)
    safe = nw > 0
    e2 = np.zeros_like(w)
    e2[safe] = w[safe] / nw[safe, None]
    a1 = x @ a
    a2 = e2 @ a
    R2 = a1 * a1 + a2 * a2
    psi = np.arctan2(a2, a1)

    def F(phi):
        return 0.5 * (phi - psi) + 0.25 * np.sin(2.0 * (phi - psi))

    in_plane = 2.0 * R2 * (F(-0.5 * np.pi + ell) - F(-0.5 * np.pi))
    quad = (2.0 / (d + 1)) * in_plane / (2.0 * np.pi) + (ell / np.pi) * (1.0 - R2) / (d + 1)
    val = (ell / np.pi + kappa.beta * quad) / (1.0 + kappa.beta / (d + 1))
    return np.where(safe, val, 0.0)


def kappa_two_point(kappa: DirectionDistribution, x, y, n: int | None = None, rng: np.random.Generator | None = None) -> float:
    """kappa of the great hyperspheres meeting the segment xy.

    Uniform: ell/pi. Axial: Monte Carlo with n samples when n is given,
    otherwise the exact second-moment evaluation.
    """
    xv = np.asarray(sphgeo._as_tuple(x))
    yv = np.asarray(sphgeo._as_tuple(y))
    ell = sphgeo.geodesic_distance(xv, yv)
    if ell >= math.pi - 1e-12:
        raise ValueError("two-point measure needs ell(x, y) < pi")
    if kappa.is_uniform:
        return ell / math.pi
    if n is None:
        return float(_axial_two_point(kappa, xv[None, :], yv[None, :])[0])
    rng = np.random.default_rng(0) if rng is None else rng
    U = kappa.sample_normals(n, rng)
    sa, sb = U @ xv, U @ yv
    return float(np.mean(sa * sb < 0.0))


def kappa_two_point_many(kappa: DirectionDistribution, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Vectorized exact kappa(x_i y_i)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if kappa.is_uniform:
        return np.arccos(np.clip(np.einsum("ij,ij->i", X, Y), -1.0, 1.0)) / np.pi
    return _axial_two_point(kappa, X, Y)
