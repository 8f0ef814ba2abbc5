"""Spherical geometry kernel.

A cell of S^d is a convex cone ``{x : <n_i, x> >= 0}`` intersected with the
sphere, stored by its inward normals plus an extreme structure:

* d = 2: the vertex cycle. Edge k runs from ``vertex_cycle[k]`` to
  ``vertex_cycle[k+1]`` along the great circle with inward normal
  ``halfspheres[k]``, counterclockwise when seen from outside. Zero normals
  means the whole sphere, one normal a hemisphere, two normals a lune.
* d >= 3: extreme rays plus an orthonormal lineality basis, updated by an
  incremental double description step at each split.

Coordinates are plain float tuples so that cells are cheap to build and are
immutable. The d = 2 kernel is pure Python because the simulators spend most
of their time there, on cycles with a handful of vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

EPS = 1e-12
TIGHT = 1e-9
TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi

Vec = tuple  # tuple of floats


class Degenerate(Exception):
    """A great hypersphere met a cell only on its boundary (a null event)."""


class Side(Enum):
    PLUS = "plus"
    MINUS = "minus"
    ON_BOUNDARY = "on_boundary"


# --- small vector helpers on tuples -------------------------------------------------


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _unit3(a):
    n = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    return (a[0] / n, a[1] / n, a[2] / n)


def _neg(a):
    return tuple(-x for x in a)


def _as_tuple(x) -> Vec:
    if isinstance(x, UnitVector):
        return x.coords
    if isinstance(x, GreatHypersphere):
        return x.normal.coords
    return tuple(float(v) for v in np.asarray(x, dtype=float).ravel())


def _normalized(x) -> Vec:
    arr = np.asarray(x, dtype=float).ravel()
    n = float(np.linalg.norm(arr))
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return tuple(float(v) for v in arr / n)


def canonicalize(u) -> Vec:
    """Sign-normalize so that the first nonzero coordinate is positive."""
    u = _as_tuple(u)
    for x in u:
        if x != 0.0:
            return u if x > 0.0 else _neg(u)
    raise ValueError("zero vector has no canonical form")


# --- value types --------------------------------------------------------------------


@dataclass(frozen=True)
class UnitVector:
    coords: tuple

    def __post_init__(self):
        c = _normalized(self.coords)
        if len(c) < 3:
            raise ValueError("points of S^d need d >= 2, i.e. at least 3 coordinates")
        object.__setattr__(self, "coords", c)

    @property
    def dim_ambient(self) -> int:
        return len(self.coords) - 1

    def __neg__(self) -> "UnitVector":
        return UnitVector(_neg(self.coords))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class GreatHypersphere:
    """``u^perp`` intersected with S^d, keyed by its canonical unit normal."""

    normal: UnitVector

    def __post_init__(self):
        n = self.normal if isinstance(self.normal, UnitVector) else UnitVector(self.normal)
        object.__setattr__(self, "normal", UnitVector(canonicalize(n.coords)))

    @classmethod
    def from_normal(cls, u) -> "GreatHypersphere":
        return cls(UnitVector(_as_tuple(u)))

    @property
    def dim(self) -> int:
        return self.normal.dim_ambient


@dataclass(frozen=True)
class GeodesicSegment:
    a: UnitVector
    b: UnitVector
    length: float = field(init=False)

    def __post_init__(self):
        a = self.a if isinstance(self.a, UnitVector) else UnitVector(self.a)
        b = self.b if isinstance(self.b, UnitVector) else UnitVector(self.b)
        if a.dim_ambient != b.dim_ambient:
            raise ValueError("endpoints live on spheres of different dimension")
        length = geodesic_distance(a, b)
        if length >= math.pi - 1e-12:
            raise ValueError("segment of length pi has no unique geodesic")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "length", length)

    def point(self, s: float) -> Vec:
        """Point at arc length s from a."""
        a = np.asarray(self.a.coords)
        b = np.asarray(self.b.coords)
        w = b - a * float(a @ b)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return self.a.coords
        return tuple(np.cos(s) * a + np.sin(s) * w / nw)


@dataclass(frozen=True, eq=False)
class SphericalPolytope:
    """A convex spherical polytope (see module docs for the representation)."""

    dim: int
    halfspheres: tuple
    vertex_cycle: tuple | None = None
    extreme_rays: tuple | None = None
    lineality: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self) -> str:
        m = len(self.halfspheres)
        if self.dim == 1:
            return "circle" if m == 0 else "arc"
        if self.dim == 2:
            return ("sphere", "hemisphere", "lune")[m] if m < 3 else "polygon"
        if m == 0:
            return "sphere"
        return "cone"

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = _as_tuple(x)
        return all(_dot(n, x) >= -tol for n in self.halfspheres)

    def normals_array(self) -> np.ndarray:
        arr = self._cache.get("A")
        if arr is None:
            arr = np.asarray(self.halfspheres, dtype=float).reshape(-1, self.dim + 1)
            self._cache["A"] = arr
        return arr


@dataclass(frozen=True, eq=False)
class Piece:
    """The (d-1)-dimensional polytope c ∩ S created by a split.

    ``shape`` lives in S^{d-1} expressed in the orthonormal ``frame`` of
    ``normal^perp`` (rows of ``frame``). For d = 2 ``endpoints`` holds the arc
    endpoints in ambient coordinates (None for a full circle).
    """

    normal: Vec
    frame: tuple
    shape: SphericalPolytope
    measure: float | None
    endpoints: tuple | None = None

    @property
    def dim(self) -> int:
        return len(self.normal) - 1

    def to_ambient(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) @ np.asarray(self.frame)


# --- elementary operations ------------------------------------------------------------


def geodesic_distance(x, y) -> float:
    x, y = _as_tuple(x), _as_tuple(y)
    if len(x) != len(y):
        raise ValueError("dimension mismatch")
    c = _dot(x, y)
    return math.acos(max(-1.0, min(1.0, c)))


def side_of(S: GreatHypersphere, x, eps: float = EPS) -> Side:
    v = _dot(S.normal.coords, _as_tuple(x))
    if v > eps:
        return Side.PLUS
    if v < -eps:
        return Side.MINUS
    return Side.ON_BOUNDARY


def segment_hit(S, seg: GeodesicSegment, eps: float = EPS) -> bool:
    u = _as_tuple(S)
    sa = _dot(u, seg.a.coords)
    sb = _dot(u, seg.b.coords)
    if abs(sa) <= eps or abs(sb) <= eps:
        return True
    return (sa > 0.0) != (sb > 0.0)


def frame_of(u) -> tuple:
    """Deterministic orthonormal basis (rows) of u^perp via a Householder map."""
    u = np.asarray(_as_tuple(u))
    D = u.size
    k = int(np.argmax(np.abs(u)))
    e = np.zeros(D)
    e[k] = 1.0 if u[k] < 0 else -1.0
    v = u - e
    H = np.eye(D) - 2.0 * np.outer(v, v) / float(v @ v)
    # H maps u to e; the other columns of H span u^perp
    rows = [H[:, j] for j in range(D) if j != k]
    return tuple(tuple(float(x) for x in r) for r in rows)


def sample_uniform_sphere(d: int, rng: np.random.Generator) -> UnitVector:
    if d < 2:
        raise ValueError("d must be >= 2")
    while True:
        g = rng.standard_normal(d + 1)
        n = np.linalg.norm(g)
        if n > 1e-300:
            return UnitVector(tuple(g / n))


def sample_uniform_on_subsphere(S: GreatHypersphere, rng: np.random.Generator) -> UnitVector:
    F = np.asarray(frame_of(S.normal.coords))
    while True:
        g = rng.standard_normal(F.shape[0])
        n = np.linalg.norm(g)
        if n > 1e-300:
            x = (g / n) @ F
            # re-project to kill rounding drift before normalizing
            u = np.asarray(S.normal.coords)
            x = x - u * float(u @ x)
            return UnitVector(tuple(x))


# --- constructors ---------------------------------------------------------------------


def full_sphere(d: int) -> SphericalPolytope:
    if d == 2:
        return SphericalPolytope(2, (), ())
    if d == 1:
        return SphericalPolytope(1, (), ())
    basis = tuple(tuple(float(i == j) for j in range(d + 1)) for i in range(d + 1))
    return SphericalPolytope(d, (), None, (), basis)


def hemisphere(u) -> SphericalPolytope:
    """The closed half-sphere {<u, x> >= 0} (u is not canonicalized)."""
    u = _normalized(_as_tuple(u))
    d = len(u) - 1
    if d == 2:
        return SphericalPolytope(2, (u,), ())
    return SphericalPolytope(d, (u,), None, (u,), frame_of(u))


def _polygon(vertices, normals) -> SphericalPolytope:
    return SphericalPolytope(2, tuple(normals), tuple(vertices))


def polytope_from_halfspheres(normals: Iterable, d: int | None = None) -> SphericalPolytope:
    """Intersect closed half-spheres; the result must be full-dimensional."""
    normals = [_normalized(_as_tuple(n)) for n in normals]
    if d is None:
        if not normals:
            raise ValueError("dimension needed for an empty constraint list")
        d = len(normals[0]) - 1
    c = full_sphere(d)
    for n in normals:
        S = GreatHypersphere.from_normal(n)
        try:
            hit = hits_interior(S, c)
        except Degenerate:
            hit = False
        if hit:
            plus, minus, _ = split(c, S)
            c = plus if _dot(S.normal.coords, n) > 0 else minus
        elif _extreme_side(c, n) < 0:
            raise ValueError("half-space intersection has empty interior")
    return c


def _extreme_side(c: SphericalPolytope, n) -> int:
    """+1 if c lies in {<n,x> >= 0}, -1 if in {<= 0} (assuming no interior hit)."""
    pts = c.vertex_cycle if c.dim == 2 else c.extreme_rays
    if not pts:
        return 1 if c.halfspheres and _dot(c.halfspheres[0], n) > 0 else -1
    vals = [_dot(p, n) for p in pts]
    return 1 if max(vals) > -min(vals) else -1


# --- d = 2 kernel -----------------------------------------------------------------------


def _hits2(c: SphericalPolytope, u: Vec, eps: float) -> bool:
    m = len(c.halfspheres)
    if m == 0:
        return True
    if m == 1:
        n = c.halfspheres[0]
        s = _dot3(u, n)
        if 1.0 - s * s <= eps * eps:
            raise Degenerate("circle coincides with the hemisphere boundary")
        return True
    pos = neg = False
    for v in c.vertex_cycle:
        s = _dot3(u, v)
        if s > eps:
            pos = True
        elif s < -eps:
            neg = True
        else:
            raise Degenerate("great circle passes through a vertex")
    return pos and neg


def _crossing(N, V, u):
    """Point where the edge on circle N starting at V meets u^perp."""
    p = _unit3(_cross(N, u))
    if _dot3(p, _cross(N, V)) < 0.0:
        p = (-p[0], -p[1], -p[2])
    return p


def _arc_length(N, a, b) -> float:
    th = math.atan2(_dot3(_cross(N, a), b), _dot3(a, b))
    return th + TWO_PI if th < 0.0 else th


def _arc_piece(u: Vec, p: Vec, q: Vec) -> Piece:
    e2 = _cross(u, p)
    L = math.atan2(_dot3(e2, q), _dot3(p, q))
    if L < 0.0:
        L += TWO_PI
    sL, cL = math.sin(L), math.cos(L)
    shape = SphericalPolytope(1, ((0.0, 1.0), (sL, -cL)), ((1.0, 0.0), (cL, sL)))
    return Piece(u, (p, e2), shape, L, (p, q))


def _circle_piece(u: Vec) -> Piece:
    return Piece(u, frame_of(u), SphericalPolytope(1, (), ()), TWO_PI, None)


def _split2(c: SphericalPolytope, u: Vec, eps: float):
    normals = c.halfspheres
    m = len(normals)
    mu = (-u[0], -u[1], -u[2])
    if m == 0:
        return hemisphere(u), hemisphere(mu), _circle_piece(u)
    if m == 1:
        n = normals[0]
        s = _dot3(u, n)
        if 1.0 - s * s <= eps * eps:
            raise Degenerate("circle coincides with the hemisphere boundary")
        p = _unit3(_cross(n, u))
        w = (u[0] - s * n[0], u[1] - s * n[1], u[2] - s * n[2])
        if _dot3(p, _cross(n, w)) < 0.0:
            p = (-p[0], -p[1], -p[2])
        q = (-p[0], -p[1], -p[2])
        plus = _polygon((q, p), (n, u))
        minus = _polygon((p, q), (n, mu))
        return plus, minus, _arc_piece(u, p, q)
    V = c.vertex_cycle
    s = []
    for v in V:
        x = _dot3(u, v)
        if -eps <= x <= eps:
            raise Degenerate("great circle passes through a vertex")
        s.append(x)
    k = j = -1
    for i in range(m):
        a, b = s[i], s[(i + 1) % m]
        if a > 0.0 and b < 0.0:
            k = i
        elif a < 0.0 and b > 0.0:
            j = i
    if k < 0 or j < 0:
        return None
    p = _crossing(normals[k], V[k], u)
    q = _crossing(normals[j], V[j], u)
    pv, pn = [q], [normals[j]]
    i = (j + 1) % m
    while True:
        pv.append(V[i])
        pn.append(normals[i])
        if i == k:
            break
        i = (i + 1) % m
    pv.append(p)
    pn.append(u)
    mv, mn = [p], [normals[k]]
    i = (k + 1) % m
    while True:
        mv.append(V[i])
        mn.append(normals[i])
        if i == j:
            break
        i = (i + 1) % m
    mv.append(q)
    mn.append(mu)
    return _polygon(pv, pn), _polygon(mv, mn), _arc_piece(u, p, q)


def interior_angles_2d(c: SphericalPolytope) -> list[float]:
    _require_dim2(c)
    N, V = c.halfspheres, c.vertex_cycle
    m = len(V)
    out = []
    for i in range(m):
        v = V[i]
        t_out = _cross(N[i], v)
        t_back = _cross(v, N[i - 1])
        out.append(math.atan2(_dot3(_cross(t_out, t_back), v), _dot3(t_out, t_back)))
    return out


def perimeter_2d(c: SphericalPolytope) -> float:
    _require_dim2(c)
    val = c._cache.get("perimeter")
    if val is None:
        m = len(c.halfspheres)
        if m == 0:
            val = 0.0
        elif m == 1:
            val = TWO_PI
        else:
            N, V = c.halfspheres, c.vertex_cycle
            val = 0.0
            for i in range(m):
                val += _arc_length(N[i], V[i], V[(i + 1) % m])
        c._cache["perimeter"] = val
    return val


def polygon_area_2d(c: SphericalPolytope) -> float:
    _require_dim2(c)
    val = c._cache.get("area")
    if val is None:
        m = len(c.halfspheres)
        if m == 0:
            val = FOUR_PI
        elif m == 1:
            val = TWO_PI
        else:
            val = sum(interior_angles_2d(c)) - (m - 2) * math.pi
        c._cache["area"] = val
    return val


def _require_dim2(c: SphericalPolytope):
    if c.dim != 2:
        raise ValueError("this operation is defined for d = 2 only")


def intrinsic_volumes_2d(c) -> tuple[float, float, float]:
    """(V0, V1, V2) of a polytope, great circle, or geodesic segment in S^2."""
    if isinstance(c, GreatHypersphere):
        if c.dim != 2:
            raise ValueError("this operation is defined for d = 2 only")
        return (0.0, 1.0, 0.0)
    if isinstance(c, GeodesicSegment):
        if c.a.dim_ambient != 2:
            raise ValueError("this operation is defined for d = 2 only")
        return (0.5, c.length / TWO_PI, 0.0)
    _require_dim2(c)
    m = len(c.halfspheres)
    if m == 0:
        return (0.0, 0.0, 1.0)
    v0 = 0.0
    if m >= 2:
        v0 = sum(math.pi - a for a in interior_angles_2d(c)) / FOUR_PI
    return (v0, perimeter_2d(c) / FOUR_PI, polygon_area_2d(c) / FOUR_PI)


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(n: int):
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS_CACHE[n]


def boundary_arcs_2d(c: SphericalPolytope) -> list[tuple[Vec, Vec, float]]:
    """(start, unit tangent at start, length) for every boundary arc."""
    _require_dim2(c)
    m = len(c.halfspheres)
    if m == 0:
        return []
    if m == 1:
        n = c.halfspheres[0]
        e1 = frame_of(n)[0]
        return [(e1, _cross(n, e1), TWO_PI)]
    N, V = c.halfspheres, c.vertex_cycle
    return [(V[i], _cross(N[i], V[i]), _arc_length(N[i], V[i], V[(i + 1) % m])) for i in range(m)]


def _bounding_cap(c: SphericalPolytope):
    """(center, angular radius) of a cap containing c, or None for the whole sphere."""
    if len(c.halfspheres) < 3:
        return None
    V = np.asarray(c.vertex_cycle)
    ctr = V.sum(axis=0)
    nrm = np.linalg.norm(ctr)
    if nrm < 1e-12:
        return None
    ctr /= nrm
    r = float(np.arccos(np.clip(V @ ctr, -1.0, 1.0)).max())
    if r >= math.pi / 2:
        return None
    return ctr, r


def curvature_measure_2d(
    c: SphericalPolytope,
    j: int,
    h: Callable[[np.ndarray], np.ndarray] | None = None,
    n_nodes: int = 64,
    n_samples: int = 20000,
    rng: np.random.Generator | None = None,
) -> float:
    """phi_j(c, h) for d = 2.

    ``h`` maps an (n, 3) array of points to n weights; None means h = 1.
    """
    _require_dim2(c)
    if j not in (0, 1, 2):
        raise ValueError("j must be 0, 1 or 2")
    if h is None:
        return intrinsic_volumes_2d(c)[j]
    if j == 0:
        if len(c.halfspheres) < 2:
            return 0.0
        ang = np.asarray(interior_angles_2d(c))
        w = np.asarray(h(np.asarray(c.vertex_cycle)), dtype=float)
        return float(np.sum(w * (math.pi - ang)) / FOUR_PI)
    if j == 1:
        x, wts = _gauss(n_nodes)
        total = 0.0
        for a, tang, L in boundary_arcs_2d(c):
            s = 0.5 * L * (x + 1.0)
            pts = np.cos(s)[:, None] * np.asarray(a) + np.sin(s)[:, None] * np.asarray(tang)
            total += 0.5 * L * float(np.dot(wts, h(pts)))
        return total / FOUR_PI
    rng = np.random.default_rng(0) if rng is None else rng
    cap = _bounding_cap(c)
    if cap is None:
        g = rng.standard_normal((n_samples, 3))
        pts = g / np.linalg.norm(g, axis=1)[:, None]
        cap_area = FOUR_PI
    else:
        ctr, r = cap
        z = rng.uniform(math.cos(r), 1.0, n_samples)
        phi = rng.uniform(0.0, TWO_PI, n_samples)
        e1, e2 = (np.asarray(v) for v in frame_of(tuple(ctr)))
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        pts = z[:, None] * ctr + rho[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
        cap_area = TWO_PI * (1.0 - math.cos(r))
    A = c.normals_array()
    inside = np.all(pts @ A.T >= 0.0, axis=1) if len(A) else np.ones(len(pts), bool)
    vals = np.where(inside, np.asarray(h(pts), dtype=float), 0.0)
    return float(cap_area * vals.mean() / FOUR_PI)


# --- general dimension: double description ------------------------------------------


def _orthonormal_rows(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if M.size == 0:
        return M.reshape(0, M.shape[-1] if M.ndim == 2 else 0)
    _, sv, vt = np.linalg.svd(M, full_matrices=False)
    return vt[sv > tol * max(1.0, sv[0])]


def _rank(M: np.ndarray) -> int:
    if M.shape[0] == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > 1e-9))


def _tuples(M) -> tuple:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return ()
    return tuple(tuple(float(x) for x in row) for row in M.reshape(len(M), -1))


def _cone(dim, A, R, L) -> SphericalPolytope:
    return SphericalPolytope(dim, _tuples(A), None, _tuples(R), _tuples(L))


def _prune(A: np.ndarray, R: np.ndarray, L: np.ndarray) -> np.ndarray:
    """Keep only facet-defining constraints."""
    D = A.shape[1]
    keep = []
    for i, a in enumerate(A):
        T = R[np.abs(R @ a) <= TIGHT] if len(R) else R
        M = np.vstack([T, L]) if len(L) else T
        if _rank(M) == D - 1:
            keep.append(i)
    return A[keep]


def _cone_arrays(c: SphericalPolytope):
    D = c.dim + 1
    A = np.asarray(c.halfspheres, dtype=float).reshape(-1, D)
    R = np.asarray(c.extreme_rays or (), dtype=float).reshape(-1, D)
    L = np.asarray(c.lineality or (), dtype=float).reshape(-1, D)
    return A, R, L


def _hits_cone(c: SphericalPolytope, u: np.ndarray, eps: float) -> bool:
    A, R, L = _cone_arrays(c)
    if len(L) and np.linalg.norm(L @ u) > eps:
        return True
    s = R @ u
    if len(s) == 0 or np.all(np.abs(s) <= eps):
        raise Degenerate("hypersphere meets the cell only in its boundary")
    return bool(np.any(s > eps) and np.any(s < -eps))


def _hits_lp(c: SphericalPolytope, u: np.ndarray, eps: float) -> bool:
    from scipy.optimize import linprog

    A = c.normals_array()
    D = u.size
    if len(A) == 0:
        return True
    bounds = [(-1.0, 1.0)] * D
    hi = linprog(-u, A_ub=-A, b_ub=np.zeros(len(A)), bounds=bounds, method="highs")
    lo = linprog(u, A_ub=-A, b_ub=np.zeros(len(A)), bounds=bounds, method="highs")
    top, bot = -hi.fun, lo.fun
    if top <= eps and bot >= -eps:
        raise Degenerate("hypersphere meets the cell only in its boundary")
    return bool(top > eps and bot < -eps)


def _split_cone(c: SphericalPolytope, u: np.ndarray, eps: float):
    A, R, L = _cone_arrays(c)
    D = u.size
    d = c.dim
    if len(L):
        pl = L @ u
        npl = float(np.linalg.norm(pl))
        if npl > eps:
            l0 = pl @ L / npl
            Lp = _orthonormal_rows(L - np.outer(L @ l0, l0))
            Rp = R - np.outer((R @ u) / npl, l0) if len(R) else R
            if len(Rp) and len(Lp):
                Rp = Rp - (Rp @ Lp.T) @ Lp
            if len(Rp):
                Rp = Rp / np.linalg.norm(Rp, axis=1)[:, None]
            A_plus = _prune(np.vstack([A, u]), np.vstack([Rp, l0]) if len(Rp) else l0[None, :], Lp)
            A_minus = _prune(np.vstack([A, -u]), np.vstack([Rp, -l0]) if len(Rp) else -l0[None, :], Lp)
            plus = _cone(d, A_plus, np.vstack([Rp, l0]) if len(Rp) else l0[None, :], Lp)
            minus = _cone(d, A_minus, np.vstack([Rp, -l0]) if len(Rp) else -l0[None, :], Lp)
            return plus, minus, _cone_piece(u, A, Rp, Lp)
    s = R @ u
    if np.any(np.abs(s) <= eps):
        raise Degenerate("hypersphere passes through an extreme ray")
    pos = np.flatnonzero(s > 0)
    neg = np.flatnonzero(s < 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("split requires a hypersphere hitting the cell interior")
    tight = np.abs(A @ R.T) <= TIGHT
    target = D - len(L) - 2
    new = []
    for i in pos:
        for j in neg:
            common = tight[:, i] & tight[:, j]
            if target > 0 and (common.sum() < target or _rank(A[common]) != target):
                continue
            w = s[i] * R[j] - s[j] * R[i]
            new.append(w / np.linalg.norm(w))
    W = np.asarray(new).reshape(-1, D)
    Rplus = np.vstack([R[pos], W])
    Rminus = np.vstack([R[neg], W])
    plus = _cone(d, _prune(np.vstack([A, u]), Rplus, L), Rplus, L)
    minus = _cone(d, _prune(np.vstack([A, -u]), Rminus, L), Rminus, L)
    return plus, minus, _cone_piece(u, A, W, L)


def _cone_piece(u: np.ndarray, A: np.ndarray, R: np.ndarray, L: np.ndarray) -> Piece:
    """Express the cone section c ∩ u^perp in a frame of u^perp."""
    F = np.asarray(frame_of(tuple(u)))
    Rf = R @ F.T if len(R) else np.zeros((0, F.shape[0]))
    Lf = _orthonormal_rows(L @ F.T) if len(L) else np.zeros((0, F.shape[0]))
    if len(Rf):
        Rf = Rf / np.linalg.norm(Rf, axis=1)[:, None]
    dim = F.shape[0] - 1
    Af = A @ F.T
    nz = np.linalg.norm(Af, axis=1) > 1e-12
    Af = Af[nz] / np.linalg.norm(Af[nz], axis=1)[:, None] if nz.any() else np.zeros((0, dim + 1))
    if len(Af):
        Af = _prune(Af, Rf, Lf)
    if dim == 2:
        shape = _polygon_from_generators(Rf, Lf)
        measure = polygon_area_2d(shape)
    else:
        shape = _cone(dim, Af, Rf, Lf)
        measure = None
    return Piece(tuple(float(x) for x in u), _tuples(F), shape, measure, None)


def _polygon_from_generators(R: np.ndarray, L: np.ndarray) -> SphericalPolytope:
    """Convert cone generators in R^3 into the d = 2 vertex-cycle form."""
    q = len(L)
    if q == 3:
        return full_sphere(2)
    if q == 2:
        n = R[0] - (R[0] @ L.T) @ L
        return hemisphere(tuple(n / np.linalg.norm(n)))
    if q == 1:
        ell = L[0]
        r1, r2 = R[0], R[1]
        n1 = np.cross(ell, r1)
        n1 = n1 / np.linalg.norm(n1)
        if n1 @ r2 < 0:
            n1 = -n1
        n2 = np.cross(ell, r2)
        n2 = n2 / np.linalg.norm(n2)
        if n2 @ r1 < 0:
            n2 = -n2
        v = ell if np.linalg.det(np.vstack([n2, n1, ell])) > 0 else -ell
        return _polygon((tuple(v), tuple(-v)), (tuple(n1), tuple(n2)))
    ctr = R.sum(axis=0)
    ctr /= np.linalg.norm(ctr)
    e1 = np.asarray(frame_of(tuple(ctr))[0])
    e2 = np.cross(ctr, e1)
    order = np.argsort(np.arctan2(R @ e2, R @ e1))
    V = R[order]
    m = len(V)
    normals = []
    for i in range(m):
        n = np.cross(V[i], V[(i + 1) % m])
        normals.append(tuple(n / np.linalg.norm(n)))
    return _polygon(_tuples(V), normals)


# --- public dispatch ----------------------------------------------------------------


def hits_interior(S, c: SphericalPolytope, eps: float = EPS) -> bool:
    """True iff the great hypersphere S meets the interior of c.

    Raises Degenerate when S only touches c along boundary structure.
    """
    u = _as_tuple(S)
    if len(u) != c.dim + 1:
        raise ValueError("dimension mismatch")
    if c.dim == 2:
        return _hits2(c, u, eps)
    if c.dim <= 3:
        return _hits_cone(c, np.asarray(u), eps)
    return _hits_lp(c, np.asarray(u), eps)


def split(c: SphericalPolytope, S, eps: float = EPS):
    """Split c by S into (c ∩ S+, c ∩ S-, c ∩ S).

    S+ is the side of nonnegative inner product with the canonical normal.
    """
    u = canonicalize(_normalized(_as_tuple(S))) if not isinstance(S, GreatHypersphere) else S.normal.coords
    if len(u) != c.dim + 1:
        raise ValueError("dimension mismatch")
    if c.dim == 2:
        out = _split2(c, u, eps)
        if out is None:
            raise ValueError("split requires a great circle hitting the cell interior")
        return out
    if not hits_interior(u, c, eps):
        raise ValueError("split requires a hypersphere hitting the cell interior")
    return _split_cone(c, np.asarray(u), eps)


def piece_measure(
    piece: Piece,
    n_samples: int = 20000,
    rng: np.random.Generator | None = None,
    return_se: bool = False,
):
    """H^{d-1}(c ∩ S). Exact for d <= 3; Monte Carlo membership for d >= 4."""
    if piece.measure is not None:
        return (piece.measure, 0.0) if return_se else piece.measure
    shape = piece.shape
    k = shape.dim
    rng = np.random.default_rng(0) if rng is None else rng
    g = rng.standard_normal((n_samples, k + 1))
    pts = g / np.linalg.norm(g, axis=1)[:, None]
    A = shape.normals_array()
    inside = np.all(pts @ A.T >= 0.0, axis=1) if len(A) else np.ones(n_samples, bool)
    beta = 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)
    p = inside.mean()
    val = beta * p
    se = beta * math.sqrt(max(p * (1 - p), 0.0) / n_samples)
    return (val, se) if return_se else val


def cell_volume_estimate(c: SphericalPolytope, n_samples: int, rng: np.random.Generator):
    """Monte Carlo H^d(c) with its standard error (any d)."""
    D = c.dim + 1
    g = rng.standard_normal((n_samples, D))
    pts = g / np.linalg.norm(g, axis=1)[:, None]
    A = c.normals_array()
    inside = np.all(pts @ A.T >= 0.0, axis=1) if len(A) else np.ones(n_samples, bool)
    beta = 2.0 * math.pi ** (D / 2) / math.gamma(D / 2)
    p = inside.mean()
    return beta * p, beta * math.sqrt(max(p * (1 - p), 0.0) / n_samples)


def check_consistency(c: SphericalPolytope, tol: float = 1e-10) -> bool:
    """H/V consistency: extreme structure satisfies every constraint."""
    pts = c.vertex_cycle if c.dim <= 2 else c.extreme_rays
    for p in pts or ():
        for n in c.halfspheres:
            if _dot(n, p) < -tol:
                return False
    if c.dim == 2 and len(c.halfspheres) >= 2:
        m = len(c.halfspheres)
        for i, v in enumerate(c.vertex_cycle):
            if abs(_dot3(c.halfspheres[i], v)) > tol or abs(_dot3(c.halfspheres[i - 1], v)) > tol:
                return False
            if m > 2 and _arc_length(c.halfspheres[i], v, c.vertex_cycle[(i + 1) % m]) >= math.pi:
                return False
    return True


def cone_to_polygon(c: SphericalPolytope) -> SphericalPolytope:
    """Vertex-cycle form of a d = 2 cone given by generators."""
    if c.dim != 2:
        raise ValueError("d = 2 only")
    R = np.asarray(c.extreme_rays or (), dtype=float).reshape(-1, 3)
    L = np.asarray(c.lineality or (), dtype=float).reshape(-1, 3)
    return _polygon_from_generators(R, L)


def general_cone(c: SphericalPolytope) -> SphericalPolytope:
    """Rebuild a d = 2 cell through the general double description path (testing aid)."""
    if c.dim != 2:
        return c
    D = 3
    full = SphericalPolytope(2, (), None, (), _tuples(np.eye(D)))
    cur = full
    for n in c.halfspheres:
        u = np.asarray(n)
        if len(cur.halfspheres) == 0 or _hits_cone(cur, u, EPS):
            plus, _, _ = _split_cone(cur, u, EPS)
            cur = plus
    return cur


def points_in_cells(points: np.ndarray, cells: Sequence[SphericalPolytope]) -> np.ndarray:
    """Index of the containing cell for each point (-1 if none)."""
    out = np.full(len(points), -1, dtype=int)
    for idx, c in enumerate(cells):
        A = c.normals_array()
        inside = np.all(points @ A.T >= -1e-14, axis=1) if len(A) else np.ones(len(points), bool)
        out[(out < 0) & inside] = idx
    return out
