"""Poisson great hypersphere tessellations and their dynamic construction.

A realization is just its list of canonical normals. For d = 2 the full
arrangement is built by inserting the circles one at a time and cutting every
cell each circle hits, which is the same operation ``dynamic_simulate`` runs
in continuous time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import __version__, sphgeo
from ._rng import Draws
from .dirdist import DirectionDistribution, beta_dim, hits_matrix
from .sphgeo import Degenerate, SphericalPolytope, _split2

GP_TOL = 1e-10


@dataclass(eq=False)
class Arrangement2D:
    cells: list[SphericalPolytope]
    edge_lengths: list[float]
    n_vertices: int

    @property
    def n_edges(self) -> int:
        return len(self.edge_lengths)

    @property
    def n_cells(self) -> int:
        return len(self.cells)


@dataclass(eq=False)
class PoissonGHT:
    dim: int
    t: float
    normals: list[tuple]
    seed: int | None = None
    arrangement: Arrangement2D | None = None

    @property
    def n(self) -> int:
        return len(self.normals)


@dataclass(eq=False)
class DynamicPath:
    """Arrival times, the hypersphere at each arrival, cell counts after it."""

    dim: int
    t_end: float
    times: list[float]
    normals: list[tuple]
    cell_counts: list[int]
    cells: list[SphericalPolytope] = field(default_factory=list)


def general_position(normals: Sequence[tuple], d: int, tol: float = GP_TOL) -> bool:
    """Any d normals (or fewer) are linearly independent, checked by singular values."""
    if not normals:
        return True
    U = np.asarray(normals, dtype=float)
    k = min(len(U), d + 1)
    for r in range(2, k + 1):
        for idx in combinations(range(len(U)), r):
            if np.linalg.svd(U[list(idx)], compute_uv=False)[-1] < tol:
                return False
    return True


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(int(rng)), int(rng)


def sample(d: int, kappa_circ: DirectionDistribution | None, t: float, rng, build_arrangement: bool = True) -> PoissonGHT:
    """Poisson(t) many i.i.d. canonical normals from kappa_circ.

    A draw violating general position (a null event) is discarded and redrawn.
    """
    if t < 0 or math.isnan(t):
        raise ValueError("t must be >= 0")
    kappa_circ = kappa_circ or DirectionDistribution.uniform(d)
    if kappa_circ.dim != d:
        raise ValueError("kappa dimension does not match d")
    rng, seed = _as_rng(rng)
    n = int(rng.poisson(t))
    while True:
        U = kappa_circ.sample_normals(n, rng) if n else np.zeros((0, d + 1))
        normals = [sphgeo.canonicalize(tuple(float(x) for x in u)) for u in U]
        if general_position(normals, d):
            break
    P = PoissonGHT(d, t, normals, seed)
    if d == 2 and build_arrangement:
        P.arrangement = arrangement_2d(P)
    return P


def _cut_all(cells: list[SphericalPolytope], u: tuple, eps: float = sphgeo.EPS) -> list[SphericalPolytope]:
    """The operation that dissects every cell met by the great sphere u^perp."""
    out = []
    d = cells[0].dim
    for c in cells:
        if d == 2:
            r = _split2(c, u, eps)
        else:
            r = sphgeo._split_cone(c, np.asarray(u), eps) if sphgeo.hits_interior(u, c, eps) else None
        if r is None:
            out.append(c)
        else:
            out.extend(r[:2])
    return out


def arrangement_2d(P: PoissonGHT) -> Arrangement2D:
    if P.dim != 2:
        raise ValueError("arrangements are built for d = 2 only")
    cells = [sphgeo.full_sphere(2)]
    for u in P.normals:
        cells = _cut_all(cells, u)
    arcs = []
    verts = set()
    for c in cells:
        for start, _, length in sphgeo.boundary_arcs_2d(c):
            arcs.append(length)
        for v in c.vertex_cycle or ():
            if len(c.halfspheres) >= 2:
                verts.add(tuple(round(x, 8) + 0.0 for x in v))
    arcs.sort()
    # every edge bounds exactly two cells
    edges = arcs[::2]
    return Arrangement2D(cells, edges, len(verts))


def dynamic_simulate(d: int, kappa: DirectionDistribution | None, t: float, rng, keep_cells: bool = True) -> DynamicPath:
    """Unit-rate arrivals; each arrival cuts every cell its hypersphere hits."""
    if t < 0 or math.isnan(t):
        raise ValueError("t must be >= 0")
    kappa = kappa or DirectionDistribution.uniform(d)
    rng, _ = _as_rng(rng)
    draws = Draws(rng)
    cells = [sphgeo.full_sphere(d)]
    times, normals, counts = [], [], []
    now = 0.0
    while True:
        now += draws.exponential()
        if now > t:
            break
        while True:
            u = sphgeo.canonicalize(kappa.draw(draws))
            try:
                new = _cut_all(cells, u)
                break
            except Degenerate:
                continue
        cells = new
        times.append(now)
        normals.append(u)
        counts.append(len(cells))
    return DynamicPath(d, t, times, normals, counts, cells if keep_cells else [])


def face_counts(N: int, d: int, k: int) -> int:
    """Number of k-faces of an arrangement of N great hyperspheres in general position."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if k == 0:
        return 2 * math.comb(N, d) if N >= d else 0
    if k == 1:
        if N == d - 1:
            return 1
        return 2 * d * math.comb(N, d) if N >= d else 0
    if k == d:
        # 2 * sum_{i<=d} C(N-1, i) cells for N >= 1
        if N == 0:
            return 1
        return 2 * sum(math.comb(N - 1, i) for i in range(d + 1))
    raise ValueError("k must be 0, 1 or d")


def total_edge_length(N: int, d: int) -> float:
    """Total length of the 1-skeleton: each of the C(N, d-1) great circles contributes 2 pi."""
    return 2.0 * math.pi * math.comb(N, d - 1)


def measured_total_edge_length(P: PoissonGHT) -> float:
    if P.dim != 2:
        raise ValueError("d = 2 only")
    arr = P.arrangement or arrangement_2d(P)
    return math.fsum(arr.edge_lengths)


def surface_measure(P: PoissonGHT) -> float:
    """H^{d-1} of the union of the hyperspheres (they overlap in a null set)."""
    return P.n * beta_dim(P.dim - 1)


def capacity_indicator(P: PoissonGHT, C) -> bool:
    """True iff no hypersphere meets C (one closed set or a list of components)."""
    if not P.normals:
        return True
    return not bool(hits_matrix(np.asarray(P.normals), C).any())


def snapshot_dict(P: PoissonGHT) -> dict:
    out = {
        "schema": "snapshot",
        "version": __version__,
        "model": "poisson",
        "dim": P.dim,
        "t_end": P.t,
        "seed": P.seed,
        "normals": [list(u) for u in P.normals],
    }
    if P.arrangement is not None:
        out["cells"] = [
            {"id": i, "normals": [list(n) for n in c.halfspheres], "vertices": [list(v) for v in c.vertex_cycle or ()]}
            for i, c in enumerate(P.arrangement.cells)
        ]
    return out


def snapshot_json(P: PoissonGHT) -> str:
    return json.dumps(snapshot_dict(P), sort_keys=True)


def normals_csv(P: PoissonGHT) -> str:
    lines = [f"# sphere-split v{__version__} schema=normals", "index,normal_coords"]
    for i, u in enumerate(P.normals):
        lines.append(f"{i}," + " ".join(repr(float(x)) for x in u))
    return "\n".join(lines) + "\n"
