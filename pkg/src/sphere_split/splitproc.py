"""Exact simulation of the splitting tessellation process on S^d.

``simulate`` uses uniformization. Candidate times arrive at rate equal to the
current number of cells. At each candidate a cell is picked uniformly and a
hypersphere S is drawn from kappa. The split happens iff S meets the cell
interior, otherwise the candidate is rejected. Each cell therefore splits at
rate ``kappa(S[c])`` (at most 1, since kappa is a probability), and an
accepted S is distributed as kappa restricted to the hyperspheres hitting
the cell. These are exactly the dynamics of the splitting process, and the
simulator only needs a hit predicate, never the value of ``kappa(S[c])``.
Efficiency degrades as cells shrink. For d = 2 and the uniform law,
``simulate_direct_2d`` runs the competing-exponentials construction directly
and serves as an independent twin.

Event pieces are stored at birth and never mutated. Z_t, the maximal faces
and H^{d-1}(Z_t) are all read off the event log.

For an antipodal pair {x, -x} the avoidance probability is 1 at every
t >= 0, and the indicator is asserted for all t.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__, sphgeo
from ._rng import Draws
from .dirdist import DirectionDistribution, beta_dim
from .sphgeo import (
    Degenerate,
    GeodesicSegment,
    GreatHypersphere,
    Piece,
    SphericalPolytope,
    UnitVector,
    _cross,
    _dot,
    _dot3,
    _split2,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class SplittingEvent:
    time: float
    parent_cell_id: int
    normal: tuple
    piece: Piece
    child_ids: tuple[int, int]

    @property
    def hypersphere(self) -> GreatHypersphere:
        return GreatHypersphere.from_normal(self.normal)


@dataclass(eq=False)
class SplittingTessellation:
    dim: int
    t_end: float
    cells: dict[int, SphericalPolytope]
    events: list[SplittingEvent]
    rejected_count: int = 0
    seed: int | None = None
    initial_count: int = 1
    audit: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class MaximalSegment:
    birth_time: float
    geometry: Piece
    length: float


def _canon3(u):
    if u[0] > 0.0 or (u[0] == 0.0 and (u[1] > 0.0 or (u[1] == 0.0 and u[2] > 0.0))):
        return u
    return (-u[0], -u[1], -u[2])


def _as_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    seed = int(rng)
    return np.random.default_rng(seed), seed


def validate_initial(cells: Sequence[SphericalPolytope], n_probe: int = 20000) -> None:
    """Check that the given cells partition S^d (probe points land in exactly one)."""
    if not cells:
        raise ValueError("initial tessellation is empty")
    d = cells[0].dim
    if any(c.dim != d for c in cells):
        raise ValueError("initial cells have mixed dimensions")
    if d == 2:
        total = sum(sphgeo.polygon_area_2d(c) for c in cells)
        if abs(total - 4.0 * math.pi) > 1e-8:
            raise ValueError("initial cells do not partition the sphere (area mismatch)")
    g = np.random.default_rng(12345).standard_normal((n_probe, d + 1))
    pts = g / np.linalg.norm(g, axis=1)[:, None]
    count = np.zeros(n_probe, dtype=int)
    for c in cells:
        A = c.normals_array()
        count += np.all(pts @ A.T > 1e-9, axis=1) if len(A) else 1
    if np.any(count > 1):
        raise ValueError("initial cells overlap")


def simulate(
    d: int,
    kappa: DirectionDistribution | None,
    t: float,
    rng,
    initial: Sequence[SphericalPolytope] | None = None,
    max_events: int | None = None,
    audit: bool = False,
    eps: float = sphgeo.EPS,
    validate: bool = True,
) -> SplittingTessellation:
    """Sample Y_t by uniformized thinning (see module docs).

    ``validate=False`` skips the partition check of ``initial``; batch
    drivers validate once and reuse the cells.
    """
    if t < 0 or math.isnan(t):
        raise ValueError("t must be >= 0")
    if math.isinf(t) and max_events is None:
        raise ValueError("infinite horizon needs max_events")
    kappa = kappa or DirectionDistribution.uniform(d)
    if kappa.dim != d:
        raise ValueError("kappa dimension does not match d")
    rng, seed = _as_rng(rng)
    if initial is None:
        init = [sphgeo.full_sphere(d)]
    else:
        init = list(initial)
        if validate:
            validate_initial(init)
    cells = {i: c for i, c in enumerate(init)}
    ids = list(cells)
    next_id = len(ids)
    events: list[SplittingEvent] = []
    rejected = 0
    draws = Draws(rng)
    now = 0.0
    worst_area = worst_perim = 0.0
    limit = math.inf if max_events is None else max_events
    while len(events) < limit:
        n = len(ids)
        now += draws.exponential() / n
        if now > t:
            break
        k = draws.index(n)
        cid = ids[k]
        c = cells[cid]
        while True:
            u = kappa.draw(draws)
            try:
                if d == 2:
                    u = _canon3(u)
                    out = _split2(c, u, eps)
                else:
                    u = sphgeo.canonicalize(u)
                    out = None
                    if sphgeo.hits_interior(u, c, eps):
                        out = sphgeo._split_cone(c, np.asarray(u), eps)
                break
            except Degenerate:
                continue
        if out is None:
            rejected += 1
            continue
        plus, minus, piece = out
        if audit and d == 2:
            a0 = sphgeo.polygon_area_2d(c)
            worst_area = max(worst_area, abs(a0 - sphgeo.polygon_area_2d(plus) - sphgeo.polygon_area_2d(minus)))
            worst_perim = max(
                worst_perim,
                abs(sphgeo.perimeter_2d(plus) + sphgeo.perimeter_2d(minus) - sphgeo.perimeter_2d(c) - 2.0 * piece.measure),
            )
        a, b = next_id, next_id + 1
        next_id += 2
        del cells[cid]
        cells[a] = plus
        cells[b] = minus
        ids[k] = a
        ids.append(b)
        events.append(SplittingEvent(now, cid, u, piece, (a, b)))
    Y = SplittingTessellation(d, t, cells, events, rejected, seed, len(init))
    if audit:
        Y.audit = {"split_area": worst_area, "split_perimeter": worst_perim}
    return Y


def simulate_direct_2d(t: float, rng, kappa: DirectionDistribution | None = None, eps: float = sphgeo.EPS) -> SplittingTessellation:
    """Competing exponentials with exact per-cell rates perimeter / (2 pi)."""
    if kappa is not None and not (kappa.dim == 2 and kappa.is_uniform):
        raise ValueError("the direct construction needs d = 2 and the uniform law")
    if t < 0 or math.isnan(t):
        raise ValueError("t must be >= 0")
    rng, seed = _as_rng(rng)
    cells = {0: sphgeo.full_sphere(2)}
    ids = [0]
    rates = [1.0]
    next_id = 1
    events: list[SplittingEvent] = []
    draws = Draws(rng)
    rejected = 0
    now = 0.0
    while True:
        total = math.fsum(rates)
        now += draws.exponential() / total
        if now > t:
            break
        target = draws.uniform() * total
        k = 0
        acc = rates[0]
        while acc < target and k < len(rates) - 1:
            k += 1
            acc += rates[k]
        cid = ids[k]
        c = cells[cid]
        while True:
            u = _canon3(draws.unit3())
            try:
                out = _split2(c, u, eps)
            except Degenerate:
                continue
            if out is not None:
                break
            rejected += 1
        plus, minus, piece = out
        a, b = next_id, next_id + 1
        next_id += 2
        del cells[cid]
        cells[a] = plus
        cells[b] = minus
        ids[k] = a
        rates[k] = sphgeo.perimeter_2d(plus) / TWO_PI
        ids.append(b)
        rates.append(sphgeo.perimeter_2d(minus) / TWO_PI)
        events.append(SplittingEvent(now, cid, u, piece, (a, b)))
    return SplittingTessellation(2, t, cells, events, rejected, seed, 1)


# --- functionals ------------------------------------------------------------------


def _arc_points(piece: Piece, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes (ambient points) and weights along a d = 2 piece."""
    x, w = sphgeo._gauss(n_nodes)
    L = piece.measure
    s = 0.5 * L * (x + 1.0)
    e1, e2 = (np.asarray(v) for v in piece.frame)
    pts = np.cos(s)[:, None] * e1 + np.sin(s)[:, None] * e2
    return pts, 0.5 * L * w


def union_measure(
    Y: SplittingTessellation,
    h: Callable[[np.ndarray], np.ndarray] | None = None,
    n_nodes: int = 64,
    n_samples: int = 20000,
    rng: np.random.Generator | None = None,
) -> float:
    """H^{d-1}(Z_t), optionally h-weighted; each inserted piece counted once."""
    if h is None:
        if Y.dim <= 3:
            return math.fsum(ev.piece.measure for ev in Y.events)
        rng = np.random.default_rng(0) if rng is None else rng
        return math.fsum(sphgeo.piece_measure(ev.piece, n_samples, rng) for ev in Y.events)
    if Y.dim == 2:
        total = 0.0
        for ev in Y.events:
            pts, w = _arc_points(ev.piece, n_nodes)
            total += float(w @ np.asarray(h(pts), dtype=float))
        return total
    rng = np.random.default_rng(0) if rng is None else rng
    total = 0.0
    for ev in Y.events:
        shape = ev.piece.shape
        k = shape.dim
        g = rng.standard_normal((n_samples, k + 1))
        yv = g / np.linalg.norm(g, axis=1)[:, None]
        A = shape.normals_array()
        inside = np.all(yv @ A.T >= 0.0, axis=1) if len(A) else np.ones(n_samples, bool)
        x = yv @ np.asarray(ev.piece.frame)
        vals = np.where(inside, np.asarray(h(x), dtype=float), 0.0)
        total += beta_dim(k) * float(vals.mean())
    return total


def sigma_j(
    Y: SplittingTessellation,
    j: int,
    h: Callable[[np.ndarray], np.ndarray] | None = None,
    **kw,
) -> float:
    """Sum over cells of the j-th curvature measure."""
    d = Y.dim
    if d == 2:
        if j not in (0, 1, 2):
            raise ValueError("j must be 0, 1 or 2 for d = 2")
        if h is None:
            return math.fsum(sphgeo.intrinsic_volumes_2d(c)[j] for c in Y.cells.values())
        return math.fsum(sphgeo.curvature_measure_2d(c, j, h, **kw) for c in Y.cells.values())
    if d == 3 and j in (2, 3):
        if j == 2:
            if Y.initial_count != 1:
                raise ValueError("d = 3 boundary measure needs the default initial tessellation")
            return union_measure(Y, h, **kw) / beta_dim(2)
        if h is None:
            return 1.0
        rng = kw.get("rng") or np.random.default_rng(0)
        n = kw.get("n_samples", 200000)
        g = rng.standard_normal((n, 4))
        return float(np.mean(h(g / np.linalg.norm(g, axis=1)[:, None])))
    raise ValueError(f"sigma_j unsupported for d = {d}, j = {j}")


def maximal_segments(Y: SplittingTessellation) -> list[MaximalSegment]:
    if Y.dim != 2:
        raise ValueError("maximal segments are tracked for d = 2 only")
    return [MaximalSegment(ev.time, ev.piece, ev.piece.measure) for ev in Y.events]


# --- intersection tests -------------------------------------------------------------


def _angle_along(start, normal, x) -> float:
    th = math.atan2(_dot3(_cross(normal, start), x), _dot3(start, x))
    return th + TWO_PI if th < 0.0 else th


def _on_arc(start, normal, length, x, tol=1e-12) -> bool:
    th = _angle_along(start, normal, x)
    return th <= length + tol or th >= TWO_PI - tol


def _rot(start, normal, angle):
    w = _cross(normal, start)
    c, s = math.cos(angle), math.sin(angle)
    return (c * start[0] + s * w[0], c * start[1] + s * w[1], c * start[2] + s * w[2])


def _piece_arc(piece: Piece):
    if piece.endpoints is None:
        return None
    return piece.endpoints[0], piece.normal, piece.measure


def _seg_arc(seg: GeodesicSegment):
    a, b = seg.a.coords, seg.b.coords
    n = sphgeo._unit3(_cross(a, b))
    return a, n, seg.length


def _arcs_meet(A, B, tol=1e-12) -> bool:
    """Do two great-circle arcs (start, normal, length) intersect?"""
    sa, na, la = A
    sb, nb, lb = B
    z = _cross(na, nb)
    nz = math.sqrt(_dot3(z, z))
    if nz < 1e-14:
        # same great circle: overlapping arcs share an endpoint of one of them
        ea = _rot(sa, na, la)
        eb = _rot(sb, nb, lb)
        return any(_on_arc(sa, na, la, x, tol) for x in (sb, eb)) or any(_on_arc(sb, nb, lb, x, tol) for x in (sa, ea))
    z = (z[0] / nz, z[1] / nz, z[2] / nz)
    for w in (z, (-z[0], -z[1], -z[2])):
        if _on_arc(sa, na, la, w, tol) and _on_arc(sb, nb, lb, w, tol):
            return True
    return False


def piece_hits(piece: Piece, item, eps: float = sphgeo.EPS) -> bool:
    """Does an inserted piece meet a segment, point or polytope?"""
    u = piece.normal
    if isinstance(item, UnitVector):
        x = item.coords
        if abs(_dot(u, x)) > eps:
            return False
        if piece.dim == 2:
            arc = _piece_arc(piece)
            return arc is None or _on_arc(*arc, x)
        yv = np.asarray(piece.frame) @ np.asarray(x)
        return piece.shape.contains(yv, tol=1e-12)
    if isinstance(item, GeodesicSegment):
        if piece.dim == 2:
            arc = _piece_arc(piece)
            if arc is None:
                return sphgeo.segment_hit(u, item, eps)
            return _arcs_meet(arc, _seg_arc(item))
        sa, sb = _dot(u, item.a.coords), _dot(u, item.b.coords)
        if sa * sb > 0 and min(abs(sa), abs(sb)) > eps:
            return False
        a, b = np.asarray(item.a.coords), np.asarray(item.b.coords)
        z = sa * b - sb * a if abs(sa - sb) > 0 else a
        nz = np.linalg.norm(z)
        z = a if nz == 0 else z / nz
        yv = np.asarray(piece.frame) @ z
        return piece.shape.contains(yv, tol=1e-12)
    if isinstance(item, SphericalPolytope):
        if piece.dim != 2:
            raise ValueError("polytope capacity tests are implemented for d = 2")
        arc = _piece_arc(piece)
        if arc is None:
            if len(item.halfspheres) < 3:
                return True
            sg = [_dot3(u, v) for v in item.vertex_cycle]
            return min(sg) <= eps and max(sg) >= -eps
        if item.contains(arc[0]):
            return True
        for start, tang, length in sphgeo.boundary_arcs_2d(item):
            n = sphgeo._unit3(_cross(start, tang))
            if _arcs_meet(arc, (start, n, length)):
                return True
        return False
    raise TypeError(f"unsupported set item {type(item)!r}")


def capacity_indicator(Y: SplittingTessellation, C) -> bool:
    """True iff Z_t misses C (no event piece meets any component)."""
    items = [C] if isinstance(C, (GeodesicSegment, SphericalPolytope, UnitVector)) else list(C)
    for ev in Y.events:
        for item in items:
            if piece_hits(ev.piece, item):
                return False
    return True


# --- topology audit -----------------------------------------------------------------


@dataclass(frozen=True)
class ArrangementGraph:
    V: int
    E: int
    F: int
    degree_histogram: dict[int, int]

    @property
    def euler(self) -> int:
        return self.V - self.E + self.F


def arrangement_graph_2d(Y: SplittingTessellation, tol: float = 1e-9) -> ArrangementGraph:
    if Y.dim != 2:
        raise ValueError("d = 2 only")
    if not Y.events:
        raise ValueError("need at least one event")
    if Y.initial_count != 1:
        raise ValueError("the topology audit assumes the default initial tessellation")
    arcs = []
    for ev in Y.events:
        pc = ev.piece
        if pc.endpoints is None:
            arcs.append((pc.frame[0], pc.normal, TWO_PI, None))
        else:
            arcs.append((pc.endpoints[0], pc.normal, pc.measure, pc.endpoints))
    interior_counts = [0] * len(arcs)
    degrees: dict[int, int] = {}
    V = 0
    for j, (_, _, _, ends) in enumerate(arcs):
        if ends is None:
            continue
        for x in ends:
            V += 1
            deg = 1
            for i in range(j):
                start, n, L, ends_i = arcs[i]
                if abs(_dot3(n, x)) > tol:
                    continue
                th = _angle_along(start, n, x)
                if ends_i is None or (tol < th < L - tol):
                    interior_counts[i] += 1
                    deg += 2
            degrees[deg] = degrees.get(deg, 0) + 1
    E = 0
    for (start, n, L, ends), k in zip(arcs, interior_counts):
        E += k if ends is None and k > 0 else k + 1
    return ArrangementGraph(V, E, len(Y.cells), dict(sorted(degrees.items())))


def check_invariants(Y: SplittingTessellation) -> dict:
    """Per-realization structural checks for d = 2 (errors and booleans)."""
    out = {"cells_equals_events_plus_initial": len(Y.cells) == len(Y.events) + Y.initial_count}
    if Y.dim == 2:
        out["area_partition_error"] = abs(math.fsum(sphgeo.polygon_area_2d(c) for c in Y.cells.values()) - 4.0 * math.pi)
        out["hv_consistent"] = all(sphgeo.check_consistency(c) for c in Y.cells.values())
        if len(Y.events) >= 2 and Y.initial_count == 1:
            g = arrangement_graph_2d(Y)
            out["euler"] = g.euler
            out["all_degree_three"] = set(g.degree_histogram) == {3}
            out["vertex_count_ok"] = g.V == 2 * (len(Y.events) - 1)
        out.update(Y.audit)
    return out


# --- export -------------------------------------------------------------------------


def csv_header(schema: str) -> str:
    return f"# sphere-split v{__version__} schema={schema}\n"


def events_csv(Y: SplittingTessellation) -> str:
    buf = io.StringIO()
    buf.write(csv_header("events"))
    buf.write("time,parent_id,child_id_a,child_id_b,normal_coords,piece_measure\n")
    for ev in Y.events:
        m = ev.piece.measure
        buf.write(
            f"{ev.time!r},{ev.parent_cell_id},{ev.child_ids[0]},{ev.child_ids[1]},"
            + " ".join(repr(float(x)) for x in ev.normal)
            + f",{'' if m is None else repr(float(m))}\n"
        )
    return buf.getvalue()


def snapshot_dict(Y: SplittingTessellation) -> dict:
    cells = []
    for cid in sorted(Y.cells):
        c = Y.cells[cid]
        rec = {"id": cid, "normals": [list(n) for n in c.halfspheres]}
        if c.dim == 2:
            rec["vertices"] = [list(v) for v in c.vertex_cycle]
        else:
            rec["extreme_rays"] = [list(r) for r in c.extreme_rays or ()]
            rec["lineality"] = [list(r) for r in c.lineality or ()]
        cells.append(rec)
    return {
        "schema": "snapshot",
        "version": __version__,
        "model": "split",
        "dim": Y.dim,
        "t_end": Y.t_end,
        "seed": Y.seed,
        "n_events": len(Y.events),
        "rejected_count": Y.rejected_count,
        "cells": cells,
    }


def snapshot_json(Y: SplittingTessellation) -> str:
    return json.dumps(snapshot_dict(Y), sort_keys=True)
