"""Monte Carlo estimators and their comparison against the closed forms.

Every estimator derives per-replicate streams from (seed, index), so a report
is a deterministic function of its configuration. Means use batch-means
standard errors, variances the fourth-moment formula, frequencies the Wilson
interval.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import __version__, analytics, poissontess, sphgeo, splitproc
from ._report import (
    DEFAULT_THRESHOLD,
    EstimateReport,
    batch_means_se,
    compare_reports,
    covariance_se,
    gate_threshold,
    make_report,
    mean_se,
    ratio_se,
    variance_se,
    wilson_se,
)
from ._rng import DEFAULT_SEED, Draws, replicate_rng
from .dirdist import DirectionDistribution, _item_points, beta_dim, hits_matrix, hull_hits_matrix

__all__ = [
    "EstimateReport",
    "make_report",
    "compare_reports",
    "gate_threshold",
    "run_replicates",
    "realization_stats",
    "mc_moments",
    "mc_capacity",
    "capacity_measures_mc",
    "mc_pcf",
    "mc_typical_segment",
    "mc_EA",
    "mc_bp_identity",
    "mc_intensity_equality",
    "mc_twin",
    "reports_json",
    "reports_csv",
]


# --- replicate driver -------------------------------------------------------------------


def _run_chunk(args):
    fn, seed, lo, hi = args
    return [fn(replicate_rng(seed, i)) for i in range(lo, hi)]


def run_replicates(fn: Callable[[np.random.Generator], object], n: int, seed: int, jobs: int = 1, offset: int = 0) -> list:
    """fn applied to n independent streams; results in replicate order.

    With jobs > 1 the work is chunked over processes (fn must be picklable);
    results are identical to the serial run.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if jobs <= 1 or n < 64:
        return [fn(replicate_rng(seed, offset + i)) for i in range(n)]
    size = max(16, n // (4 * jobs))
    chunks = [(fn, seed, offset + lo, offset + min(n, lo + size)) for lo in range(0, n, size)]
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        for part in ex.map(_run_chunk, chunks):
            out.extend(part)
    return out


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# --- per-realization statistics ---------------------------------------------------------


def realization_stats(Y: splitproc.SplittingTessellation) -> dict[str, float]:
    out = {"cell_count": float(len(Y.cells)), "events": float(len(Y.events)), "surface": splitproc.union_measure(Y)}
    if Y.dim == 2:
        s0 = s1 = 0.0
        for c in Y.cells.values():
            v = sphgeo.intrinsic_volumes_2d(c)
            s0 += v[0]
            s1 += v[1]
        out["sigma0"] = s0
        out["sigma1"] = s1
    return out


@dataclass
class _SplitJob:
    d: int
    kappa: DirectionDistribution
    t: float
    initial: tuple | None = None
    audit: bool = False

    def __call__(self, rng):
        Y = splitproc.simulate(self.d, self.kappa, self.t, rng, initial=self.initial, audit=self.audit, validate=False)
        s = realization_stats(Y)
        if self.audit:
            s["_invariants"] = splitproc.check_invariants(Y)
        return s


def invariant_summary(records: Iterable[dict]) -> dict:
    """Worst-case structural errors over realizations carrying ``_invariants``."""
    worst = {"n_checked": 0, "area_partition_error": 0.0, "split_area": 0.0, "split_perimeter": 0.0, "violations": 0}
    for r in records:
        inv = r.get("_invariants")
        if inv is None:
            continue
        worst["n_checked"] += 1
        for k in ("area_partition_error", "split_area", "split_perimeter"):
            worst[k] = max(worst[k], inv.get(k, 0.0))
        bad = not inv["cells_equals_events_plus_initial"] or not inv.get("hv_consistent", True)
        if "euler" in inv:
            bad |= inv["euler"] != 2 or not inv["all_degree_three"] or not inv["vertex_count_ok"]
        worst["violations"] += int(bad)
    return worst


def invariants_ok(summary: dict) -> bool:
    return (
        summary["violations"] == 0
        and summary["area_partition_error"] <= 1e-8
        and summary["split_area"] <= 1e-9
        and summary["split_perimeter"] <= 1e-9
    )


# --- moments ---------------------------------------------------------------------------------


def mc_moments(
    d: int,
    kappa: DirectionDistribution | None,
    t: float,
    n: int,
    seed: int = DEFAULT_SEED,
    means: Sequence[str] = ("cell_count", "surface"),
    variances: Sequence[str] = (),
    covariances: Sequence[tuple[str, str]] = (),
    references: dict[str, float] | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    jobs: int = 1,
    audit: bool = False,
    initial=None,
) -> dict[str, EstimateReport]:
    """Mean, variance and covariance reports of per-realization functionals.

    Report keys: ``mean:<f>``, ``var:<f>``, ``cov:<f>,<g>``. ``references`` is
    keyed the same way. With ``audit`` the structural invariants of every
    realization are checked and summarized under ``details['invariants']``.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    kappa = kappa or DirectionDistribution.uniform(d)
    refs = references or {}
    if initial is not None:
        splitproc.validate_initial(list(initial))
    t0 = time.perf_counter()
    recs = run_replicates(_SplitJob(d, kappa, t, None if initial is None else tuple(initial), audit), n, seed, jobs)
    wall = time.perf_counter() - t0
    cols = {k: np.array([r[k] for r in recs]) for k in recs[0] if not k.startswith("_")}
    inv = invariant_summary(recs) if audit else None
    out: dict[str, EstimateReport] = {}
    common = dict(seed=seed, wall_time=wall, threshold=threshold)
    for f in means:
        est, se = batch_means_se(cols[f])
        out[f"mean:{f}"] = make_report(f"mean:{f}", n, est, se, refs.get(f"mean:{f}"), **common)
    for f in variances:
        est, se = variance_se(cols[f])
        out[f"var:{f}"] = make_report(f"var:{f}", n, est, se, refs.get(f"var:{f}"), **common)
    for a, b in covariances:
        est, se = covariance_se(cols[a], cols[b])
        out[f"cov:{a},{b}"] = make_report(f"cov:{a},{b}", n, est, se, refs.get(f"cov:{a},{b}"), **common)
    if inv is not None:
        for r in out.values():
            r.details["invariants"] = inv
    out["_samples"] = cols  # type: ignore[assignment]
    return out


# --- capacity functional -------------------------------------------------------------------


@dataclass
class _CapacityJob:
    d: int
    kappa: DirectionDistribution
    t: float
    C: object
    initial: tuple | None = None

    def __call__(self, rng):
        Y = splitproc.simulate(self.d, self.kappa, self.t, rng, initial=self.initial, validate=False)
        return splitproc.capacity_indicator(Y, self.C)


def mc_capacity(
    d: int,
    kappa: DirectionDistribution | None,
    t: float,
    C,
    n: int,
    seed: int = DEFAULT_SEED,
    reference: float | None = None,
    reference_se: float = 0.0,
    initial=None,
    threshold: float = DEFAULT_THRESHOLD,
    jobs: int = 1,
    name: str = "capacity",
) -> EstimateReport:
    """Avoidance frequency of C; an uncertain reference widens the SE in quadrature."""
    kappa = kappa or DirectionDistribution.uniform(d)
    if initial is not None:
        splitproc.validate_initial(list(initial))
    t0 = time.perf_counter()
    hits = run_replicates(_CapacityJob(d, kappa, t, C, None if initial is None else tuple(initial)), n, seed, jobs)
    p, se = wilson_se(int(sum(hits)), n)
    return make_report(
        name,
        n,
        p,
        math.hypot(se, reference_se),
        reference,
        threshold,
        seed,
        time.perf_counter() - t0,
        frequency_se=se,
        reference_se=reference_se,
    )


def _subsets(m: int):
    from itertools import combinations

    for r in range(1, m + 1):
        yield from combinations(range(m), r)


def _side(U, item) -> np.ndarray:
    """Sign of the side each hypersphere leaves ``item`` on (meaningful where it misses it)."""
    pts = _item_points(item)
    if pts is None:
        return np.zeros(len(U))
    return np.sign(U @ pts[0])


def _partition_masks(U, comps, Q):
    """Hyperspheres missing every component of Q with P strictly on one side and Q \\ P on the other."""
    from .analytics import _partitions

    Q = tuple(Q)
    miss = ~hits_matrix(U, [comps[i] for i in Q])
    side = {i: _side(U, comps[i]) for i in Q}
    out = {}
    for P, Pc in _partitions(Q):
        ref = side[min(P)]
        same = np.all([side[i] == ref for i in P], axis=0)
        other = np.all([side[i] == -ref for i in Pc], axis=0)
        out[frozenset((P, Pc))] = miss & same & other & (ref != 0)
    return out


def capacity_measures_mc(kappa: DirectionDistribution, components: Sequence, n: int, rng: np.random.Generator):
    """Hull and separation measures needed by the capacity recursion.

    Returns (hull, sep, masks_fn) where ``masks_fn(U)`` recomputes all
    indicators for fresh normals (used for batch SEs of derived quantities).
    """
    m = len(components)

    def masks(U):
        hull, sep = {}, {}
        for Q in _subsets(m):
            key = frozenset(Q)
            items = [components[i] for i in Q]
            hull[key] = hits_matrix(U, items) if len(Q) == 1 else hull_hits_matrix(U, items[:1], items[1:])
            if len(Q) > 1:
                sep.update(_partition_masks(U, components, Q))
        return hull, sep

    U = kappa.sample_normals(n, rng)
    hm, sm = masks(U)
    hull = {k: float(v.mean()) for k, v in hm.items()}
    sep = {k: float(v.mean()) for k, v in sm.items()}
    return hull, sep, masks, U


def capacity_reference_mc(
    kappa: DirectionDistribution, components: Sequence, t: float, n: int, rng: np.random.Generator, n_batches: int = 50
) -> tuple[float, float, dict, dict]:
    """Recursion value with MC measures, and its batch-means SE."""
    hull, sep, masks, U = capacity_measures_mc(kappa, components, n, rng)
    m = len(components)
    val = analytics.capacity_recursive(m, hull, sep, t)
    hm, sm = masks(U)
    size = n // n_batches
    vals = []
    for b in range(n_batches):
        sl = slice(b * size, (b + 1) * size)
        h = {k: float(v[sl].mean()) for k, v in hm.items()}
        s = {k: float(v[sl].mean()) for k, v in sm.items()}
        vals.append(analytics.capacity_recursive(m, h, s, t))
    # batch values are noisier by sqrt(n_batches); scale to the full-sample SE
    se = float(np.std(vals, ddof=1) / math.sqrt(n_batches))
    return val, se, hull, sep


# --- pair correlation --------------------------------------------------------------------


def _arc_nodes(pieces: Iterable[sphgeo.Piece], delta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Midpoint nodes of every arc, their weights and the arc label of each node."""
    pts, wts, lab = [], [], []
    for q, pc in enumerate(pieces):
        L = pc.measure
        k = max(1, math.ceil(L / delta))
        s = (np.arange(k) + 0.5) * (L / k)
        e1, e2 = (np.asarray(v) for v in pc.frame)
        pts.append(np.cos(s)[:, None] * e1 + np.sin(s)[:, None] * e2)
        wts.append(np.full(k, L / k))
        lab.append(np.full(k, q))
    if not pts:
        return np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=int)
    return np.vstack(pts), np.concatenate(wts), np.concatenate(lab)


def _circle_pieces(normals) -> list[sphgeo.Piece]:
    return [sphgeo._circle_piece(tuple(u)) for u in normals]


def same_arc_mass(L: float, lo: float, hi: float) -> float:
    """Lebesgue measure of pairs (s, s') in [0, L]^2 at geodesic distance in [lo, hi].

    The pair gap u = |s - s'| has density 2 (L - u) on [0, L]; the distance is
    min(u, 2 pi - u).
    """

    def part(a, b):
        a, b = max(a, 0.0), min(b, L)
        if b <= a:
            return 0.0
        return 2.0 * L * (b - a) - (b * b - a * a)

    return part(lo, hi) + part(2.0 * math.pi - hi, 2.0 * math.pi - lo)


def pair_bin_sums(X: np.ndarray, w: np.ndarray, edges: np.ndarray, labels: np.ndarray | None = None, block: int = 2048) -> np.ndarray:
    """Sum of w_i w_j over ordered node pairs with angular distance in each bin.

    ``edges`` alternates lower and upper ends of disjoint bins; distances are
    compared through their cosines, in single precision. With ``labels``
    only pairs from different arcs are counted.
    """
    c = np.cos(np.asarray(edges, dtype=float)).astype(np.float32)
    Xf = np.asarray(X, dtype=np.float32)
    wf = np.asarray(w, dtype=np.float32)
    out = np.zeros(len(edges) // 2)
    for lo in range(0, len(Xf), block):
        G = Xf[lo : lo + block] @ Xf.T
        if labels is not None:
            G[labels[lo : lo + block, None] == labels[None, :]] = 2.0
        wb = wf[lo : lo + block].astype(float)
        for k in range(len(out)):
            m = (G <= c[2 * k]) & (G > c[2 * k + 1])
            out[k] += wb @ (m @ wf).astype(float)
    return out


def arc_pair_bin_sums(pieces: Sequence[sphgeo.Piece], edges, delta: float) -> np.ndarray:
    """Pair measure of the union of arcs in each bin: cross-arc pairs on nodes, same-arc pairs exact."""
    X, w, lab = _arc_nodes(pieces, delta)
    out = pair_bin_sums(X, w, edges, lab)
    for pc in pieces:
        out += [same_arc_mass(pc.measure, edges[2 * k], edges[2 * k + 1]) for k in range(len(out))]
    return out


def _bin_edges(r_values, half_width):
    edges = []
    for r in r_values:
        edges.extend([r - half_width, r + half_width])
    e = np.asarray(edges)
    if len(e) and (e[0] <= 0.0 or e[-1] >= math.pi):
        raise ValueError("every bin must lie inside (0, pi)")
    if np.any(np.diff(e) <= 0):
        raise ValueError("r bins overlap; reduce half_width")
    return e


@dataclass
class _PcfJob:
    model: str
    t: float
    edges: tuple
    delta: float
    audit: bool

    def __call__(self, rng):
        if self.model == "split":
            Y = splitproc.simulate(2, None, self.t, rng)
            pieces = [ev.piece for ev in Y.events]
        else:
            P = poissontess.sample(2, None, self.t, rng, build_arrangement=False)
            pieces = _circle_pieces(P.normals)
        e = np.asarray(self.edges)
        a = arc_pair_bin_sums(pieces, e, self.delta)
        if not self.audit:
            return a, None
        return a, arc_pair_bin_sums(pieces, e, self.delta / 2)


def mc_pcf(
    t: float,
    n: int,
    r_values: Sequence[float],
    seed: int = DEFAULT_SEED,
    model: str = "split",
    half_width: float = 0.05,
    delta: float = math.pi / 360,
    audit_n: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
    jobs: int = 1,
) -> list[EstimateReport]:
    """Binned pair-correlation estimates at d = 2.

    The estimator targets the bin average of g over [r - w, r + w], which is
    computed exactly from the K-function and used as the reference; the
    pointwise value is kept in the details. With ``audit_n`` the first
    replicates are re-discretized at delta / 2 and the relative shift of
    each bin is reported.
    """
    if delta > math.pi / 180:
        raise ValueError("delta must be <= pi/180")
    if model not in ("split", "poisson"):
        raise ValueError(f"unknown model {model!r}")
    d = 2
    edges = _bin_edges(r_values, half_width)
    t0 = time.perf_counter()
    mu2 = (beta_dim(d - 1) * t) ** 2
    job = _PcfJob(model, t, tuple(edges), delta, False)
    recs = run_replicates(job, n, seed, jobs)
    A = np.array([r[0] for r in recs])
    shifts = None
    if audit_n:
        audit = run_replicates(_PcfJob(model, t, tuple(edges), delta, True), audit_n, seed, jobs)
        a1 = np.array([r[0] for r in audit]).sum(axis=0)
        a2 = np.array([r[1] for r in audit]).sum(axis=0)
        shifts = np.abs(a2 - a1) / np.abs(a2)
    wall = time.perf_counter() - t0
    reports = []
    for k, r in enumerate(r_values):
        lo, hi = edges[2 * k], edges[2 * k + 1]
        shell = beta_dim(d - 1) / beta_dim(d) * (math.cos(lo) - math.cos(hi))
        est, se = batch_means_se(A[:, k] / mu2 / shell)
        if model == "split":
            ref = (analytics.k_function_split(d, t, hi) - analytics.k_function_split(d, t, lo)) / shell
            point = analytics.pcf_split(d, t, r)
        else:
            ref = (analytics.k_function_poisson(d, t, hi) - analytics.k_function_poisson(d, t, lo)) / shell
            point = analytics.pcf_poisson(d, t, r)
        details = {"r": r, "half_width": half_width, "delta": delta, "pointwise_reference": point, "model": model}
        if shifts is not None:
            details["discretization_shift"] = float(shifts[k])
        reports.append(make_report(f"pcf_{model}(r={r:.6g})", n, est, se, ref, threshold, seed, wall, **details))
    return reports


# --- typical maximal segments --------------------------------------------------------------


@dataclass
class _SegJob:
    t: float

    def __call__(self, rng):
        Y = splitproc.simulate(2, None, self.t, rng)
        segs = splitproc.maximal_segments(Y)
        return np.array([s.birth_time for s in segs]), np.array([s.length for s in segs])


def mc_typical_segment(t: float, n: int, seed: int = DEFAULT_SEED, threshold: float = DEFAULT_THRESHOLD, jobs: int = 1) -> dict:
    """Count, mean length and birth-time law of the typical maximal segment (d = 2)."""
    t0 = time.perf_counter()
    recs = run_replicates(_SegJob(t), n, seed, jobs)
    wall = time.perf_counter() - t0
    counts = np.array([len(b) for b, _ in recs], dtype=float)
    totals = np.array([l.sum() for _, l in recs])
    births = np.concatenate([b for b, _ in recs])
    c_est, c_se = batch_means_se(counts)
    l_est, l_se = ratio_se(totals, counts)
    ks = stats.kstest(births, lambda s: analytics.birth_cdf(2, t, s))
    return {
        "count": make_report("segment_count", n, c_est, c_se, analytics.n1_split(2, t), threshold, seed, wall),
        "mean_length": make_report("segment_mean_length", n, l_est, l_se, analytics.mean_segment_length_split(2, t), threshold, seed, wall),
        "birth_ks": {"statistic": float(ks.statistic), "pvalue": float(ks.pvalue), "n_segments": int(births.size)},
        "births": births,
    }


# --- E A_{i,j} curves ------------------------------------------------------------------------


def _chord_volumes(c: sphgeo.SphericalPolytope, u) -> tuple[float, float] | None:
    """(V0, V1) of the chord c ∩ u^perp, or None when u misses c."""
    out = sphgeo._split2(c, u, sphgeo.EPS)
    if out is None:
        return None
    piece = out[2]
    if piece.endpoints is None:
        return 0.0, 1.0
    return 0.5, piece.measure / (2.0 * math.pi)


@dataclass
class _EAJob:
    s: float
    m: int
    pairs: tuple

    def __call__(self, rng):
        Y = splitproc.simulate(2, None, self.s, rng)
        draws = Draws(rng)
        acc = np.zeros(len(self.pairs))
        for c in Y.cells.values():
            hit = sphgeo.intrinsic_volumes_2d(c)[1] * 2.0 if c.halfspheres else 1.0
            got = np.zeros(len(self.pairs))
            k = 0
            while k < self.m:
                u = splitproc._canon3(draws.unit3())
                try:
                    v = _chord_volumes(c, u)
                except sphgeo.Degenerate:
                    continue
                if v is None:
                    continue
                for q, (i, j) in enumerate(self.pairs):
                    got[q] += v[i] * v[j]
                k += 1
            acc += hit * got / self.m
        return acc


def mc_EA(
    s_grid: Sequence[float],
    n: int,
    seed: int = DEFAULT_SEED,
    pairs: Sequence[tuple[int, int]] = ((1, 1), (1, 0), (0, 0)),
    m: int = 4,
    jobs: int = 1,
) -> dict[tuple[int, int], analytics.EACurve]:
    """Tabulated E A_{i,j}(s) for the isotropic d = 2 process.

    Each grid point uses its own independent replicates (stream offset by the
    grid index), so the pointwise SEs are independent across the grid.
    """
    pairs = tuple(tuple(p) for p in pairs)
    vals = {p: [] for p in pairs}
    ses = {p: [] for p in pairs}
    for g, s in enumerate(s_grid):
        if s == 0.0:
            # Y_0 is the sphere: every chord is a full circle
            for p in pairs:
                vals[p].append(1.0 if p == (1, 1) else 0.0)
                ses[p].append(0.0)
            continue
        recs = np.array(run_replicates(_EAJob(float(s), m, pairs), n, seed, jobs, offset=(g + 1) * 10**9))
        for q, p in enumerate(pairs):
            est, se = mean_se(recs[:, q])
            vals[p].append(est)
            ses[p].append(se)
    grid = tuple(float(s) for s in s_grid)
    return {p: analytics.EACurve(grid, tuple(vals[p]), tuple(ses[p])) for p in pairs}


# --- integral-geometric transformation --------------------------------------------------------


def _pairs_on_random_spheres(d: int, n: int, rng):
    U = rng.standard_normal((n, d + 1))
    U /= np.linalg.norm(U, axis=1)[:, None]

    def pt():
        g = rng.standard_normal((n, d + 1))
        g -= np.einsum("ij,ij->i", g, U)[:, None] * U
        return g / np.linalg.norm(g, axis=1)[:, None]

    return pt(), pt()


def _pairs_uniform_angle(d: int, n: int, rng):
    """x uniform on S^d and y at a uniform angle in [0, pi] from x; returns x, y, ell."""
    x = rng.standard_normal((n, d + 1))
    x /= np.linalg.norm(x, axis=1)[:, None]
    v = rng.standard_normal((n, d + 1))
    v -= np.einsum("ij,ij->i", v, x)[:, None] * x
    v /= np.linalg.norm(v, axis=1)[:, None]
    ell = rng.uniform(0.0, math.pi, n)
    y = np.cos(ell)[:, None] * x + np.sin(ell)[:, None] * v
    return x, y, ell


def mc_bp_identity(d: int, g: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int, rng: np.random.Generator, name: str = "bp", threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Both sides of the transformation formula for double integrals.

    Left: beta_{d-1}^2 E g(x, y), with S uniform and x, y uniform on S.
    Right: (beta_{d-2} / beta_d) times the double integral of g / sin(ell)
    over S^d x S^d. The right side is sampled with y at a uniform angle from x
    (importance weights from the angle density sin^{d-1}), which keeps the
    estimator bounded where the plain uniform pair has infinite variance.
    """
    t0 = time.perf_counter()
    x, y = _pairs_on_random_spheres(d, n, rng)
    lhs_vals = beta_dim(d - 1) ** 2 * np.asarray(g(x, y), dtype=float)
    lhs, lhs_se = mean_se(lhs_vals)
    x2, y2, ell = _pairs_uniform_angle(d, n, rng)
    # density of ell for a uniform pair is beta_{d-1} sin^{d-1}(ell) / beta_d
    w = math.pi * beta_dim(d - 1) / beta_dim(d) * np.sin(ell) ** (d - 2)
    rhs_vals = beta_dim(d - 2) * beta_dim(d) * np.asarray(g(x2, y2), dtype=float) * w
    rhs, rhs_se = mean_se(rhs_vals)
    wall = time.perf_counter() - t0
    L = make_report(f"{name}:lhs", n, lhs, lhs_se, seed=None, wall_time=wall)
    R = make_report(f"{name}:rhs", n, rhs, rhs_se, seed=None, wall_time=wall)
    return {"lhs": L, "rhs": R, "diff": compare_reports(f"{name}:lhs-rhs", L, R, threshold)}


# --- cross-model and twin comparisons ------------------------------------------------------


@dataclass
class _PoissonJob:
    t: float

    def __call__(self, rng):
        P = poissontess.sample(2, None, self.t, rng)
        a = P.arrangement
        s0 = s1 = 0.0
        for c in a.cells:
            v = sphgeo.intrinsic_volumes_2d(c)
            s0 += v[0]
            s1 += v[1]
        ok = (
            a.n_cells == poissontess.face_counts(P.n, 2, 2)
            and a.n_edges == poissontess.face_counts(P.n, 2, 1)
            and a.n_vertices == poissontess.face_counts(P.n, 2, 0)
        )
        return {
            "cell_count": float(a.n_cells),
            "sigma0": s0,
            "sigma1": s1,
            "surface": poissontess.surface_measure(P),
            "edges": float(a.n_edges),
            "edge_length": poissontess.measured_total_edge_length(P),
            "n": float(P.n),
            "counts_ok": ok,
            "area_error": abs(math.fsum(sphgeo.polygon_area_2d(c) for c in a.cells) - 4 * math.pi),
        }


def mc_poisson(t: float, n: int, seed: int, jobs: int = 1) -> dict[str, np.ndarray]:
    recs = run_replicates(_PoissonJob(t), n, seed, jobs)
    return {k: np.array([r[k] for r in recs]) for k in recs[0]}


def mc_intensity_equality(t: float, n: int, seed: int = DEFAULT_SEED, threshold: float = DEFAULT_THRESHOLD, jobs: int = 1) -> dict:
    """Cell count and curvature sums of both models at equal t (d = 2)."""
    split = mc_moments(2, None, t, n, seed, means=("cell_count", "sigma1", "sigma0"), jobs=jobs)
    pois = mc_poisson(t, n, seed + 1, jobs)
    out = {}
    for f in ("cell_count", "sigma1", "sigma0"):
        est, se = batch_means_se(pois[f])
        P = make_report(f"poisson:{f}", n, est, se)
        out[f] = compare_reports(f"split-poisson:{f}", split[f"mean:{f}"], P, threshold)
    out["n1_identity_error"] = abs(analytics.n1_split_integral(2, t) - analytics.n1_split(2, t))
    out["poisson_counts_ok"] = bool(np.all(pois["counts_ok"]))
    return out


@dataclass
class _TwinJob:
    t: float
    direct: bool

    def __call__(self, rng):
        Y = splitproc.simulate_direct_2d(self.t, rng) if self.direct else splitproc.simulate(2, None, self.t, rng)
        return realization_stats(Y)


def _chi2_discrete(a: np.ndarray, b: np.ndarray, decimals: int = 6) -> float:
    """p-value of the chi-square homogeneity test, pooling sparse categories."""
    a = np.round(a, decimals)
    b = np.round(b, decimals)
    cats = np.union1d(a, b)
    ca = np.array([(a == c).sum() for c in cats], dtype=float)
    cb = np.array([(b == c).sum() for c in cats], dtype=float)
    rows_a, rows_b = [], []
    acc_a = acc_b = 0.0
    for x, y in zip(ca, cb):
        acc_a += x
        acc_b += y
        if acc_a + acc_b >= 10:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if rows_a:
            rows_a[-1] += acc_a
            rows_b[-1] += acc_b
        else:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
    if len(rows_a) < 2:
        return 1.0
    return float(stats.chi2_contingency(np.array([rows_a, rows_b]))[1])


def mc_twin(t: float, n: int, seed: int = DEFAULT_SEED, jobs: int = 1) -> dict:
    """Thinning simulator against the competing-exponentials construction."""
    a = run_replicates(_TwinJob(t, False), n, seed, jobs)
    b = run_replicates(_TwinJob(t, True), n, seed + 7919, jobs)
    A = {k: np.array([r[k] for r in a]) for k in a[0]}
    B = {k: np.array([r[k] for r in b]) for k in b[0]}
    return {
        "cell_count_p": _chi2_discrete(A["cell_count"], B["cell_count"]),
        "sigma0_p": _chi2_discrete(A["sigma0"], B["sigma0"], decimals=6),
        "surface_p": float(stats.ks_2samp(A["surface"], B["surface"]).pvalue),
        "mean_cells": (float(A["cell_count"].mean()), float(B["cell_count"].mean())),
        "mean_surface": (float(A["surface"].mean()), float(B["surface"].mean())),
    }


# --- export --------------------------------------------------------------------------------


def _flatten(rep: EstimateReport) -> dict:
    d = rep.to_dict()
    d["ci95_lo"], d["ci95_hi"] = d.pop("ci95")
    d.pop("details")
    return d


def reports_json(reports: Sequence[EstimateReport]) -> str:
    return json.dumps({"version": __version__, "reports": [r.to_dict() for r in reports]}, sort_keys=True, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))


def reports_csv(reports: Sequence[EstimateReport]) -> str:
    buf = io.StringIO()
    buf.write(f"# sphere-split v{__version__} schema=reports\n")
    rows = [_flatten(r) for r in reports]
    cols = sorted({k for r in rows for k in r})
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
