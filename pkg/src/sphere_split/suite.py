"""The verification suite: fourteen criteria, each a set of gates.

A criterion passes when every gate in it passes. Gates are either
EstimateReports (z-score against a reference) or named boolean checks with a
recorded value. ``SCALES`` fixes the replicate counts; "full" is the
reference configuration, "quick" a smoke-level run of the same gates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import analytics, estimate, splitproc
from ._report import EstimateReport, gate_threshold, make_report
from ._rng import DEFAULT_SEED, child_seed, replicate_rng
from .dirdist import DirectionDistribution, UnitVector, GeodesicSegment, beta_dim

FIGURE_TABLE = (
    31.449, 125.133, 308.091, 547.089, 758.774, 862.902, 831.403, 694.804, 512.613, 338.515,
    202.312, 110.42, 55.453, 25.79, 11.168, 4.524, 1.772, 0.618, 0.209,
)

SCALES = {
    "full": {
        "first_split": 10_000, "moments_t3": 10_000, "var_t1": 100_000, "var_d3": 100_000,
        "second_order": 100_000, "ea_n": 2_000, "capacity": 100_000, "capacity_measures": 1_000_000,
        "pcf": 2_000, "pcf_audit": 100, "segments": 10_000, "bp": 1_000_000, "structure": 2_000,
        "twin": 10_000, "axial": 50_000, "axial_general": 1_000_000,
    },
    "quick": {
        "first_split": 10_000, "moments_t3": 2_000, "var_t1": 20_000, "var_d3": 5_000,
        "second_order": 10_000, "ea_n": 300, "capacity": 10_000, "capacity_measures": 200_000,
        "pcf": 300, "pcf_audit": 20, "segments": 2_000, "bp": 200_000, "structure": 300,
        "twin": 2_000, "axial": 10_000, "axial_general": 200_000,
    },
}

# z-score gates across the suite (criteria 2-11 and 14); sets the family-wise threshold
N_GATES = 26


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None


@dataclass
class CriterionResult:
    number: int
    title: str
    reports: list[EstimateReport] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports if r.passed is not None) and all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        out = [r.summary() for r in self.reports if r.passed is False]
        out += [f"{c.name}: {c.value!r}" for c in self.checks if not c.passed]
        return out

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number:2d}: {self.title}"

    def to_dict(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "pass": self.passed,
            "wall_time": self.wall_time,
            "reports": [r.to_dict() for r in self.reports],
            "checks": [{"name": c.name, "pass": c.passed, "value": c.value} for c in self.checks],
        }


_override: list[float] = []


def _thr() -> float:
    return _override[-1] if _override else gate_threshold(N_GATES)


def _reports(moments: dict, keys) -> list[EstimateReport]:
    return [moments[k] for k in keys]


# --- criteria ------------------------------------------------------------------------------


def c01_first_split(n: dict, seed: int, jobs: int) -> CriterionResult:
    def first(rng):
        Y = splitproc.simulate(2, None, math.inf, rng, max_events=1)
        return Y.events[0].time

    times = np.array(estimate.run_replicates(first, n["first_split"], child_seed(seed, 1), 1))
    p = float(stats.kstest(times, "expon").pvalue)
    return CriterionResult(1, "first split time is Exp(1)", checks=[Check("ks_pvalue>=0.01", p >= 0.01, p)])


def _moments_t3(n: dict, seed: int, jobs: int) -> dict:
    t = 3.0
    refs = {
        "mean:surface": analytics.expected_surface(2, t),
        "mean:sigma0": analytics.expected_sigma(2, 0, t),
        "mean:sigma1": analytics.expected_sigma(2, 1, t),
        "mean:cell_count": analytics.expected_cell_count(2, t),
    }
    return estimate.mc_moments(
        2, None, t, n["moments_t3"], child_seed(seed, 2),
        means=("surface", "sigma0", "sigma1", "cell_count"), references=refs, threshold=_thr(), jobs=jobs, audit=True,
    )


def _t3(n, seed, jobs, cache) -> dict:
    if "t3" not in cache:
        cache["t3"] = _moments_t3(n, seed, jobs)
    return cache["t3"]


def _invariant_check(m: dict) -> Check:
    inv = next(iter(v for k, v in m.items() if not k.startswith("_"))).details["invariants"]
    return Check("structural_invariants", estimate.invariants_ok(inv), inv)


def c02_mean_surface(n, seed, jobs, cache) -> CriterionResult:
    m = _t3(n, seed, jobs, cache)
    return CriterionResult(2, "mean surface at t = 3 is 6 pi", _reports(m, ["mean:surface"]), [_invariant_check(m)])


def c03_curvature_sums(n, seed, jobs, cache) -> CriterionResult:
    m = _t3(n, seed, jobs, cache)
    return CriterionResult(3, "mean curvature sums at t = 3", _reports(m, ["mean:sigma0", "mean:sigma1"]), [_invariant_check(m)])


def c04_cell_count(n, seed, jobs, cache) -> CriterionResult:
    m = _t3(n, seed, jobs, cache)
    exact = 9.0 + 2.0 - math.exp(-3.0)
    return CriterionResult(
        4,
        "mean cell count at t = 3",
        _reports(m, ["mean:cell_count"]),
        [Check("poisson_series==t^2+2-e^-t", abs(analytics.expected_cell_count(2, 3.0) - exact) < 1e-10, analytics.expected_cell_count(2, 3.0))],
    )


def c05_variance(n, seed, jobs, cache) -> CriterionResult:
    ref = analytics.var_surface_isotropic(2, 1.0)
    m = estimate.mc_moments(2, None, 1.0, n["var_t1"], child_seed(seed, 5), means=(), variances=("surface",), references={"var:surface": ref}, threshold=_thr(), jobs=jobs)
    checks = []
    for t in (0.5, 1.0, 2.0, 5.0):
        err = abs(analytics.var_surface_isotropic(2, t) - analytics.var_surface_2d_closed(t))
        checks.append(Check(f"quadrature_vs_closed_form(t={t})<=1e-8", err <= 1e-8, err))
    return CriterionResult(5, "surface variance at t = 1, d = 2", _reports(m, ["var:surface"]), checks)


def c06_figure(n, seed, jobs, cache) -> CriterionResult:
    vals = analytics.figure_variances(1.0, 20)
    checks = []
    for d, (v, tab) in enumerate(zip(vals, FIGURE_TABLE), start=2):
        checks.append(Check(f"var_surface_isotropic(d={d}, 1) vs {tab}", abs(v - tab) <= 1e-3 + 1e-12, round(v, 6)))
    ref = analytics.var_surface_isotropic(3, 1.0)
    m = estimate.mc_moments(3, None, 1.0, n["var_d3"], child_seed(seed, 6), means=(), variances=("surface",), references={"var:surface": ref}, threshold=_thr(), jobs=jobs)
    return CriterionResult(6, "isotropic variance table d = 2..20 and d = 3 spot check", _reports(m, ["var:surface"]), checks)


def c07_second_order(n, seed, jobs, cache) -> CriterionResult:
    t = 2.0
    refs = {"var:sigma0": analytics.var_sigma0_2d(t), "cov:sigma0,sigma1": analytics.cov_sigma0_sigma1_2d(t)}
    m = estimate.mc_moments(
        2, None, t, n["second_order"], child_seed(seed, 7), means=(), variances=("sigma0",),
        covariances=(("sigma0", "sigma1"),), references=refs, threshold=_thr(), jobs=jobs,
    )
    grid = np.linspace(0.0, t, 21)
    curves = estimate.mc_EA(grid, n["ea_n"], child_seed(seed, 70), jobs=jobs)
    val, se = analytics.covariance_recursion(1, 1, t, curves, 2, return_se=True)
    rec = make_report("recursion_from_mc_EA:var_sigma0", n["ea_n"] * (len(grid) - 1), val, se, refs["var:sigma0"], _thr(), seed)
    return CriterionResult(7, "second-order d = 2 suite at t = 2", _reports(m, ["var:sigma0", "cov:sigma0,sigma1"]) + [rec])


def _arc(p, q) -> GeodesicSegment:
    return GeodesicSegment(UnitVector(tuple(p / np.linalg.norm(p))), UnitVector(tuple(q / np.linalg.norm(q))))


def two_arcs():
    """Two disjoint short arcs near the north pole with a nonempty separating set."""
    a = _arc(np.array([0.3, 0.2, 1.0]), np.array([0.6, -0.1, 1.0]))
    b = _arc(np.array([-0.5, 0.4, 1.0]), np.array([-0.2, 0.7, 1.0]))
    return [a, b]


def four_lunes():
    """Initial tessellation cut by the great circles e1^perp and e2^perp."""
    from .sphgeo import polytope_from_halfspheres

    cells = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            cells.append(polytope_from_halfspheres([(s1, 0.0, 0.0), (0.0, s2, 0.0)], 2))
    return cells


def c08_capacity(n, seed, jobs, cache) -> CriterionResult:
    thr = _thr()
    seg = GeodesicSegment(UnitVector((0.5, 0.5, math.sqrt(0.5))), UnitVector((0.5, 0.5, -math.sqrt(0.5))))
    ref = analytics.capacity_connected(seg.length / math.pi, 3.0)
    r1 = estimate.mc_capacity(2, None, 3.0, seg, n["capacity"], child_seed(seed, 8), reference=ref, threshold=thr, jobs=jobs, name="capacity:segment(pi/2),t=3")
    arcs = two_arcs()
    val, se, hull, sep = estimate.capacity_reference_mc(
        DirectionDistribution.uniform(2), arcs, 2.0, n["capacity_measures"], replicate_rng(child_seed(seed, 80), 0)
    )
    two = analytics.capacity_two_components(hull[frozenset({0})], hull[frozenset({1})], hull[frozenset({0, 1})], next(iter(sep.values())), 2.0)
    r2 = estimate.mc_capacity(2, None, 2.0, arcs, n["capacity"], child_seed(seed, 81), reference=two, reference_se=se, threshold=thr, jobs=jobs, name="capacity:two_arcs,t=2")
    # C lies in the cell x1 > 0, x2 > 0 of the four-lune start
    r3 = estimate.mc_capacity(
        2, None, 3.0, seg, n["capacity"], child_seed(seed, 82), reference=ref, initial=four_lunes(), threshold=thr, jobs=jobs, name="capacity:segment(pi/2),t=3,four_lunes"
    )
    checks = [Check("recursion(m=2)==closed_form", abs(val - two) <= 1e-10, abs(val - two))]
    return CriterionResult(8, "capacity functional", [r1, r2, r3], checks)


PCF_R = (math.pi / 4, math.pi / 2, 3 * math.pi / 4)


def c09_pcf(n, seed, jobs, cache) -> CriterionResult:
    thr = _thr()
    split = estimate.mc_pcf(2.0, n["pcf"], PCF_R, child_seed(seed, 9), "split", audit_n=n["pcf_audit"], threshold=thr, jobs=jobs)
    pois = estimate.mc_pcf(2.0, n["pcf"], PCF_R, child_seed(seed, 90), "poisson", threshold=thr, jobs=jobs)
    checks = [Check(f"discretization_shift(r={r.details['r']:.4f})<1%", r.details["discretization_shift"] < 0.01, r.details["discretization_shift"]) for r in split]
    grid = np.linspace(0.01, math.pi - 0.01, 400)
    dom = min(analytics.pcf_poisson(2, 2.0, r) - analytics.pcf_split(2, 2.0, r) for r in grid)
    checks.append(Check("analytic g_split <= g_poisson on grid", dom >= 0.0, dom))
    for a, b in zip(split, pois):
        diff = estimate.compare_reports(f"poisson-split(r={a.details['r']:.4f})", b, a)
        z = diff.z_score
        checks.append(Check(f"empirical g_poisson >= g_split - 4 SE (r={a.details['r']:.4f})", z >= -thr, z))
    return CriterionResult(9, "pair correlation at t = 2", split + pois, checks)


def c10_segments(n, seed, jobs, cache) -> CriterionResult:
    t = 3.0
    s = estimate.mc_typical_segment(t, n["segments"], child_seed(seed, 10), threshold=_thr(), jobs=jobs)
    err = abs(analytics.n1_split_integral(2, t) - analytics.n1_split(2, t))
    checks = [
        Check("birth_time_ks_pvalue>=0.01", s["birth_ks"]["pvalue"] >= 0.01, s["birth_ks"]),
        Check("n1_integral_identity<=1e-10", err <= 1e-10, err),
    ]
    return CriterionResult(10, "typical maximal segments at t = 3", [s["count"], s["mean_length"]], checks)


def _g_half(x, y):
    return (np.einsum("ij,ij->i", x, y) >= 0.0).astype(float)


def _g_cos2(x, y):
    return np.einsum("ij,ij->i", x, y) ** 2


def c11_bp(n, seed, jobs, cache) -> CriterionResult:
    reps = []
    for d in (2, 3):
        for k, (name, g) in enumerate((("1(l<=pi/2)", _g_half), ("cos^2(l)", _g_cos2))):
            r = estimate.mc_bp_identity(d, g, n["bp"], replicate_rng(child_seed(seed, 11), 10 * d + k), name=f"bp(d={d},{name})", threshold=_thr())
            reps.append(r["diff"])
    return CriterionResult(11, "transformation formula for pair integrals", reps)


@dataclass
class _StructJob:
    t: float

    def __call__(self, rng):
        Y = splitproc.simulate(2, None, self.t, rng, audit=True)
        return {"_invariants": splitproc.check_invariants(Y)}


def c12_structure(n, seed, jobs, cache) -> CriterionResult:
    checks = []
    for t in (1.0, 3.0, 5.0):
        recs = estimate.run_replicates(_StructJob(t), n["structure"], child_seed(seed, 12, int(10 * t)), jobs)
        inv = estimate.invariant_summary(recs)
        checks.append(Check(f"split invariants t={t}", estimate.invariants_ok(inv), inv))
    pois = estimate.mc_poisson(3.0, n["structure"], child_seed(seed, 120), jobs)
    checks.append(Check("poisson face counts exact", bool(np.all(pois["counts_ok"])), int(np.sum(~pois["counts_ok"]))))
    checks.append(Check("poisson area partition <= 1e-8", float(pois["area_error"].max()) <= 1e-8, float(pois["area_error"].max())))
    length_err = float(np.max(np.abs(pois["edge_length"] - 2 * math.pi * pois["n"])))
    checks.append(Check("poisson edge length == 2 pi N", length_err <= 1e-8, length_err))
    return CriterionResult(12, "structural invariants", checks=checks)


def c13_twin(n, seed, jobs, cache) -> CriterionResult:
    r = estimate.mc_twin(2.0, n["twin"], child_seed(seed, 13), jobs)
    checks = [Check(f"{k}>=0.01", r[k] >= 0.01, r[k]) for k in ("cell_count_p", "surface_p", "sigma0_p")]
    return CriterionResult(13, "thinning and direct constructions agree", checks=checks)


def c14_axial(n, seed, jobs, cache) -> CriterionResult:
    t = 1.0
    kappa = DirectionDistribution.axial(2, 4.0)
    m = estimate.mc_moments(
        2, kappa, t, n["axial"], child_seed(seed, 14), means=("surface",), variances=("surface",),
        references={"mean:surface": beta_dim(1) * t}, threshold=_thr(), jobs=jobs,
    )
    g = analytics.var_surface_general(kappa, t, n=n["axial_general"], rng=replicate_rng(child_seed(seed, 140), 0))
    diff = estimate.compare_reports("var_surface_general-mc_variance", g, m["var:surface"], _thr())
    return CriterionResult(14, "axial law self-consistency", [m["mean:surface"], diff])


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("first split time is Exp(1) (KS, 1%)", c01_first_split),
    2: ("E H^1(Z_3) = 6 pi, d = 2", c02_mean_surface),
    3: ("E Sigma_0(3) = 4.5, E Sigma_1(3) = 3", c03_curvature_sums),
    4: ("E |Y_3| = t^2 + 2 - e^-t", c04_cell_count),
    5: ("Var H^1(Z_1) = 31.4485; quadrature vs closed form", c05_variance),
    6: ("variance table d = 2..20 at t = 1; MC at d = 3", c06_figure),
    7: ("Var Sigma_0(2), Cov(Sigma_0, Sigma_1)(2), recursion from mc_EA", c07_second_order),
    8: ("capacity: segment, two arcs, four-lune start", c08_capacity),
    9: ("pair correlation split and Poisson at t = 2", c09_pcf),
    10: ("typical maximal segments at t = 3", c10_segments),
    11: ("pair-integral transformation, d = 2, 3", c11_bp),
    12: ("structural invariants", c12_structure),
    13: ("thinning vs competing exponentials", c13_twin),
    14: ("axial law: mean and variance self-consistency", c14_axial),
}


def run_criterion(k: int, scale: str = "full", seed: int = DEFAULT_SEED, jobs: int = 1, cache: dict | None = None) -> CriterionResult:
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}")
    _, fn = CRITERIA[k]
    t0 = time.perf_counter()
    cache = {} if cache is None else cache
    if k == 1:
        res = fn(SCALES[scale], seed, jobs)
    else:
        res = fn(SCALES[scale], seed, jobs, cache)
    res.wall_time = time.perf_counter() - t0
    return res


def run_suite(
    scale: str = "full", seed: int = DEFAULT_SEED, jobs: int = 1, only=None, progress=None, threshold: float | None = None
) -> list[CriterionResult]:
    """Run the criteria in order; ``threshold`` replaces every z gate's threshold."""
    cache: dict = {}
    out = []
    if threshold is not None:
        _override.append(float(threshold))
    try:
        for k in sorted(CRITERIA):
            if only and k not in only:
                continue
            res = run_criterion(k, scale, seed, jobs, cache)
            if progress:
                progress(res)
            out.append(res)
    finally:
        if threshold is not None:
            _override.pop()
    return out


def manifest() -> list[dict]:
    """Every criterion with its gate threshold, for ``verify --list`` and export."""
    return [{"criterion": k, "description": desc, "z_threshold": _thr(), "scales": {s: SCALES[s] for s in SCALES}} for k, (desc, _) in sorted(CRITERIA.items())]
