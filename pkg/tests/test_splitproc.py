import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from sphere_split import sphgeo, splitproc
from sphere_split.dirdist import DirectionDistribution
from sphere_split.sphgeo import GeodesicSegment, UnitVector, hemisphere, polytope_from_halfspheres
from sphere_split.splitproc import simulate, simulate_direct_2d


def four_lunes():
    return [polytope_from_halfspheres([(a, 0.0, 0.0), (0.0, b, 0.0)], 2) for a in (1.0, -1.0) for b in (1.0, -1.0)]


# --- simulate --------------------------------------------------------------------------


def test_zero_time_returns_initial():
    Y = simulate(2, None, 0.0, 1)
    assert Y.n_cells == 1 and Y.events == []
    Y = simulate(2, None, 0.0, 1, initial=four_lunes())
    assert Y.n_cells == 4 and Y.events == []


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        simulate(2, None, -1.0, 1)
    with pytest.raises(ValueError):
        simulate(2, None, math.inf, 1)
    with pytest.raises(ValueError):
        simulate(2, DirectionDistribution.uniform(3), 1.0, 1)


def test_overlapping_initial_cells_rejected():
    with pytest.raises(ValueError):
        simulate(2, None, 1.0, 1, initial=[hemisphere((0.0, 0.0, 1.0)), hemisphere((1.0, 0.0, 0.0))])
    with pytest.raises(ValueError):
        simulate(2, None, 1.0, 1, initial=[hemisphere((0.0, 0.0, 1.0))])


def test_event_log_is_reproducible():
    a = splitproc.events_csv(simulate(2, None, 4.0, 99))
    b = splitproc.events_csv(simulate(2, None, 4.0, 99))
    c = splitproc.events_csv(simulate(2, None, 4.0, 100))
    assert a == b and a != c
    assert a.startswith("# sphere-split v0.1.0 schema=events\ntime,parent_id,child_id_a,child_id_b,normal_coords,piece_measure\n")


@given(st.integers(0, 2**31), st.floats(0.0, 6.0))
def test_cell_count_and_time_order(seed, t):
    Y = simulate(2, None, t, seed)
    assert Y.n_cells == len(Y.events) + 1
    times = [e.time for e in Y.events]
    assert times == sorted(times) and all(0 < s <= t for s in times)


@given(st.integers(0, 2**31))
def test_invariants_every_realization(seed):
    Y = simulate(2, None, 4.0, seed, audit=True)
    inv = splitproc.check_invariants(Y)
    assert inv["cells_equals_events_plus_initial"] and inv["hv_consistent"]
    assert inv["area_partition_error"] <= 1e-8
    assert inv["split_area"] <= 1e-9 and inv["split_perimeter"] <= 1e-9
    if len(Y.events) >= 2:
        assert inv["euler"] == 2 and inv["all_degree_three"] and inv["vertex_count_ok"]


def test_initial_tessellation_cells():
    Y = simulate(2, None, 3.0, 4, initial=four_lunes())
    assert Y.n_cells == len(Y.events) + 4
    assert math.fsum(sphgeo.polygon_area_2d(c) for c in Y.cells.values()) == pytest.approx(4 * math.pi, abs=1e-8)


def test_first_split_law():
    times = [simulate(2, None, math.inf, s, max_events=1).events[0].time for s in range(3000)]
    assert stats.kstest(times, "expon").pvalue > 0.01


def test_mean_cells_at_t3():
    n = 2000
    x = np.array([simulate(2, None, 3.0, s).n_cells for s in range(n)], dtype=float)
    assert abs(x.mean() - (9 + 2 - math.exp(-3))) <= 4 * x.std() / math.sqrt(n)


def test_thinning_acceptance_slope_is_one():
    """Acceptance indicator regressed on perimeter / (2 pi) through the origin has slope 1."""
    r = np.random.default_rng(8)
    xs, ys = [], []
    for s in range(600):
        Y = simulate(2, None, 3.0, s)
        for c in Y.cells.values():
            for _ in range(3):
                g = r.standard_normal(3)
                u = splitproc._canon3(tuple(g / np.linalg.norm(g)))
                try:
                    hit = sphgeo._split2(c, u, sphgeo.EPS) is not None
                except sphgeo.Degenerate:
                    continue
                xs.append(sphgeo.perimeter_2d(c) / (2 * math.pi))
                ys.append(float(hit))
    x, y = np.array(xs), np.array(ys)
    b = float(x @ y / (x @ x))
    resid = y - b * x
    se = math.sqrt(float(np.sum((x * resid) ** 2))) / float(x @ x)
    assert abs(b - 1.0) <= 4 * se


def test_twin_constructions_agree_in_mean():
    n = 2000
    a = np.array([[simulate(2, None, 2.0, s).n_cells, splitproc.union_measure(simulate(2, None, 2.0, s))] for s in range(n)])
    b = np.array([[simulate_direct_2d(2.0, 10**6 + s).n_cells, splitproc.union_measure(simulate_direct_2d(2.0, 10**6 + s))] for s in range(n)])
    for k in range(2):
        se = math.hypot(a[:, k].std(), b[:, k].std()) / math.sqrt(n)
        assert abs(a[:, k].mean() - b[:, k].mean()) <= 4 * se


def test_direct_rejects_anisotropy():
    with pytest.raises(ValueError):
        simulate_direct_2d(1.0, 1, DirectionDistribution.axial(2, 1.0))
    assert simulate_direct_2d(0.0, 1).n_cells == 1


def test_d3_runs_and_partitions():
    Y = simulate(3, None, 2.0, 3, audit=True)
    assert Y.n_cells == len(Y.events) + 1
    assert Y.audit.get("split_area", 0.0) <= 1e-9


def test_anisotropic_simulation_runs():
    Y = simulate(2, DirectionDistribution.axial(2, 4.0), 3.0, 5, audit=True)
    assert splitproc.check_invariants(Y)["area_partition_error"] <= 1e-8


# --- functionals ------------------------------------------------------------------------


def test_union_measure_examples():
    assert splitproc.union_measure(simulate(2, None, 0.0, 1)) == 0.0
    one2 = simulate(2, None, math.inf, 1, max_events=1)
    one3 = simulate(3, None, math.inf, 1, max_events=1)
    assert splitproc.union_measure(one2) == pytest.approx(2 * math.pi)
    assert splitproc.union_measure(one3) == pytest.approx(4 * math.pi)


def test_weighted_union_measure_with_unit_weight():
    Y = simulate(2, None, 3.0, 12)
    assert splitproc.union_measure(Y, h=lambda p: np.ones(len(p))) == pytest.approx(splitproc.union_measure(Y))


def test_mean_boundary_length_at_t3():
    n = 2000
    x = np.array([splitproc.union_measure(simulate(2, None, 3.0, s)) for s in range(n)])
    assert abs(x.mean() - 6 * math.pi) <= 4 * x.std() / math.sqrt(n)


def test_sigma_examples():
    Y0 = simulate(2, None, 0.0, 1)
    assert splitproc.sigma_j(Y0, 0) == 0.0 and splitproc.sigma_j(Y0, 1) == 0.0
    Y = simulate(2, None, 3.0, 2)
    assert splitproc.sigma_j(Y, 2) == pytest.approx(1.0)
    assert splitproc.sigma_j(Y, 1) == pytest.approx(splitproc.union_measure(Y) / (2 * math.pi))
    Y3 = simulate(3, None, 1.5, 2)
    assert splitproc.sigma_j(Y3, 3) == 1.0
    with pytest.raises(ValueError):
        splitproc.sigma_j(Y3, 0)


def test_mean_sigma0_at_t3():
    n = 2000
    x = np.array([splitproc.sigma_j(simulate(2, None, 3.0, s), 0) for s in range(n)])
    assert abs(x.mean() - 4.5) <= 4 * x.std() / math.sqrt(n)


def test_maximal_segments():
    Y = simulate(2, None, math.inf, 3, max_events=1)
    (seg,) = splitproc.maximal_segments(Y)
    assert seg.length == pytest.approx(2 * math.pi) and seg.birth_time == Y.events[0].time
    Y = simulate(2, None, 3.0, 3)
    segs = splitproc.maximal_segments(Y)
    assert len(segs) == len(Y.events)
    assert all(0 < s.length <= 2 * math.pi for s in segs)
    with pytest.raises(ValueError):
        splitproc.maximal_segments(simulate(3, None, 1.0, 3))


# --- capacity indicator ----------------------------------------------------------------


@given(st.integers(0, 2**31), st.floats(0.0, 5.0))
def test_antipodal_points_always_avoided(seed, t):
    x = UnitVector(tuple(np.random.default_rng(seed).standard_normal(3)))
    Y = simulate(2, None, t, seed)
    assert splitproc.capacity_indicator(Y, [x, -x])


def test_indicator_agrees_with_brute_force_sampling():
    """A segment is hit iff some point sampled densely along it changes cell."""
    r = np.random.default_rng(0)
    for s in range(60):
        Y = simulate(2, None, 3.0, s)
        a, b = r.standard_normal((2, 3))
        seg = GeodesicSegment(UnitVector(tuple(a)), UnitVector(tuple(b)))
        pts = np.array([seg.point(x) for x in np.linspace(0, seg.length, 4000)])
        idx = sphgeo.points_in_cells(pts, list(Y.cells.values()))
        assert splitproc.capacity_indicator(Y, seg) == (len(set(idx.tolist())) == 1)


def test_segment_avoidance_frequency():
    seg = GeodesicSegment(UnitVector((0.5, 0.5, math.sqrt(0.5))), UnitVector((0.5, 0.5, -math.sqrt(0.5))))
    n = 4000
    p = np.mean([splitproc.capacity_indicator(simulate(2, None, 3.0, s), seg) for s in range(n)])
    assert abs(p - math.exp(-1.5)) <= 4 * math.sqrt(p * (1 - p) / n)


def test_polytope_capacity_agrees_with_brute_force():
    r = np.random.default_rng(1)
    cap = polytope_from_halfspheres([(0.4, 0.0, 1.0), (-0.4, 0.0, 1.0), (0.0, 0.4, 1.0), (0.0, -0.4, 1.0)])
    g = r.standard_normal((20000, 3))
    g /= np.linalg.norm(g, axis=1)[:, None]
    inside = g[np.all(g @ cap.normals_array().T >= 0, axis=1)]
    for s in range(60):
        Y = simulate(2, None, 2.0, s)
        idx = sphgeo.points_in_cells(inside, list(Y.cells.values()))
        brute = len(set(idx.tolist())) == 1
        got = splitproc.capacity_indicator(Y, cap)
        # a piece can cross the cap without separating the sample only on a sliver
        assert got == brute or not got


# --- topology and export ------------------------------------------------------------------


def test_arrangement_graph_single_event():
    g = splitproc.arrangement_graph_2d(simulate(2, None, math.inf, 1, max_events=1))
    assert (g.V, g.E, g.F) == (0, 1, 2)


@given(st.integers(0, 2**31))
def test_arrangement_graph_counts(seed):
    Y = simulate(2, None, 3.5, seed)
    if len(Y.events) < 2:
        return
    g = splitproc.arrangement_graph_2d(Y)
    assert g.V == 2 * (len(Y.events) - 1) and g.F == Y.n_cells and g.euler == 2
    assert set(g.degree_histogram) == {3}


def test_snapshot_json():
    Y = simulate(2, None, 2.0, 5)
    doc = json.loads(splitproc.snapshot_json(Y))
    assert doc["schema"] == "snapshot" and len(doc["cells"]) == Y.n_cells and doc["seed"] == 5
    doc3 = json.loads(splitproc.snapshot_json(simulate(3, None, 1.0, 5)))
    assert "extreme_rays" in doc3["cells"][0]
