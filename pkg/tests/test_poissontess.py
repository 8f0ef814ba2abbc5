import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sphere_split import analytics, poissontess as pt, sphgeo
from sphere_split.dirdist import DirectionDistribution, hitting_measure_isotropic
from sphere_split.sphgeo import GeodesicSegment, UnitVector, polytope_from_halfspheres


def test_empty_at_time_zero():
    P = pt.sample(2, None, 0.0, 1)
    assert P.n == 0 and P.arrangement.n_cells == 1
    assert pt.surface_measure(P) == 0.0
    with pytest.raises(ValueError):
        pt.sample(2, None, -0.5, 1)
    with pytest.raises(ValueError):
        pt.sample(2, DirectionDistribution.uniform(3), 1.0, 1)


def test_count_is_poisson():
    r = np.random.default_rng(3)
    n = 4000
    N = np.array([pt.sample(2, None, 5.0, r, build_arrangement=False).n for _ in range(n)], dtype=float)
    assert abs(N.mean() - 5.0) <= 4 * math.sqrt(5.0 / n)
    assert abs(N.var() - 5.0) <= 4 * 5.0 * math.sqrt(2.0 / n + 1.0 / (5.0 * n))


@pytest.mark.parametrize(
    "N,d,k,expected",
    [(3, 2, 0, 6), (3, 2, 1, 12), (3, 2, 2, 8), (1, 2, 0, 0), (1, 2, 1, 1), (1, 2, 2, 2),
     (0, 2, 2, 1), (3, 3, 1, 6), (3, 3, 3, 8), (4, 3, 0, 8), (4, 3, 3, 16)],
)
def test_face_counts(N, d, k, expected):
    assert pt.face_counts(N, d, k) == expected


def test_face_counts_euler_relation():
    for N in range(2, 12):
        assert pt.face_counts(N, 2, 0) - pt.face_counts(N, 2, 1) + pt.face_counts(N, 2, 2) == 2
    with pytest.raises(ValueError):
        pt.face_counts(-1, 2, 0)
    with pytest.raises(ValueError):
        pt.face_counts(3, 3, 2)


def test_total_edge_length():
    assert pt.total_edge_length(4, 2) == pytest.approx(8 * math.pi)
    assert pt.total_edge_length(0, 2) == 0.0


def test_two_circles_give_four_lunes():
    P = pt.PoissonGHT(2, 1.0, [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)])
    arr = pt.arrangement_2d(P)
    assert arr.n_cells == 4 and arr.n_vertices == 2 and arr.n_edges == 4
    for c in arr.cells:
        assert sphgeo.polygon_area_2d(c) == pytest.approx(math.pi)


@given(st.integers(0, 2**31), st.floats(0.0, 8.0))
def test_arrangement_matches_face_counts(seed, t):
    P = pt.sample(2, None, t, seed)
    arr = P.arrangement
    assert arr.n_cells == pt.face_counts(P.n, 2, 2)
    assert arr.n_vertices == pt.face_counts(P.n, 2, 0)
    assert arr.n_edges == pt.face_counts(P.n, 2, 1)
    assert math.fsum(sphgeo.polygon_area_2d(c) for c in arr.cells) == pytest.approx(4 * math.pi, abs=1e-8)
    assert pt.measured_total_edge_length(P) == pytest.approx(pt.total_edge_length(P.n, 2), abs=1e-8)


def test_mean_edge_length_ratio_estimator():
    r = np.random.default_rng(11)
    t = 3.0
    L, E = [], []
    for _ in range(3000):
        P = pt.sample(2, None, t, r)
        L.append(pt.measured_total_edge_length(P))
        E.append(P.arrangement.n_edges)
    L, E = np.array(L), np.array(E, dtype=float)
    ratio = L.mean() / E.mean()
    resid = L - ratio * E
    se = resid.std() / (E.mean() * math.sqrt(len(L)))
    assert abs(ratio - analytics.mean_edge_length_poisson(t)) <= 4 * se


def test_dynamic_marginal_matches_static():
    n = 3000
    dyn = np.array([pt.dynamic_simulate(2, None, 2.5, s, keep_cells=False) for s in range(n)], dtype=object)
    cd = np.array([p.cell_counts[-1] if p.cell_counts else 1 for p in dyn], dtype=float)
    cs = np.array([pt.face_counts(pt.sample(2, None, 2.5, 10**6 + s, build_arrangement=False).n, 2, 2) for s in range(n)], dtype=float)
    assert abs(cd.mean() - cs.mean()) <= 4 * math.hypot(cd.std(), cs.std()) / math.sqrt(n)


def test_dynamic_cell_counts_increase():
    path = pt.dynamic_simulate(2, None, 6.0, 4)
    counts = [1] + path.cell_counts
    assert all(b - a >= 2 for a, b in zip(counts[1:], counts[2:]))
    assert path.cell_counts == [pt.face_counts(k + 1, 2, 2) for k in range(len(path.times))]
    assert len(path.cells) == counts[-1]


def test_dynamic_d3():
    path = pt.dynamic_simulate(3, None, 3.0, 9)
    assert path.cell_counts == [pt.face_counts(k + 1, 3, 3) for k in range(len(path.times))]


def test_capacity_of_polygon():
    B = polytope_from_halfspheres([(0.3, 0.0, 1.0), (-0.3, 0.0, 1.0), (0.0, 0.3, 1.0), (0.0, -0.3, 1.0)])
    kB = hitting_measure_isotropic(B)
    t, n = 3.0, 6000
    r = np.random.default_rng(2)
    p = np.mean([pt.capacity_indicator(pt.sample(2, None, t, r, build_arrangement=False), B) for _ in range(n)])
    assert abs(p - math.exp(-t * kB)) <= 4 * math.sqrt(p * (1 - p) / n)


def test_capacity_of_points():
    x = np.array([0.0, 0.0, 1.0])
    P = pt.PoissonGHT(2, 1.0, [(1.0, 0.0, 0.0)])
    assert not pt.capacity_indicator(P, [UnitVector(x), UnitVector(-x)])
    assert pt.capacity_indicator(P, [UnitVector((1.0, 0.0, 0.0)), UnitVector((-1.0, 0.0, 0.0))])
    seg = GeodesicSegment(UnitVector((1.0, 0.2, 0.0)), UnitVector((-1.0, 0.2, 0.0)))
    assert not pt.capacity_indicator(P, seg)
    assert pt.capacity_indicator(pt.PoissonGHT(2, 1.0, []), seg)


def test_surface_intensity_equals_split_mean():
    r = np.random.default_rng(6)
    n = 4000
    S = np.array([pt.surface_measure(pt.sample(2, None, 3.0, r, build_arrangement=False)) for _ in range(n)])
    assert abs(S.mean() - analytics.expected_surface(2, 3.0)) <= 4 * S.std() / math.sqrt(n)


def test_general_position():
    assert pt.general_position([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)], 2)
    assert not pt.general_position([(1.0, 0.0, 0.0), (1.0, 0.0, 0.0)], 2)
    assert not pt.general_position([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, 1.0, 0.0)], 2)
    assert pt.general_position([], 2)


def test_exports():
    P = pt.sample(2, None, 3.0, 17)
    doc = json.loads(pt.snapshot_json(P))
    assert doc["model"] == "poisson" and len(doc["normals"]) == P.n and len(doc["cells"]) == P.arrangement.n_cells
    lines = pt.normals_csv(P).splitlines()
    assert lines[:2] == ["# sphere-split v0.1.0 schema=normals", "index,normal_coords"]
    assert len(lines) == P.n + 2
