import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from bilevel_nav.geometry import VectorMap, load_map
from bilevel_nav.global_planner import PlanningError, astar, build_nav_graph
from bilevel_nav.scenario import SCENARIO_DIR


def oracle_matrix(g):
    n = len(g.vertices)
    a, b = g.edges[:, 0], g.edges[:, 1]
    return csr_matrix((np.r_[g.weights, g.weights], (np.r_[a, b], np.r_[b, a])), shape=(n, n))


def brute_clearance(p, segments):
    best = math.inf
    for (ax, ay), (bx, by) in segments:
        dx, dy = bx - ax, by - ay
        t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        best = min(best, math.hypot(p[0] - ax - t * dx, p[1] - ay - t * dy))
    return best


@pytest.fixture(scope="module")
def doorway_graph():
    m = load_map(SCENARIO_DIR / "doorway.map")
    return m, build_nav_graph(m, 0.1, 0.2)


def test_open_lattice_counts():
    g = build_nav_graph(VectorMap(np.zeros((0, 2, 2)), (0, 0, 3, 3)), 1.0, 0.2)
    assert len(g.vertices) == 16
    # 12 horizontal + 12 vertical + 18 diagonal
    assert len(g.edges) == 42


def test_bisecting_wall_splits_graph():
    m = VectorMap([[[0, 1.5], [3, 1.5]]], (0, 0, 3, 3))
    g = build_nav_graph(m, 0.25, 0.2)
    n, _ = connected_components(oracle_matrix(g), directed=False)
    assert n == 2


def test_doorway_vertex_count_matches_brute_force(doorway_graph):
    m, g = doorway_graph
    xmin, ymin, xmax, ymax = m.bounds
    segs = m.segments.tolist()
    count = 0
    for i in range(int(round((xmax - xmin) / 0.1)) + 1):
        for j in range(int(round((ymax - ymin) / 0.1)) + 1):
            # lattice coordinates are exact decimals; unrounded sums would sit 1e-16 off the 0.2 m boundary
            if brute_clearance((round(xmin + 0.1 * i, 9), round(ymin + 0.1 * j, 9)), segs) >= 0.2:
                count += 1
    assert len(g.vertices) == count
    gap_column = g.vertices[np.isclose(g.vertices[:, 1], 0.0)]
    assert len(gap_column) > 0
    assert np.all(np.abs(gap_column[:, 0]) <= 0.05 + 1e-9)


def test_graph_invariants(doorway_graph):
    m, g = doorway_graph
    a, b = g.edges[:, 0], g.edges[:, 1]
    assert np.all(a != b)
    assert np.all((g.edges >= 0) & (g.edges < len(g.vertices)))
    np.testing.assert_allclose(g.weights, np.hypot(*(g.vertices[b] - g.vertices[a]).T), atol=1e-9)
    segs = m.segments.tolist()
    for t in np.linspace(0, 1, 5):
        pts = g.vertices[a] + t * (g.vertices[b] - g.vertices[a])
        assert m.clearance(pts).min() >= 0.2 - 1e-12
    # spot check with the independent clearance scan
    for p in g.vertices[::97]:
        assert brute_clearance(p, segs) >= 0.2 - 1e-12


def test_astar_examples():
    g = build_nav_graph(VectorMap(np.zeros((0, 2, 2)), (0, 0, 3, 3)), 1.0, 0.2)
    p = astar(g, (1, 1), (1, 1))
    assert len(p) == 1 and p.total_length == 0.0
    p = astar(g, (0, 0), (2, 0))
    assert p.total_length == pytest.approx(2.0)
    np.testing.assert_allclose(p.waypoints[:, 1], 0.0)


def test_astar_errors():
    m = VectorMap([[[0, 1.5], [3, 1.5]]], (0, 0, 3, 3))
    g = build_nav_graph(m, 0.25, 0.2)
    with pytest.raises(PlanningError, match="no path"):
        astar(g, (1.5, 0.5), (1.5, 2.5))
    # a fat robot leaves no free vertex within one cell of the wall
    g = build_nav_graph(m, 0.25, 0.5)
    with pytest.raises(PlanningError, match="endpoint blocked"):
        astar(g, (1.5, 1.5), (1.5, 2.5))


def test_fully_blocked_map():
    m = VectorMap([[[0, 0.5], [1, 0.5]], [[0.5, 0], [0.5, 1]]], (0, 0, 1, 1))
    with pytest.raises(PlanningError, match="map fully blocked"):
        build_nav_graph(m, 0.5, 0.6)


@pytest.mark.parametrize("name", ["doorway", "intersection"])
def test_astar_equals_dijkstra_200_queries(name):
    m = load_map(SCENARIO_DIR / f"{name}.map")
    g = build_nav_graph(m, 0.1, 0.2)
    rng = np.random.default_rng(7)
    n = len(g.vertices)
    sources = rng.integers(0, n, 200)
    targets = rng.integers(0, n, 200)
    dist = dijkstra(oracle_matrix(g), directed=False, indices=np.unique(sources))
    row = {s: i for i, s in enumerate(np.unique(sources))}
    for s, t in zip(sources, targets):
        expect = dist[row[s], t]
        if math.isinf(expect):
            with pytest.raises(PlanningError):
                astar(g, g.vertices[s], g.vertices[t])
            continue
        path = astar(g, g.vertices[s], g.vertices[t])
        assert path.total_length == pytest.approx(expect, abs=1e-9)
        # consecutive waypoints are graph neighbours
        for u, v in zip(path.vertex_ids, path.vertex_ids[1:]):
            assert any(w == v for w, _ in g.neighbors(u))
        mids = (path.waypoints[1:] + path.waypoints[:-1]) / 2
        assert len(mids) == 0 or m.clearance(mids).min() >= 0.2 - 1e-12


def test_astar_is_deterministic(doorway_graph):
    _, g = doorway_graph
    a = astar(g, (-0.9, -1.2), (0.9, 0.9))
    b = astar(g, (-0.9, -1.2), (0.9, 0.9))
    assert a.vertex_ids == b.vertex_ids


walls = st.lists(
    st.tuples(st.floats(0.2, 2.8), st.floats(0.2, 2.8), st.floats(0.2, 2.8), st.floats(0.2, 2.8)),
    min_size=1,
    max_size=4,
).filter(lambda ws: all(math.hypot(w[2] - w[0], w[3] - w[1]) > 0.05 for w in ws))


@settings(max_examples=25)
@given(walls, st.integers(0, 10_000))
def test_removing_walls_never_lengthens_paths(ws, seed):
    bounds = (0, 0, 3, 3)
    full = VectorMap(np.reshape(ws, (-1, 2, 2)), bounds)
    fewer = VectorMap(np.reshape(ws[:-1], (-1, 2, 2)), bounds)
    try:
        g_full = build_nav_graph(full, 0.25, 0.1)
    except PlanningError:
        return
    g_fewer = build_nav_graph(fewer, 0.25, 0.1)
    rng = np.random.default_rng(seed)
    s, t = g_full.vertices[rng.integers(0, len(g_full.vertices), 2)]
    try:
        with_wall = astar(g_full, s, t).total_length
    except PlanningError:
        return
    assert astar(g_fewer, s, t).total_length <= with_wall + 1e-9
