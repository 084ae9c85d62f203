import heapq
import math

import numpy as np
import pytest

from droadmap.env import OccupancyMap
from droadmap.roadmap import RelaxedDrm, build_relaxed, harden
from droadmap.search import (
    CostParams,
    NoConnectionError,
    NoPathError,
    Path,
    PathStructureError,
    connect_tails,
    direction_penalty,
    path_cost_hard,
    path_cost_relaxed,
    query,
    tail_cost,
)
from tests.test_env import make_map

PARAMS = CostParams()


def dijkstra_oracle(nodes, edges, sources, targets):
    """Plain Dijkstra on an explicit digraph, independent of the search module.

    edges: dict node -> list of (neighbor, weight); sources: {node: entry cost};
    targets: {node: exit cost}. Returns the optimal total cost or inf.
    """
    dist = dict(sources)
    heap = [(c, n) for n, c in sources.items()]
    heapq.heapify(heap)
    done = set()
    best = math.inf
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in targets:
            best = min(best, d + targets[u])
        for v, w in edges.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return best


def random_graph(occ, n, seed):
    rng = np.random.default_rng(seed)
    g = build_relaxed(occ, n, rng)
    d = rng.normal(0, 2, g.n_edges)
    return RelaxedDrm(
        vertices=np.array(g.vertices),
        edges=np.array(g.edges),
        d=d,
        map_ref=g.map_ref,
        resolution=g.resolution,
    )


def relaxed_oracle_cost(g, occ, x_s, x_g, params=PARAMS):
    try:
        sources = {v: tail_cost(r, params) for v, r in connect_tails(g, occ, x_s)}
        targets = {v: tail_cost(r, params) for v, r in connect_tails(g, occ, x_g)}
    except NoConnectionError:
        return math.inf
    edges = {}
    for (u, v), d in zip(np.asarray(g.edges).reshape(-1, 2), g.d):
        u, v = int(u), int(v)
        length = float(np.hypot(*(g.vertices[u] - g.vertices[v])))
        edges.setdefault(u, []).append((v, length * direction_penalty(float(d), params)))
        edges.setdefault(v, []).append((u, length * direction_penalty(-float(d), params)))
    return dijkstra_oracle(None, edges, sources, targets)


def hard_oracle_cost(h, occ, x_s, x_g, params=PARAMS):
    try:
        sources = {v: tail_cost(r, params) for v, r in connect_tails(h, occ, x_s)}
        targets = {v: tail_cost(r, params) for v, r in connect_tails(h, occ, x_g)}
    except NoConnectionError:
        return math.inf
    edges = {}
    for a, b in np.asarray(h.arcs).reshape(-1, 2):
        a, b = int(a), int(b)
        length = float(np.hypot(*(h.vertices[a] - h.vertices[b])))
        edges.setdefault(a, []).append((b, length))
    return dijkstra_oracle(None, edges, sources, targets)


class TestCostPrimitives:
    def test_direction_penalty_at_zero(self):
        assert direction_penalty(0.0, PARAMS) == pytest.approx(1.0, abs=1e-15)

    def test_direction_penalty_limits(self):
        assert direction_penalty(1000.0, PARAMS) == pytest.approx(0.0, abs=1e-12)
        assert direction_penalty(-1000.0, PARAMS) == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("d", [-3.0, -1.0, 0.5, 7.0])
    def test_direction_penalty_symmetry(self, d):
        total = direction_penalty(d, PARAMS) + direction_penalty(-d, PARAMS)
        assert total == pytest.approx(PARAMS.alpha_d, abs=1e-12)

    def test_tail_cost_values(self):
        assert tail_cost(0.0, PARAMS) == 0.0
        assert tail_cost(1.0, PARAMS) == pytest.approx(6.0)
        assert tail_cost(0.5, PARAMS) == pytest.approx(2.25)


def two_vertex_graph(d=0.0):
    verts = np.array([[1.0, 1.0], [2.0, 1.0]])
    return RelaxedDrm(
        vertices=verts,
        edges=np.array([(0, 1)], dtype=np.intp),
        d=np.array([d]),
    )


class TestPathCosts:
    def test_single_waypoint_only_tails(self):
        g = two_vertex_graph()
        p = Path(start=(0.9, 1.0), goal=(1.2, 1.0), waypoints=(0,), cost=0.0)
        expected = tail_cost(0.1, PARAMS) + tail_cost(0.2, PARAMS)
        assert path_cost_relaxed(g, p, PARAMS) == pytest.approx(expected)

    def test_hand_evaluated_two_waypoint_cost(self):
        # tails 0.1 each, one 1 m segment at d=0: 2*3*(0.01+0.1) + 1.0 = 1.66
        g = two_vertex_graph(0.0)
        p = Path(start=(0.9, 1.0), goal=(2.1, 1.0), waypoints=(0, 1), cost=0.0)
        assert path_cost_relaxed(g, p, PARAMS) == pytest.approx(1.66, abs=1e-12)

    def test_strong_forward_commitment_shrinks_segment(self):
        g = two_vertex_graph(10.0)
        p = Path(start=(0.9, 1.0), goal=(2.1, 1.0), waypoints=(0, 1), cost=0.0)
        # D(10) = 2 / (1 + e^10) = 9.0796e-5
        segment = 1.0 * direction_penalty(10.0, PARAMS)
        assert segment == pytest.approx(2.0 / (1.0 + math.exp(10.0)), rel=1e-12)
        assert segment == pytest.approx(9.0796e-5, rel=1e-4)
        assert path_cost_relaxed(g, p, PARAMS) == pytest.approx(0.66 + segment, abs=1e-12)

    def test_missing_edge_is_structural_error(self):
        g = two_vertex_graph()
        p = Path(start=(0.9, 1.0), goal=(2.1, 1.0), waypoints=(1, 0, 1, 0), cost=0.0)
        ok = path_cost_relaxed(g, p, PARAMS)  # revisiting an existing edge is fine
        assert ok > 0
        verts = np.array([[1.0, 1.0], [2.0, 1.0], [3.0, 1.0]])
        g3 = RelaxedDrm(vertices=verts, edges=np.array([(0, 1)], dtype=np.intp), d=np.zeros(1))
        bad = Path(start=(0.9, 1.0), goal=(3.1, 1.0), waypoints=(0, 2), cost=0.0)
        with pytest.raises(PathStructureError):
            path_cost_relaxed(g3, bad, PARAMS)

    def test_hard_cost_is_tails_plus_length(self):
        verts = np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 3.0]])
        g = RelaxedDrm(
            vertices=verts,
            edges=np.array([(0, 1), (1, 2)], dtype=np.intp),
            d=np.array([1.0, 1.0]),
        )
        h = harden(g)
        p = Path(start=(1.0, 1.0), goal=(2.0, 3.0), waypoints=(0, 1, 2), cost=0.0)
        assert path_cost_hard(h, p, PARAMS) == pytest.approx(3.0)

    def test_hard_backwards_traversal_infeasible(self):
        g = two_vertex_graph(5.0)
        h = harden(g)
        p = Path(start=(2.1, 1.0), goal=(0.9, 1.0), waypoints=(1, 0), cost=0.0)
        assert math.isinf(path_cost_hard(h, p, PARAMS))

    def test_reverse_reading_sums_to_alpha_d_times_length(self, open_map):
        g = random_graph(open_map, 20, seed=11)
        adj = g.neighbors()
        rng = np.random.default_rng(1)
        v = int(rng.integers(g.n_vertices))
        wp = [v]
        for _ in range(5):
            if not adj[wp[-1]]:
                break
            wp.append(int(rng.choice(adj[wp[-1]])))
        length = sum(
            float(np.hypot(*(g.vertices[a] - g.vertices[b])))
            for a, b in zip(wp[:-1], wp[1:])
        )
        start = tuple(g.vertices[wp[0]])
        goal = tuple(g.vertices[wp[-1]])
        fwd = path_cost_relaxed(g, Path(start, goal, tuple(wp), 0.0), PARAMS)
        rev = path_cost_relaxed(g, Path(goal, start, tuple(reversed(wp)), 0.0), PARAMS)
        assert fwd + rev == pytest.approx(PARAMS.alpha_d * length, rel=1e-12)


class TestConnectTails:
    def test_coincident_with_vertex(self, open_map):
        g = build_relaxed(open_map, 10, np.random.default_rng(2))
        x = tuple(g.vertices[4])
        hits = connect_tails(g, open_map, x)
        assert (4, 0.0) in hits

    def test_wall_leaves_single_reachable_vertex(self):
        occ = make_map(
            [
                "..........",
                "..........",
                "####.#####",
                "..........",
            ],
            resolution=0.1,
        )
        verts = np.array([[0.15, 0.15], [0.62, 0.15], [0.45, 0.15], [0.85, 0.35]])
        g = RelaxedDrm(vertices=verts, edges=np.empty((0, 2), dtype=np.intp), d=np.empty(0))
        # query point below the wall, under the gap: only vertex 3 on its side
        # of the 3 nearest is reachable
        x = (0.85, 0.32)
        hits = connect_tails(g, occ, x, k=3)
        assert [v for v, _ in hits] == [3]

    def test_walled_off_point_raises(self):
        occ = make_map(["....", "####", "...."], resolution=0.1)
        verts = np.array([[0.05, 0.05], [0.35, 0.05]])
        g = RelaxedDrm(vertices=verts, edges=np.empty((0, 2), dtype=np.intp), d=np.empty(0))
        with pytest.raises(NoConnectionError):
            connect_tails(g, occ, (0.2, 0.25))

    def test_expansion_beyond_three(self):
        occ = make_map(
            [
                "........",
                "######..",
                "........",
            ],
            resolution=0.1,
        )
        # 4 vertices above the wall near x, one reachable far vertex below
        verts = np.array(
            [[0.2, 0.05], [0.3, 0.05], [0.4, 0.05], [0.5, 0.05], [0.25, 0.25]]
        )
        g = RelaxedDrm(vertices=verts, edges=np.empty((0, 2), dtype=np.intp), d=np.empty(0))
        hits = connect_tails(g, occ, (0.3, 0.28), k=3)
        assert [v for v, _ in hits] == [4]


class TestQuery:
    def test_degenerate_query_start_equals_goal(self, open_map):
        g = build_relaxed(open_map, 10, np.random.default_rng(6))
        x = tuple(np.asarray(g.vertices[0]) + 0.01)
        p = query(g, open_map, x, x, PARAMS)
        r = float(np.hypot(*(np.asarray(x) - g.vertices[p.waypoints[0]])))
        assert p.cost == pytest.approx(2 * tail_cost(r, PARAMS))

    def test_hard_query_matches_dijkstra_oracle(self, open_map, corridor_map):
        rng = np.random.default_rng(77)
        checked = 0
        for trial in range(100):
            occ = open_map if trial % 2 == 0 else corridor_map
            g = random_graph(occ, int(rng.integers(8, 51)), seed=1000 + trial)
            h = harden(g)
            from droadmap.env import sample_free

            x_s, x_g = sample_free(occ, 2, rng)
            try:
                p = query(h, occ, x_s, x_g, PARAMS)
                cost = p.cost
            except NoPathError:
                cost = math.inf
            assert cost == pytest.approx(hard_oracle_cost(h, occ, x_s, x_g), abs=1e-9)
            checked += 1
        assert checked == 100

    def test_relaxed_query_matches_uniform_cost_oracle(self, open_map, corridor_map):
        rng = np.random.default_rng(88)
        for trial in range(100):
            occ = open_map if trial % 2 == 0 else corridor_map
            g = random_graph(occ, int(rng.integers(8, 51)), seed=2000 + trial)
            from droadmap.env import sample_free

            x_s, x_g = sample_free(occ, 2, rng)
            try:
                cost = query(g, occ, x_s, x_g, PARAMS).cost
            except NoPathError:
                cost = math.inf
            assert cost == pytest.approx(relaxed_oracle_cost(g, occ, x_s, x_g), abs=1e-9)

    def test_all_zero_d_equals_undirected_shortest(self, open_map):
        g = build_relaxed(open_map, 30, np.random.default_rng(10))
        from droadmap.env import sample_free

        rng = np.random.default_rng(3)
        x_s, x_g = sample_free(open_map, 2, rng)
        p = query(g, open_map, x_s, x_g, PARAMS)
        length = sum(
            float(np.hypot(*(g.vertices[a] - g.vertices[b])))
            for a, b in zip(p.waypoints[:-1], p.waypoints[1:])
        )
        tails = tail_cost(
            float(np.hypot(*(np.asarray(x_s) - g.vertices[p.waypoints[0]]))), PARAMS
        ) + tail_cost(
            float(np.hypot(*(np.asarray(x_g) - g.vertices[p.waypoints[-1]]))), PARAMS
        )
        assert p.cost == pytest.approx(tails + length, rel=1e-12)

    def test_monotonicity_in_d(self):
        g = two_vertex_graph(0.0)
        p = Path(start=(0.9, 1.0), goal=(2.1, 1.0), waypoints=(0, 1), cost=0.0)
        base = path_cost_relaxed(g, p, PARAMS)
        up = path_cost_relaxed(two_vertex_graph(0.5), p, PARAMS)
        assert up < base
        rev = Path(start=(2.1, 1.0), goal=(0.9, 1.0), waypoints=(1, 0), cost=0.0)
        assert path_cost_relaxed(two_vertex_graph(0.5), rev, PARAMS) > path_cost_relaxed(
            g, rev, PARAMS
        )

    def test_unreachable_goal_raises(self):
        occ = make_map(["....", "####", "...."], resolution=0.1)
        verts = np.array([[0.1, 0.05], [0.3, 0.05], [0.1, 0.25], [0.3, 0.25]])
        g = RelaxedDrm(
            vertices=verts,
            edges=np.array([(0, 1), (2, 3)], dtype=np.intp),
            d=np.zeros(2),
        )
        with pytest.raises(NoPathError):
            query(g, occ, (0.2, 0.05), (0.2, 0.25), PARAMS)
