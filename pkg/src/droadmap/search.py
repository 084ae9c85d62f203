"""Single-agent path queries and the path cost model.

Relaxed cost: quadratic tail penalty plus per-segment length scaled by a
sigmoid direction factor. Hard cost: tails plus plain length, infeasible when
an arc is traversed against its committed direction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .env import OccupancyMap, segment_free
from .roadmap import HardDrm, RelaxedDrm


class NoPathError(Exception):
    """Raised when a query cannot be answered; carries a human-readable reason."""


class NoConnectionError(NoPathError):
    """A query endpoint could not be connected to any roadmap vertex."""


class PathStructureError(Exception):
    """A path references a vertex pair with no edge/arc between them."""


@dataclass(frozen=True)
class CostParams:
    alpha_t: float = 3.0  # tail penalty weight
    alpha_d: float = 2.0  # direction penalty scale
    heuristic_weight: float | None = None  # None: 0 on relaxed graphs, 1 on hard

    def __post_init__(self):
        if self.alpha_t <= 0 or self.alpha_d <= 0:
            raise ValueError("penalty weights must be positive")
        if self.heuristic_weight is not None and not 0 <= self.heuristic_weight <= 1:
            raise ValueError("heuristic_weight must lie in [0, 1]")

    def weight_for(self, hard: bool) -> float:
        if self.heuristic_weight is not None:
            return self.heuristic_weight
        return 1.0 if hard else 0.0


@dataclass(frozen=True)
class Path:
    start: tuple[float, float]
    goal: tuple[float, float]
    waypoints: tuple[int, ...]
    cost: float

    def __post_init__(self):
        if len(self.waypoints) == 0:
            raise ValueError("waypoint sequence must be nonempty")


def direction_penalty(d: float, params: CostParams) -> float:
    """Sigmoid factor: alpha_d at -inf, alpha_d/2 at 0, 0 at +inf."""
    if d >= 0:
        e = math.exp(-d)
        return params.alpha_d * e / (1.0 + e)
    return params.alpha_d / (1.0 + math.exp(d))


def direction_penalty_slope(d: float, params: CostParams) -> float:
    """Derivative of the sigmoid factor with respect to d (always negative)."""
    e = math.exp(-abs(d))
    return -params.alpha_d * e / (1.0 + e) ** 2


def tail_cost(r: float, params: CostParams) -> float:
    """Quadratic penalty on a tail of length r."""
    return params.alpha_t * (r * r + r)


def tail_cost_slope(r: float, params: CostParams) -> float:
    return params.alpha_t * (2.0 * r + 1.0)


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def path_cost_relaxed(g: RelaxedDrm, p: Path, params: CostParams) -> float:
    """Tail penalties plus direction-scaled segment lengths."""
    wp = p.waypoints
    cost = tail_cost(_dist(p.start, g.vertices[wp[0]]), params)
    cost += tail_cost(_dist(g.vertices[wp[-1]], p.goal), params)
    for a, b in zip(wp[:-1], wp[1:]):
        if g.edge_id(a, b) is None:
            raise PathStructureError(f"no edge between waypoints {a} and {b}")
        length = _dist(g.vertices[a], g.vertices[b])
        cost += length * direction_penalty(g.d_for_traversal(a, b), params)
    return cost


def path_cost_hard(g: HardDrm, p: Path, params: CostParams) -> float:
    """Tails plus Euclidean length; inf when an arc is traversed backwards."""
    arcs = {(int(a), int(b)) for a, b in np.asarray(g.arcs).reshape(-1, 2)}
    wp = p.waypoints
    cost = tail_cost(_dist(p.start, g.vertices[wp[0]]), params)
    cost += tail_cost(_dist(g.vertices[wp[-1]], p.goal), params)
    for a, b in zip(wp[:-1], wp[1:]):
        if (a, b) not in arcs:
            return math.inf
        cost += _dist(g.vertices[a], g.vertices[b])
    return cost


def connect_tails(
    g, occ: OccupancyMap, x, k: int = 3
) -> list[tuple[int, float]]:
    """Collision-free connections from x to its nearest roadmap vertices.

    Tries the k nearest; on total failure k doubles up to min(24, |V|).
    """
    vertices = g.vertices
    n = len(vertices)
    if n == 0:
        raise NoConnectionError("roadmap has no vertices")
    dists = np.hypot(vertices[:, 0] - x[0], vertices[:, 1] - x[1])
    order = np.argsort(dists, kind="stable")
    cap = min(24, n)
    kk = min(k, cap)
    while True:
        hits = [
            (int(v), float(dists[v]))
            for v in order[:kk]
            if segment_free(occ, x, vertices[v])
        ]
        if hits:
            return hits
        if kk >= cap:
            raise NoConnectionError(
                f"no collision-free connection from ({x[0]:.4g}, {x[1]:.4g}) "
                f"within the {cap} nearest vertices"
            )
        kk = min(kk * 2, cap)


def relaxed_adjacency(g: RelaxedDrm, params: CostParams) -> list[list[tuple[int, float]]]:
    """Per-vertex (neighbor, traversal cost) lists for the relaxed cost model."""
    adj: list[list[tuple[int, float]]] = [[] for _ in range(g.n_vertices)]
    verts = g.vertices
    for (u, v), d in zip(np.asarray(g.edges).reshape(-1, 2), g.d):
        u, v = int(u), int(v)
        length = _dist(verts[u], verts[v])
        adj[u].append((v, length * direction_penalty(float(d), params)))
        adj[v].append((u, length * direction_penalty(-float(d), params)))
    for lst in adj:
        lst.sort()
    return adj


def hard_adjacency(g: HardDrm) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(g.n_vertices)]
    verts = g.vertices
    for a, b in np.asarray(g.arcs).reshape(-1, 2):
        a, b = int(a), int(b)
        adj[a].append((b, _dist(verts[a], verts[b])))
    for lst in adj:
        lst.sort()
    return adj


def query(
    g,
    occ: OccupancyMap,
    x_s,
    x_g,
    params: CostParams = CostParams(),
    adj: list[list[tuple[int, float]]] | None = None,
) -> Path:
    """Minimum-cost path between free configurations over the roadmap.

    Endpoints attach through their nearest reachable vertices; the search runs
    best-first with a weighted Euclidean heuristic (weight 0 is exact).
    Raises NoPathError when no attachment or route exists.
    """
    hard = isinstance(g, HardDrm)
    if adj is None:
        adj = hard_adjacency(g) if hard else relaxed_adjacency(g, params)
    try:
        tails_s = connect_tails(g, occ, x_s)
    except NoConnectionError as exc:
        raise NoConnectionError(f"start: {exc}") from None
    try:
        tails_g = connect_tails(g, occ, x_g)
    except NoConnectionError as exc:
        raise NoConnectionError(f"goal: {exc}") from None

    w = params.weight_for(hard)
    goal_tails = {v: tail_cost(r, params) for v, r in tails_g}
    verts = g.vertices
    n = len(verts)
    GOAL = n

    def h(v: int) -> float:
        if v == GOAL or w == 0.0:
            return 0.0
        return w * _dist(verts[v], x_g)

    dist: dict[int, float] = {}
    parent: dict[int, int] = {}
    heap: list[tuple[float, int]] = []
    for v, r in tails_s:
        c = tail_cost(r, params)
        if c < dist.get(v, math.inf):
            dist[v] = c
            parent[v] = -1
            heapq.heappush(heap, (c + h(v), v))

    closed: set[int] = set()
    while heap:
        f, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        if u == GOAL:
            wp = []
            v = parent[GOAL]
            while v != -1:
                wp.append(v)
                v = parent[v]
            wp.reverse()
            return Path(
                start=(float(x_s[0]), float(x_s[1])),
                goal=(float(x_g[0]), float(x_g[1])),
                waypoints=tuple(wp),
                cost=dist[GOAL],
            )
        du = dist[u]
        if u in goal_tails:
            nd = du + goal_tails[u]
            if nd < dist.get(GOAL, math.inf):
                dist[GOAL] = nd
                parent[GOAL] = u
                heapq.heappush(heap, (nd, GOAL))
        for v, c in adj[u]:
            if v in closed:
                continue
            nd = du + c
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd + h(v), v))

    raise NoPathError("goal unreachable from start over the roadmap")
