"""Discrete multi-agent path finding on roadmap graphs.

Agents move one edge (or wait) per timestep; solutions must avoid vertex
conflicts and undirected edge conflicts (including swaps). The planner here
resolves conflicts by randomly constraining one of the two involved agents
and replanning it. A continuous point-agent flow simulator measures how often
independently routed agents come close to each other.
"""

from __future__ import annotations

import heapq
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .env import FREE, OccupancyMap, segment_free
from .roadmap import HardDrm


class GraphKind(str, Enum):
    ODRM_HARD = "odrm"
    UDRM = "udrm"
    GRID = "grid"


@dataclass(frozen=True)
class MapfGraph:
    vertices: np.ndarray  # (n, 2) positions in meters
    adjacency: tuple  # per-vertex tuple of outgoing neighbor ids, sorted
    kind: GraphKind

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class MapfInstance:
    graph: MapfGraph
    agents: tuple  # ((start, goal), ...) with distinct starts and distinct goals

    def __post_init__(self):
        starts = [a[0] for a in self.agents]
        goals = [a[1] for a in self.agents]
        if len(set(starts)) != len(starts) or len(set(goals)) != len(goals):
            raise ValueError("agent starts and goals must each be distinct")
        n = self.graph.n_vertices
        for s, g in self.agents:
            if not (0 <= s < n and 0 <= g < n):
                raise ValueError("agent endpoint references unknown vertex")


@dataclass(frozen=True)
class MapfSolution:
    paths: tuple  # per-agent vertex id sequence, one entry per timestep, goal-padded
    makespan: int
    sum_of_arrival_times: int
    average_arrival_time: float
    conflicts_resolved: int = 0
    elapsed_seconds: float = 0.0


@dataclass(frozen=True)
class MapfFailure:
    reason: str
    elapsed_seconds: float
    remaining_conflicts: int


@dataclass(frozen=True)
class Constraint:
    agent: int
    time: int
    vertex: int | None = None
    edge: tuple[int, int] | None = None  # directed (from, to), taken at `time`

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("constraint time must be non-negative")
        if (self.vertex is None) == (self.edge is None):
            raise ValueError("constraint must be either vertex or edge")


def graph_from_hard(hard: HardDrm) -> MapfGraph:
    adj = tuple(tuple(nb) for nb in hard.outgoing())
    return MapfGraph(vertices=np.array(hard.vertices), adjacency=adj, kind=GraphKind.ODRM_HARD)


def derive_udrm(hard: HardDrm) -> MapfGraph:
    """Symmetrize the directed arcs: every arc becomes traversable both ways."""
    n = hard.n_vertices
    sets: list[set[int]] = [set() for _ in range(n)]
    for a, b in np.asarray(hard.arcs).reshape(-1, 2):
        sets[int(a)].add(int(b))
        sets[int(b)].add(int(a))
    adj = tuple(tuple(sorted(s)) for s in sets)
    return MapfGraph(vertices=np.array(hard.vertices), adjacency=adj, kind=GraphKind.UDRM)


def _grid_vertices(occ: OccupancyMap, pitch: float) -> dict[tuple[int, int], tuple[float, float]]:
    """Free lattice points at the given pitch, keyed by integer lattice coords."""
    nx = int(occ.world_width / pitch + 1e-9)
    ny = int(occ.world_height / pitch + 1e-9)
    out = {}
    for iy in range(ny):
        for ix in range(nx):
            x = (ix + 0.5) * pitch
            y = (iy + 0.5) * pitch
            cx = int(x / occ.resolution)
            cy = int(y / occ.resolution)
            if cx < occ.width and cy < occ.height and occ.cells[cy, cx] == FREE:
                out[(ix, iy)] = (x, y)
    return out


def derive_grid(occ: OccupancyMap, n_target: int) -> MapfGraph:
    """4-connected lattice over free cells, pitch tuned toward n_target vertices.

    Binary-searches the lattice pitch until the free-vertex count lands within
    +-5% of the target, falling back to the closest count reached.
    """
    if n_target < 2:
        raise ValueError("need a target of at least 2 vertices")
    lo = occ.resolution
    hi = max(occ.world_width, occ.world_height)
    best_pitch = None
    best_err = None
    lo_band = int(np.floor(n_target * 0.95))
    hi_band = int(np.ceil(n_target * 1.05))
    for _ in range(60):
        pitch = 0.5 * (lo + hi)
        count = len(_grid_vertices(occ, pitch))
        err = abs(count - n_target)
        if best_err is None or err < best_err:
            best_err, best_pitch = err, pitch
        if lo_band <= count <= hi_band:
            best_pitch = pitch
            break
        if count > n_target:
            lo = pitch
        else:
            hi = pitch
    lattice = _grid_vertices(occ, best_pitch)
    if len(lattice) < 2:
        raise ValueError("map too degenerate for a grid graph")
    keys = sorted(lattice)
    ids = {key: i for i, key in enumerate(keys)}
    verts = [lattice[key] for key in keys]
    sets: list[set[int]] = [set() for _ in keys]
    for (ix, iy), i in ids.items():
        for nb_key in ((ix + 1, iy), (ix, iy + 1)):
            j = ids.get(nb_key)
            if j is not None and segment_free(occ, verts[i], verts[j]):
                sets[i].add(j)
                sets[j].add(i)
    adj = tuple(tuple(sorted(s)) for s in sets)
    return MapfGraph(
        vertices=np.array(verts, dtype=np.float64), adjacency=adj, kind=GraphKind.GRID
    )


def _bfs_distances(graph: MapfGraph, goal: int) -> np.ndarray:
    """Unit-cost distances to goal over reversed adjacency (search heuristic)."""
    n = graph.n_vertices
    rev: list[list[int]] = [[] for _ in range(n)]
    for u, nbrs in enumerate(graph.adjacency):
        for v in nbrs:
            rev[v].append(u)
    dist = np.full(n, np.inf)
    dist[goal] = 0
    dq = deque([goal])
    while dq:
        v = dq.popleft()
        for u in rev[v]:
            if not np.isfinite(dist[u]):
                dist[u] = dist[v] + 1
                dq.append(u)
    return dist


def plan_single(
    graph: MapfGraph,
    start: int,
    goal: int,
    constraints: list[Constraint] = (),
    horizon: int | None = None,
):
    """Minimum-arrival-time timed vertex sequence avoiding the constraints.

    Moves are wait or one outgoing edge per timestep. Returns the sequence
    (index = timestep) or None when the horizon is exhausted.
    """
    vblock = {(c.vertex, c.time) for c in constraints if c.vertex is not None}
    eblock = {(c.edge[0], c.edge[1], c.time) for c in constraints if c.edge is not None}
    if horizon is None:
        horizon = graph.n_vertices + len(constraints) + 1
    last_goal_block = max((t for v, t in vblock if v == goal), default=-1)
    h = _bfs_distances(graph, goal)
    if not np.isfinite(h[start]):
        return None
    if (start, 0) in vblock:
        return None

    # A* over (vertex, time); deterministic: ties broken by (time, vertex)
    start_state = (start, 0)
    open_heap = [(h[start], 0, start)]
    g_cost = {start_state: 0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    while open_heap:
        f, t, v = heapq.heappop(open_heap)
        state = (v, t)
        if state in closed:
            continue
        closed.add(state)
        if v == goal and t > last_goal_block:
            seq = [v]
            while state in parent:
                state = parent[state]
                seq.append(state[0])
            seq.reverse()
            return seq
        if t >= horizon:
            continue
        nt = t + 1
        for nb in (v, *graph.adjacency[v]):
            if (nb, nt) in vblock:
                continue
            if nb != v and (v, nb, nt - 1) in eblock:
                continue
            ns = (nb, nt)
            if ns in closed or ns in g_cost:
                continue
            g_cost[ns] = nt
            parent[ns] = state
            if np.isfinite(h[nb]):
                heapq.heappush(open_heap, (nt + h[nb], nt, nb))
    return None


def _arrival_time(path: list[int], goal: int) -> int:
    t = len(path) - 1
    while t > 0 and path[t] == goal and path[t - 1] == goal:
        t -= 1
    if t == 0 and path[0] == goal:
        return 0
    return t


def _pad(paths: list[list[int]]) -> list[list[int]]:
    span = max(len(p) for p in paths)
    return [p + [p[-1]] * (span - len(p)) for p in paths]


def find_conflicts(paths: list[list[int]]) -> list[tuple]:
    """All conflicts among goal-padded paths, earliest first.

    Returns tuples ('vertex', t, i, j, v) or ('edge', t, i, j, (u, v)) where t
    is the timestep of the collision and i < j the agent pair.
    """
    padded = _pad(paths)
    span = len(padded[0])
    n = len(padded)
    out = []
    for t in range(span):
        for i in range(n):
            for j in range(i + 1, n):
                if padded[i][t] == padded[j][t]:
                    out.append(("vertex", t, i, j, padded[i][t]))
        if t + 1 < span:
            for i in range(n):
                for j in range(i + 1, n):
                    a0, a1 = padded[i][t], padded[i][t + 1]
                    b0, b1 = padded[j][t], padded[j][t + 1]
                    if a0 != a1 and {a0, a1} == {b0, b1}:
                        out.append(("edge", t, i, j, (a0, a1)))
    out.sort(key=lambda c: (c[1], c[2], c[3]))
    return out


def validate_solution(solution: MapfSolution, graph: MapfGraph) -> list[str]:
    """Independent conflict and continuity check; returns violation messages."""
    issues = []
    paths = [list(p) for p in solution.paths]
    span = max(len(p) for p in paths)
    padded = [p + [p[-1]] * (span - len(p)) for p in paths]
    for i, p in enumerate(padded):
        for t in range(1, span):
            a, b = p[t - 1], p[t]
            if a != b and b not in graph.adjacency[a]:
                issues.append(f"agent {i}: {a}->{b} at t={t} is not an edge")
    for t in range(span):
        seen: dict[int, int] = {}
        for i, p in enumerate(padded):
            if p[t] in seen:
                issues.append(f"vertex conflict at t={t}: agents {seen[p[t]]} and {i} on {p[t]}")
            seen[p[t]] = i
    for t in range(span - 1):
        moves = {}
        for i, p in enumerate(padded):
            if p[t] != p[t + 1]:
                key = frozenset((p[t], p[t + 1]))
                if key in moves:
                    issues.append(
                        f"edge conflict at t={t}: agents {moves[key]} and {i} share {sorted(key)}"
                    )
                moves[key] = i
    return issues


def rcbs(
    instance: MapfInstance,
    seed: int = 0,
    wall_clock_limit: float = 300.0,
):
    """Conflict resolution by random constraint assignment.

    Plans every agent independently, then repeatedly takes the earliest
    conflict, constrains one of its two agents chosen uniformly at random and
    replans that agent. Gives up on timeout or after 10 * |agents| replans.
    """
    rng = np.random.default_rng(seed)
    t0 = time.monotonic()
    agents = instance.agents
    graph = instance.graph
    constraints: list[list[Constraint]] = [[] for _ in agents]
    paths: list[list[int] | None] = []
    for i, (s, g) in enumerate(agents):
        p = plan_single(graph, s, g)
        if p is None:
            return MapfFailure(
                reason=f"agent {i} has no path from {s} to {g}",
                elapsed_seconds=time.monotonic() - t0,
                remaining_conflicts=-1,
            )
        paths.append(p)

    replans = 0
    max_replans = 10 * len(agents)
    while True:
        conflicts = find_conflicts(paths)
        if not conflicts:
            break
        elapsed = time.monotonic() - t0
        if elapsed > wall_clock_limit or replans >= max_replans:
            return MapfFailure(
                reason="timeout" if elapsed > wall_clock_limit else "replan budget exhausted",
                elapsed_seconds=elapsed,
                remaining_conflicts=len(conflicts),
            )
        kind, t, i, j, what = conflicts[0]
        first = i if rng.integers(2) == 0 else j
        resolved = False
        for agent in (first, j if first == i else i):
            if kind == "vertex":
                c = Constraint(agent=agent, time=t, vertex=what)
            else:
                padded = _pad(paths)
                c = Constraint(
                    agent=agent, time=t, edge=(padded[agent][t], padded[agent][t + 1])
                )
            constraints[agent].append(c)
            horizon = graph.n_vertices + len(constraints[agent]) + len(agents)
            p = plan_single(
                graph, agents[agent][0], agents[agent][1], constraints[agent], horizon
            )
            replans += 1
            if p is not None:
                paths[agent] = p
                resolved = True
                break
            constraints[agent].pop()
        if not resolved:
            return MapfFailure(
                reason="no agent of the conflict could be replanned",
                elapsed_seconds=time.monotonic() - t0,
                remaining_conflicts=len(conflicts),
            )

    arrivals = [_arrival_time(p, agents[i][1]) for i, p in enumerate(paths)]
    makespan = max(len(p) for p in paths) - 1
    padded = _pad(paths)
    return MapfSolution(
        paths=tuple(tuple(p) for p in padded),
        makespan=makespan,
        sum_of_arrival_times=sum(arrivals),
        average_arrival_time=sum(arrivals) / len(arrivals),
        conflicts_resolved=replans,
        elapsed_seconds=time.monotonic() - t0,
    )


def random_instance(
    graph: MapfGraph, agents: int, rng: np.random.Generator
) -> MapfInstance:
    """Instance with distinct random starts and distinct random goals."""
    n = graph.n_vertices
    if agents > n:
        raise ValueError("more agents than vertices")
    starts = rng.choice(n, size=agents, replace=False)
    goals = rng.choice(n, size=agents, replace=False)
    return MapfInstance(
        graph=graph, agents=tuple((int(s), int(g)) for s, g in zip(starts, goals))
    )


@dataclass(frozen=True)
class EvalRow:
    graph_kind: str
    agents: int
    run: int
    seed: int
    success: bool
    avg_arrival: float | None
    makespan: int | None
    compute_seconds: float
    conflicts_resolved: int | None


def evaluate(
    graphs: dict[GraphKind, MapfGraph],
    agent_counts: list[int],
    runs: int,
    seed: int = 0,
    wall_clock_limit: float = 300.0,
) -> list[EvalRow]:
    """Per-run planner results over every (graph kind, agent count) cell."""
    rows: list[EvalRow] = []
    for kind in sorted(graphs, key=lambda k: k.value):
        graph = graphs[kind]
        for agents in agent_counts:
            for run in range(runs):
                kind_code = {"odrm": 1, "udrm": 2, "grid": 3}[kind.value]
                run_seed = int(
                    np.random.SeedSequence([seed, agents, run, kind_code])
                    .generate_state(1)[0]
                )
                rng = np.random.default_rng(run_seed)
                instance = random_instance(graph, agents, rng)
                t0 = time.monotonic()
                result = rcbs(instance, seed=run_seed, wall_clock_limit=wall_clock_limit)
                dt = time.monotonic() - t0
                if isinstance(result, MapfSolution):
                    rows.append(
                        EvalRow(kind.value, agents, run, run_seed, True,
                                result.average_arrival_time, result.makespan, dt,
                                result.conflicts_resolved)
                    )
                else:
                    rows.append(
                        EvalRow(kind.value, agents, run, run_seed, False,
                                None, None, dt, None)
                    )
    return rows


def aggregate(rows: list[EvalRow]) -> dict[tuple[str, int], dict[str, float]]:
    """Success rate, mean arrival over successes, mean compute per cell."""
    out: dict[tuple[str, int], dict[str, float]] = {}
    keys = sorted({(r.graph_kind, r.agents) for r in rows})
    for key in keys:
        cell = [r for r in rows if (r.graph_kind, r.agents) == key]
        successes = [r for r in cell if r.success]
        out[key] = {
            "success_rate": len(successes) / len(cell) if cell else 0.0,
            "mean_avg_arrival": (
                sum(r.avg_arrival for r in successes) / len(successes) if successes else float("nan")
            ),
            "mean_compute_seconds": sum(r.compute_seconds for r in cell) / len(cell) if cell else 0.0,
        }
    return out


def _shortest_polyline(graph: MapfGraph, start: int, goal: int):
    """Euclidean-length shortest directed path as a list of vertex positions."""
    verts = graph.vertices
    dist = {start: 0.0}
    parent: dict[int, int] = {}
    heap = [(0.0, start)]
    closed: set[int] = set()
    while heap:
        du, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        if u == goal:
            seq = [u]
            while seq[-1] in parent:
                seq.append(parent[seq[-1]])
            seq.reverse()
            return [verts[v] for v in seq]
        for v in graph.adjacency[u]:
            if v in closed:
                continue
            nd = du + float(np.hypot(*(verts[u] - verts[v])))
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return None


def flow_simulate(
    graph: MapfGraph,
    occ: OccupancyMap,
    agents: int,
    proximity_radius: float,
    rng: np.random.Generator,
    speed: float = 1.0,
    dt: float = 0.05,
) -> int:
    """Count close encounters between independently routed constant-speed agents.

    Each agent follows its own shortest path polyline at constant speed and
    vanishes at the goal. The returned count is the number of timesteps in
    which any agent pair is strictly closer than proximity_radius.
    """
    n = graph.n_vertices
    polylines = []
    for _ in range(agents):
        poly = None
        for _attempt in range(200):
            s = int(rng.integers(n))
            g = int(rng.integers(n))
            if s == g:
                continue
            poly = _shortest_polyline(graph, s, g)
            if poly is not None:
                break
        if poly is None:
            raise ValueError("could not route an agent; graph too disconnected")
        pts = np.array(poly)
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        polylines.append((pts, cum))

    total_time = max(cum[-1] for _, cum in polylines) / speed
    steps = int(np.ceil(total_time / dt)) + 1
    events = 0
    for k in range(steps):
        t = k * dt
        positions = []
        for pts, cum in polylines:
            s = t * speed
            if s >= cum[-1]:
                continue  # arrived: agent has vanished
            idx = int(np.searchsorted(cum, s, side="right")) - 1
            idx = min(idx, len(pts) - 2)
            seg_len = cum[idx + 1] - cum[idx]
            frac = (s - cum[idx]) / seg_len if seg_len > 0 else 0.0
            positions.append(pts[idx] + frac * (pts[idx + 1] - pts[idx]))
        if len(positions) >= 2:
            arr = np.array(positions)
            diff = arr[:, None, :] - arr[None, :, :]
            dists = np.hypot(diff[..., 0], diff[..., 1])
            iu = np.triu_indices(len(arr), k=1)
            if (dists[iu] < proximity_radius).any():
                events += 1
    return events
