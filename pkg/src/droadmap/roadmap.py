"""Roadmap graphs: Delaunay edge construction, direction scalars, hardening.

A relaxed roadmap stores undirected edges (u, v) with u < v, each carrying a
real direction scalar d. Traversing u -> v reads +d, v -> u reads -d. A hard
roadmap commits each edge to directed arcs by the sign of d.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .env import OccupancyMap, segment_free


class TriangulationError(Exception):
    pass


class RoadmapFormatError(Exception):
    """Parse failure in a roadmap file; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def triangulate(points: np.ndarray) -> list[tuple[int, int]]:
    """Delaunay edge set of a 2D point set, as sorted (u, v) pairs with u < v.

    Collinear inputs fall back to the chain of lexicographically sorted points.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n < 3:
        raise TriangulationError("need at least 3 points")
    rounded = {(float(p[0]), float(p[1])) for p in pts}
    if len(rounded) != n:
        raise TriangulationError("duplicate points")

    if _collinear(pts):
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        edges = set()
        for a, b in zip(order[:-1], order[1:]):
            u, v = (int(a), int(b)) if a < b else (int(b), int(a))
            edges.add((u, v))
        return sorted(edges)

    try:
        tri = Delaunay(pts)
    except QhullError as exc:  # pragma: no cover - collinear is caught above
        raise TriangulationError(f"triangulation failed: {exc}") from exc
    edges = set()
    for simplex in tri.simplices:
        a, b, c = (int(x) for x in simplex)
        for u, v in ((a, b), (b, c), (a, c)):
            edges.add((u, v) if u < v else (v, u))
    return sorted(edges)


def _collinear(pts: np.ndarray) -> bool:
    base = pts[0]
    rel = pts - base
    # cross products of all points against the first non-degenerate direction
    for i in range(1, len(pts)):
        if np.hypot(*rel[i]) > 0:
            cross = rel[:, 0] * rel[i, 1] - rel[:, 1] * rel[i, 0]
            span = max(1.0, float(np.abs(rel).max()))
            return bool((np.abs(cross) <= 1e-12 * span * span).all())
    return True


@dataclass(frozen=True)
class RelaxedDrm:
    """Vertex positions plus undirected Delaunay edges with direction scalars."""

    vertices: np.ndarray  # (n, 2) float64
    edges: np.ndarray  # (m, 2) intp, each row (u, v) with u < v
    d: np.ndarray  # (m,) float64 direction scalar per edge
    map_ref: str = "map"
    resolution: float = 0.01
    _edge_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.edges) != len(self.d):
            raise ValueError("edge and scalar arrays disagree")
        index = {}
        for i, (u, v) in enumerate(np.asarray(self.edges).reshape(-1, 2)):
            u, v = int(u), int(v)
            if not (0 <= u < len(self.vertices)) or not (0 <= v < len(self.vertices)):
                raise ValueError(f"edge ({u},{v}) references unknown vertex")
            if u >= v:
                raise ValueError(f"edge ({u},{v}) violates u < v canonical order")
            if (u, v) in index:
                raise ValueError(f"duplicate edge ({u},{v})")
            index[(u, v)] = i
        object.__setattr__(self, "_edge_index", index)
        for arr in (self.vertices, self.edges, self.d):
            np.asarray(arr).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_id(self, u: int, v: int):
        """Edge index for the unordered pair, or None."""
        return self._edge_index.get((u, v) if u < v else (v, u))

    def d_for_traversal(self, u: int, v: int) -> float:
        """Direction scalar as read when moving u -> v (antisymmetric)."""
        idx = self.edge_id(u, v)
        if idx is None:
            raise KeyError(f"no edge between {u} and {v}")
        return float(self.d[idx]) if u < v else -float(self.d[idx])

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[int(u)].append(int(v))
            adj[int(v)].append(int(u))
        for lst in adj:
            lst.sort()
        return adj


@dataclass(frozen=True)
class HardDrm:
    """Directed roadmap: each edge committed to arcs by the sign of its scalar."""

    vertices: np.ndarray  # (n, 2)
    arcs: np.ndarray  # (k, 2) intp rows (from, to)
    undecided_count: int
    map_ref: str = "map"
    resolution: float = 0.01

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def outgoing(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for a, b in np.asarray(self.arcs).reshape(-1, 2):
            adj[int(a)].append(int(b))
        for lst in adj:
            lst.sort()
        return adj


def _free_edges(occ: OccupancyMap, vertices: np.ndarray, edges) -> list[tuple[int, int]]:
    return [
        (u, v) for u, v in edges if segment_free(occ, vertices[u], vertices[v])
    ]


def build_relaxed(occ: OccupancyMap, n: int, rng: np.random.Generator) -> RelaxedDrm:
    """Sample n free vertices and connect them by collision-free Delaunay edges."""
    from .env import sample_free

    if n < 1:
        raise ValueError("need at least one vertex")
    vertices = sample_free(occ, n, rng)
    if n >= 3:
        edges = _free_edges(occ, vertices, triangulate(vertices))
    else:
        edges = []
    edge_arr = np.array(edges, dtype=np.intp).reshape(-1, 2)
    return RelaxedDrm(
        vertices=vertices,
        edges=edge_arr,
        d=np.zeros(len(edges)),
        map_ref=occ.name,
        resolution=occ.resolution,
    )


def retriangulate(g: RelaxedDrm, occ: OccupancyMap) -> RelaxedDrm:
    """Recompute the edge set from current vertex positions.

    Scalars carry over by vertex-pair identity; new edges start at d = 0.
    """
    if g.n_vertices >= 3:
        edges = _free_edges(occ, g.vertices, triangulate(g.vertices))
    else:
        edges = []
    d = np.zeros(len(edges))
    for i, (u, v) in enumerate(edges):
        old = g.edge_id(u, v)
        if old is not None:
            d[i] = g.d[old]
    return RelaxedDrm(
        vertices=np.array(g.vertices),
        edges=np.array(edges, dtype=np.intp).reshape(-1, 2),
        d=d,
        map_ref=g.map_ref,
        resolution=g.resolution,
    )


def with_updates(g: RelaxedDrm, vertices: np.ndarray, d: np.ndarray) -> RelaxedDrm:
    """Same edge set with replaced vertex positions and scalars."""
    return RelaxedDrm(
        vertices=np.array(vertices),
        edges=np.array(g.edges),
        d=np.array(d),
        map_ref=g.map_ref,
        resolution=g.resolution,
    )


def harden(g: RelaxedDrm, tau: float = 1e-6) -> HardDrm:
    """Commit edge directions: |d| >= tau yields one arc, otherwise both."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    arcs: list[tuple[int, int]] = []
    undecided = 0
    for (u, v), d in zip(np.asarray(g.edges).reshape(-1, 2), g.d):
        u, v = int(u), int(v)
        if d >= tau:
            arcs.append((u, v))
        elif d <= -tau:
            arcs.append((v, u))
        else:
            arcs.append((u, v))
            arcs.append((v, u))
            undecided += 1
    return HardDrm(
        vertices=np.array(g.vertices),
        arcs=np.array(arcs, dtype=np.intp).reshape(-1, 2),
        undecided_count=undecided,
        map_ref=g.map_ref,
        resolution=g.resolution,
    )


def undecided_fraction(g: RelaxedDrm, threshold: float = 0.5) -> float:
    """Fraction of edges whose scalar has not committed past the threshold."""
    if g.n_edges == 0:
        return 0.0
    return float((np.abs(g.d) < threshold).mean())


def serialize(g: RelaxedDrm) -> bytes:
    """Version-1 line-oriented text format; floats at full round-trip precision."""
    lines = ["DRMv1"]
    lines.append(f"map {g.map_ref} {g.resolution!r}")
    lines.append(f"vertices {g.n_vertices}")
    for i, (x, y) in enumerate(g.vertices):
        lines.append(f"{i} {float(x)!r} {float(y)!r}")
    lines.append(f"edges {g.n_edges}")
    for (u, v), d in zip(np.asarray(g.edges).reshape(-1, 2), g.d):
        lines.append(f"{int(u)} {int(v)} {float(d)!r}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse(data: bytes) -> RelaxedDrm:
    """Inverse of serialize; reports the line and field of the first violation."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RoadmapFormatError(f"not valid UTF-8: {exc}", 1) from None
    lines = text.splitlines()
    ln = 0

    def next_line() -> str:
        nonlocal ln
        if ln >= len(lines):
            raise RoadmapFormatError("unexpected end of file", ln + 1)
        ln += 1
        return lines[ln - 1]

    if next_line() != "DRMv1":
        raise RoadmapFormatError("expected header 'DRMv1'", 1)

    parts = next_line().split()
    if len(parts) != 3 or parts[0] != "map":
        raise RoadmapFormatError("expected 'map <identifier> <resolution>'", ln)
    map_ref = parts[1]
    try:
        resolution = float(parts[2])
    except ValueError:
        raise RoadmapFormatError(f"bad resolution field {parts[2]!r}", ln) from None

    parts = next_line().split()
    if len(parts) != 2 or parts[0] != "vertices" or not parts[1].isdigit():
        raise RoadmapFormatError("expected 'vertices <n>'", ln)
    n = int(parts[1])
    vertices = np.empty((n, 2))
    for i in range(n):
        parts = next_line().split()
        if len(parts) != 3:
            raise RoadmapFormatError("expected '<id> <x> <y>'", ln)
        if parts[0] != str(i):
            raise RoadmapFormatError(f"vertex id field: expected {i}, got {parts[0]!r}", ln)
        try:
            vertices[i] = (float(parts[1]), float(parts[2]))
        except ValueError:
            raise RoadmapFormatError("bad vertex coordinate field", ln) from None

    parts = next_line().split()
    if len(parts) != 2 or parts[0] != "edges" or not parts[1].isdigit():
        raise RoadmapFormatError("expected 'edges <m>'", ln)
    m = int(parts[1])
    edges = np.empty((m, 2), dtype=np.intp)
    d = np.empty(m)
    for i in range(m):
        parts = next_line().split()
        if len(parts) != 3:
            raise RoadmapFormatError("expected '<u> <v> <d>'", ln)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise RoadmapFormatError("bad edge endpoint field", ln) from None
        if not (0 <= u < n) or not (0 <= v < n):
            raise RoadmapFormatError(f"edge endpoint field out of range: ({u},{v})", ln)
        if u >= v:
            raise RoadmapFormatError(f"edge field violates u < v: ({u},{v})", ln)
        try:
            d[i] = float(parts[2])
        except ValueError:
            raise RoadmapFormatError(f"bad edge scalar field {parts[2]!r}", ln) from None
        edges[i] = (u, v)

    try:
        return RelaxedDrm(
            vertices=vertices, edges=edges, d=d, map_ref=map_ref, resolution=resolution
        )
    except ValueError as exc:
        raise RoadmapFormatError(str(exc), ln) from None
