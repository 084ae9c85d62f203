"""Stochastic optimization of vertex positions and edge direction scalars.

Each batch samples random start/goal pairs from free space, answers them on
the relaxed roadmap, averages the analytic cost gradients over the feasible
queries, and applies one bias-corrected adaptive-moment descent step. The
edge set is rebuilt from the moved vertices on a configurable cadence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import OccupancyMap, is_free, sample_free
from .roadmap import RelaxedDrm, build_relaxed, retriangulate, with_updates
from .search import (
    CostParams,
    NoPathError,
    Path,
    direction_penalty,
    direction_penalty_slope,
    query,
    relaxed_adjacency,
    tail_cost_slope,
)


class OptimizationError(Exception):
    pass


@dataclass
class AdamState:
    """Adaptive-moment accumulator over a flat variable vector."""

    size: int
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)
        if len(self.m) != self.size or len(self.v) != self.size:
            raise ValueError("moment arrays must match the variable count")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    batches: int = 512
    retriangulate_every: int = 1
    eval_set_size: int = 64
    eval_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.retriangulate_every < 1:
            raise ValueError("retriangulate_every must be at least 1")


@dataclass
class BatchReport:
    batch_index: int
    batch_cost: float  # sum of relaxed path costs over the feasible queries
    feasible_queries: int
    gradient_norm: float
    eval_cost: float | None = None


def path_gradient(
    g: RelaxedDrm, p: Path, params: CostParams = CostParams()
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the relaxed path cost, waypoint sequence held fixed.

    Returns (d cost / d vertex positions, d cost / d edge scalars) with shapes
    (n, 2) and (m,); entries for untouched vertices and edges are zero.
    """
    grad_xy = np.zeros_like(g.vertices)
    grad_d = np.zeros(g.n_edges)
    verts = g.vertices
    wp = p.waypoints

    for x, vid in ((np.asarray(p.start, dtype=float), wp[0]),
                   (np.asarray(p.goal, dtype=float), wp[-1])):
        delta = verts[vid] - x
        r = float(np.hypot(*delta))
        if r > 0:
            grad_xy[vid] += tail_cost_slope(r, params) * delta / r
        # r == 0: tail slope is alpha_t but direction undefined; use subgradient 0

    for a, b in zip(wp[:-1], wp[1:]):
        idx = g.edge_id(a, b)
        if idx is None:
            raise ValueError(f"no edge between waypoints {a} and {b}")
        delta = verts[a] - verts[b]
        length = float(np.hypot(*delta))
        d_read = g.d_for_traversal(a, b)
        factor = direction_penalty(d_read, params)
        if length > 0:
            unit = delta / length
            grad_xy[a] += factor * unit
            grad_xy[b] -= factor * unit
        slope = length * direction_penalty_slope(d_read, params)
        # stored scalar is read negated when traversing v -> u
        grad_d[idx] += slope if a < b else -slope
    return grad_xy, grad_d


def flatten_vars(g: RelaxedDrm) -> np.ndarray:
    return np.concatenate([g.vertices.ravel(), g.d])


def batch_gradient(
    g: RelaxedDrm,
    occ: OccupancyMap,
    cfg: TrainConfig,
    params: CostParams,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> tuple[np.ndarray, BatchReport]:
    """Average path-cost gradient over one batch of random free-space queries.

    Infeasible queries contribute nothing and are only counted in the report.
    """
    if g.n_vertices == 0:
        raise OptimizationError("empty roadmap")
    n = g.n_vertices
    acc_xy = np.zeros_like(g.vertices)
    acc_d = np.zeros(g.n_edges)
    cost_sum = 0.0
    feasible = 0
    adj = relaxed_adjacency(g, params)
    for _ in range(cfg.batch_size):
        pair = sample_free(occ, 2, rng)
        try:
            p = query(g, occ, pair[0], pair[1], params, adj=adj)
        except NoPathError:
            continue
        gxy, gd = path_gradient(g, p, params)
        acc_xy += gxy
        acc_d += gd
        cost_sum += p.cost
        feasible += 1
    if feasible == 0:
        raise OptimizationError("all queries in the batch were infeasible")
    grad = np.concatenate([acc_xy.ravel(), acc_d]) / feasible
    report = BatchReport(
        batch_index=batch_index,
        batch_cost=cost_sum,
        feasible_queries=feasible,
        gradient_norm=float(np.linalg.norm(grad)),
    )
    return grad, report


def adam_step(
    state: AdamState, variables: np.ndarray, grad: np.ndarray
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected adaptive-moment update; pure, returns new state."""
    if len(variables) != state.size or len(grad) != state.size:
        raise ValueError("dimension mismatch")
    if not np.isfinite(grad).all():
        raise OptimizationError("non-finite gradient entry; step rejected")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_vars = variables - state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(
        size=state.size,
        alpha=state.alpha,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        t=t,
        m=m,
        v=v,
    )
    return new_state, new_vars


def project_vertices(
    g: RelaxedDrm, proposed: np.ndarray, occ: OccupancyMap
) -> np.ndarray:
    """Per-vertex rejection: proposals landing outside free space are dropped."""
    out = np.array(proposed)
    for i in range(len(out)):
        if not is_free(occ, out[i]):
            out[i] = g.vertices[i]
    return out


def evaluate_queries(
    g: RelaxedDrm, occ: OccupancyMap, pairs: np.ndarray, params: CostParams
) -> float:
    """Sum of relaxed path costs over fixed (start, goal) pairs; infeasible skip."""
    adj = relaxed_adjacency(g, params)
    total = 0.0
    for i in range(0, len(pairs), 2):
        try:
            p = query(g, occ, pairs[i], pairs[i + 1], params, adj=adj)
        except NoPathError:
            continue
        total += p.cost
    return total


def _carry_moments(old: RelaxedDrm, new: RelaxedDrm, state: AdamState) -> AdamState:
    """Remap edge-scalar moments across an edge-set change by vertex-pair identity."""
    n2 = 2 * new.n_vertices
    m = np.zeros(n2 + new.n_edges)
    v = np.zeros(n2 + new.n_edges)
    m[:n2] = state.m[:n2]
    v[:n2] = state.v[:n2]
    for i, (a, b) in enumerate(np.asarray(new.edges).reshape(-1, 2)):
        old_idx = old.edge_id(int(a), int(b))
        if old_idx is not None:
            m[n2 + i] = state.m[n2 + old_idx]
            v[n2 + i] = state.v[n2 + old_idx]
    return AdamState(
        size=n2 + new.n_edges,
        alpha=state.alpha,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
        t=state.t,
        m=m,
        v=v,
    )


def train(
    occ: OccupancyMap,
    n: int,
    cfg: TrainConfig,
    params: CostParams = CostParams(),
    adam: AdamState | None = None,
    on_batch=None,
) -> tuple[RelaxedDrm, list[BatchReport]]:
    """Full optimization run: build, descend, retriangulate, report.

    Deterministic for fixed (map, n, cfg, params). `on_batch(graph, report)`
    is invoked after every step, e.g. for frame dumps or invariant checks.
    """
    rng = np.random.default_rng(cfg.seed)
    g = build_relaxed(occ, n, rng)
    eval_pairs = sample_free(occ, 2 * cfg.eval_set_size, rng)

    if adam is None:
        adam = AdamState(size=2 * n + g.n_edges)
    reports: list[BatchReport] = []
    for i in range(cfg.batches):
        grad, report = batch_gradient(g, occ, cfg, params, rng, batch_index=i)
        adam, new_vars = adam_step(adam, flatten_vars(g), grad)
        proposed = new_vars[: 2 * n].reshape(n, 2)
        positions = project_vertices(g, proposed, occ)
        g = with_updates(g, positions, new_vars[2 * n :])
        if (i + 1) % cfg.retriangulate_every == 0:
            new_g = retriangulate(g, occ)
            adam = _carry_moments(g, new_g, adam)
            g = new_g
        if cfg.eval_every > 0 and (i + 1) % cfg.eval_every == 0:
            report.eval_cost = evaluate_queries(g, occ, eval_pairs, params)
        reports.append(report)
        if on_batch is not None:
            on_batch(g, report)
    return g, reports
