"""Command-line interface: optimize, query, evaluate, export, report.

Every command writes a run manifest next to its primary output recording the
invocation, seed, input digests and duration, so results can be reproduced
bit-for-bit from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .env import MapLoadError, SamplingError, load_map
from .mapf import (
    GraphKind,
    aggregate,
    derive_grid,
    derive_udrm,
    evaluate,
    flow_simulate,
    graph_from_hard,
)
from .optim import TrainConfig, train
from .render import render_svg
from .roadmap import RoadmapFormatError, harden, parse, serialize
from .search import CostParams, NoPathError, path_cost_hard, path_cost_relaxed, query

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_path: Path, args: argparse.Namespace, inputs: list[Path], t0: float) -> Path:
    manifest = Path(str(out_path) + ".manifest.txt")
    lines = [
        "droadmap run manifest",
        f"version: {__version__}",
        f"command: {' '.join(sys.argv)}",
        f"seed: {getattr(args, 'seed', None)}",
        "parameters:",
    ]
    for key in sorted(vars(args)):
        if key in ("func",):
            continue
        lines.append(f"  {key}: {getattr(args, key)}")
    lines.append("inputs:")
    for p in inputs:
        lines.append(f"  {p}: sha256={_digest(p)}")
    lines.append(f"duration_seconds: {time.monotonic() - t0:.3f}")
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def _load(args) -> tuple:
    occ = load_map(
        Path(args.map).read_bytes(), resolution=args.resolution, name=Path(args.map).stem
    )
    return occ


def _fnum(x: float) -> str:
    return repr(float(x))


def cmd_optimize(args) -> int:
    t0 = time.monotonic()
    occ = _load(args)
    cfg = TrainConfig(
        batch_size=args.batch_size,
        batches=args.batches,
        retriangulate_every=args.retriangulate_every,
        eval_set_size=args.eval_set_size,
        seed=args.seed,
    )
    params = CostParams(
        alpha_t=args.alpha_t, alpha_d=args.alpha_d, heuristic_weight=args.heuristic_weight
    )

    frames_dir = Path(args.frames_dir) if args.frames_dir else None
    eval_pair = None
    if frames_dir:
        frames_dir.mkdir(parents=True, exist_ok=True)
        from .env import sample_free

        eval_pair = sample_free(occ, 2, np.random.default_rng(cfg.seed + 1))

    def on_batch(g, report):
        if frames_dir and (report.batch_index + 1) % args.frame_every == 0:
            path = None
            try:
                path = query(g, occ, eval_pair[0], eval_pair[1], params)
            except NoPathError:
                pass
            svg = render_svg(occ, g, path)
            (frames_dir / f"frame{report.batch_index + 1:05d}.svg").write_text(svg)

    g, reports = train(occ, args.vertices, cfg, params, on_batch=on_batch)

    out = Path(args.out)
    out.write_bytes(serialize(g))
    metrics = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.csv")
    rows = ["batch,batch_cost,feasible,grad_norm,eval_cost"]
    for r in reports:
        ev = _fnum(r.eval_cost) if r.eval_cost is not None else ""
        rows.append(
            f"{r.batch_index},{_fnum(r.batch_cost)},{r.feasible_queries},"
            f"{_fnum(r.gradient_norm)},{ev}"
        )
    metrics.write_text("\r\n".join(rows) + "\r\n")
    write_manifest(out, args, [Path(args.map)], t0)
    print(f"wrote {out} ({g.n_vertices} vertices, {g.n_edges} edges) and {metrics}")
    return EXIT_OK


def _parse_point(s: str) -> tuple[float, float]:
    x, y = s.split(",")
    return float(x), float(y)


def cmd_query(args) -> int:
    occ = _load(args)
    g = parse(Path(args.roadmap).read_bytes())
    hard = harden(g, tau=args.tau)
    params = CostParams(heuristic_weight=args.heuristic_weight)
    x_s = _parse_point(args.start)
    x_g = _parse_point(args.goal)

    target = hard if args.hard else g
    try:
        p = query(target, occ, x_s, x_g, params)
    except NoPathError as exc:
        if args.hard:
            print(f"infeasible under edge directions: {exc}", file=sys.stderr)
        else:
            print(f"no path: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    hard_cost = path_cost_hard(hard, p, params)
    relaxed_cost = path_cost_relaxed(g, p, params)
    print(f"waypoints: {' '.join(map(str, p.waypoints))}")
    print(f"relaxed_cost: {relaxed_cost!r}")
    print(f"hard_cost: {'infeasible' if math.isinf(hard_cost) else repr(hard_cost)}")
    print(f"hard_feasible: {not math.isinf(hard_cost)}")
    if args.svg:
        Path(args.svg).write_text(render_svg(occ, g, p))
        write_manifest(Path(args.svg), args, [Path(args.map), Path(args.roadmap)], time.monotonic())
    return EXIT_OK


def cmd_evaluate_mapf(args) -> int:
    t0 = time.monotonic()
    occ = _load(args)
    g = parse(Path(args.roadmap).read_bytes())
    hard = harden(g, tau=args.tau)
    kinds = [GraphKind(k) for k in args.graph.split(",")]
    graphs = {}
    for kind in kinds:
        if kind == GraphKind.ODRM_HARD:
            graphs[kind] = graph_from_hard(hard)
        elif kind == GraphKind.UDRM:
            graphs[kind] = derive_udrm(hard)
        else:
            graphs[kind] = derive_grid(occ, g.n_vertices)
    agent_counts = [int(a) for a in args.agents.split(",")]
    rows = evaluate(
        graphs, agent_counts, args.runs, seed=args.seed, wall_clock_limit=args.time_limit
    )
    out = Path(args.out)
    lines = ["graph_kind,agents,run,seed,success,avg_arrival,makespan,compute_seconds,conflicts_resolved"]
    for r in rows:
        lines.append(
            f"{r.graph_kind},{r.agents},{r.run},{r.seed},{int(r.success)},"
            f"{'' if r.avg_arrival is None else _fnum(r.avg_arrival)},"
            f"{'' if r.makespan is None else r.makespan},"
            f"{r.compute_seconds:.6f},"
            f"{'' if r.conflicts_resolved is None else r.conflicts_resolved}"
        )
    out.write_text("\r\n".join(lines) + "\r\n")
    write_manifest(out, args, [Path(args.map), Path(args.roadmap)], t0)
    for (kind, agents), stats in aggregate(rows).items():
        print(
            f"{kind} agents={agents}: success={stats['success_rate']:.2f} "
            f"arrival={stats['mean_avg_arrival']:.2f} "
            f"compute={stats['mean_compute_seconds']:.3f}s"
        )
    return EXIT_OK


def cmd_evaluate_flow(args) -> int:
    t0 = time.monotonic()
    occ = _load(args)
    g = parse(Path(args.roadmap).read_bytes())
    hard = harden(g, tau=args.tau)
    kinds = [GraphKind(k) for k in args.graph.split(",")]
    graphs = {}
    for kind in kinds:
        if kind == GraphKind.ODRM_HARD:
            graphs[kind] = graph_from_hard(hard)
        elif kind == GraphKind.UDRM:
            graphs[kind] = derive_udrm(hard)
        else:
            graphs[kind] = derive_grid(occ, g.n_vertices)
    out = Path(args.out)
    lines = ["graph_kind,seed,agents,radius,events"]
    for kind in kinds:
        for seed in range(args.seeds):
            rng = np.random.default_rng([args.seed, seed])
            events = flow_simulate(graphs[kind], occ, args.agents, args.radius, rng)
            lines.append(f"{kind.value},{seed},{args.agents},{_fnum(args.radius)},{events}")
    out.write_text("\r\n".join(lines) + "\r\n")
    write_manifest(out, args, [Path(args.map), Path(args.roadmap)], t0)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_export(args) -> int:
    t0 = time.monotonic()
    occ = _load(args)
    g = parse(Path(args.roadmap).read_bytes())
    out = Path(args.out)
    out.write_text(render_svg(occ, g))
    write_manifest(out, args, [Path(args.map), Path(args.roadmap)], t0)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    t0 = time.monotonic()
    from . import report as report_mod

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    inputs = []
    if args.metrics:
        written.append(
            report_mod.plot_training(Path(args.metrics), out_dir / "training_convergence.png")
        )
        inputs.append(Path(args.metrics))
    if args.results:
        written.extend(report_mod.plot_evaluation(Path(args.results), out_dir))
        inputs.append(Path(args.results))
    if not written:
        print("nothing to report: pass --metrics and/or --results", file=sys.stderr)
        return EXIT_ERROR
    write_manifest(out_dir / "report", args, inputs, t0)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, roadmap: bool = False):
    p.add_argument("--map", required=True, help="portable graymap input")
    p.add_argument("--resolution", type=float, default=0.01, help="meters per cell")
    p.add_argument("--seed", type=int, default=0)
    if roadmap:
        p.add_argument("--roadmap", required=True, help="DRMv1 roadmap file")
        p.add_argument("--tau", type=float, default=1e-6, help="undecided-edge threshold")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="droadmap")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="build and optimize a roadmap")
    _add_common(p)
    p.add_argument("--vertices", type=int, required=True)
    p.add_argument("--batches", type=int, default=512)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--retriangulate-every", type=int, default=1)
    p.add_argument("--eval-set-size", type=int, default=64)
    p.add_argument("--alpha-t", type=float, default=3.0)
    p.add_argument("--alpha-d", type=float, default=2.0)
    p.add_argument("--heuristic-weight", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default=None, help="metrics CSV path (default beside --out)")
    p.add_argument("--frames-dir", default=None)
    p.add_argument("--frame-every", type=int, default=50)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("query", help="single-agent path query")
    _add_common(p, roadmap=True)
    p.add_argument("--start", required=True, metavar="X,Y")
    p.add_argument("--goal", required=True, metavar="X,Y")
    p.add_argument("--hard", action="store_true", help="search the hard directed graph")
    p.add_argument("--heuristic-weight", type=float, default=None)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="multi-agent evaluation")
    esub = p.add_subparsers(dest="mode", required=True)

    pm = esub.add_parser("mapf", help="discrete planner benchmark")
    _add_common(pm, roadmap=True)
    pm.add_argument("--graph", default="odrm,udrm,grid", help="comma-separated kinds")
    pm.add_argument("--agents", default="25", help="comma-separated agent counts")
    pm.add_argument("--runs", type=int, default=20)
    pm.add_argument("--time-limit", type=float, default=300.0)
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_evaluate_mapf)

    pf = esub.add_parser("flow", help="continuous point-agent flow simulation")
    _add_common(pf, roadmap=True)
    pf.add_argument("--graph", default="odrm,udrm", help="comma-separated kinds")
    pf.add_argument("--agents", type=int, default=50)
    pf.add_argument("--radius", type=float, default=0.2)
    pf.add_argument("--seeds", type=int, default=30)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_evaluate_flow)

    p = sub.add_parser("export", help="render a roadmap to SVG")
    _add_common(p, roadmap=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("report", help="render figures from metrics/results files")
    p.add_argument("--metrics", default=None, help="training metrics CSV")
    p.add_argument("--results", default=None, help="planner results CSV")
    p.add_argument("--out", required=True, help="output directory for figures")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoPathError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MapLoadError, RoadmapFormatError, SamplingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
