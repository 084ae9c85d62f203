"""Figure rendering for training and evaluation outputs.

Reads the delimited files the CLI emits and writes matplotlib figures next
to them: a convergence curve from the training metrics and success / cost /
compute-time charts from the planner results.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_training(metrics_csv: Path, out_png: Path) -> Path:
    """Batch cost (and held-out cost where present) over the training run."""
    batches, costs, eval_pts = [], [], []
    with open(metrics_csv, newline="") as fh:
        for row in csv.DictReader(fh):
            b = int(row["batch"])
            batches.append(b)
            costs.append(float(row["batch_cost"]))
            if row.get("eval_cost"):
                eval_pts.append((b, float(row["eval_cost"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(batches, costs, lw=0.8, label="batch cost")
    if eval_pts:
        ax.plot(*zip(*eval_pts), "o-", ms=3, label="held-out cost")
    ax.set_xlabel("batch")
    ax.set_ylabel("summed path cost")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return Path(out_png)


def plot_evaluation(results_csv: Path, out_dir: Path) -> list[Path]:
    """Success rate, mean arrival time and compute time versus agent count."""
    rows = []
    with open(results_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    kinds = sorted({r["graph_kind"] for r in rows})
    counts = sorted({int(r["agents"]) for r in rows})
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def cell(kind, agents):
        return [r for r in rows if r["graph_kind"] == kind and int(r["agents"]) == agents]

    figures = []
    specs = [
        ("success_rate", "success rate",
         lambda c: sum(r["success"] == "1" for r in c) / len(c) if c else None),
        ("avg_arrival", "mean average arrival time",
         lambda c: (lambda ok: sum(float(r["avg_arrival"]) for r in ok) / len(ok) if ok else None)(
             [r for r in c if r["success"] == "1"])),
        ("compute_seconds", "mean compute time [s]",
         lambda c: sum(float(r["compute_seconds"]) for r in c) / len(c) if c else None),
    ]
    for stem, ylabel, reducer in specs:
        fig, ax = plt.subplots(figsize=(6, 4))
        for kind in kinds:
            ys = [reducer(cell(kind, a)) for a in counts]
            ax.plot(counts, ys, "o-", label=kind)
        ax.set_xlabel("agents")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        fig.tight_layout()
        out = out_dir / f"eval_{stem}.png"
        fig.savefig(out, dpi=150)
        plt.close(fig)
        figures.append(out)
    return figures
