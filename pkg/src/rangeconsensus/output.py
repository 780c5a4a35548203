"""CSV and plot-script emission, plus episode summary metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .simulator import TimeSeries

AGENT_HEADER = ("round", "agent", "px", "py", "vx", "vy", "radius")
EDGE_HEADER = ("round", "i", "j", "d_true", "d_hat", "vij_true_x", "vij_true_y",
               "vij_hat_x", "vij_hat_y", "residual")
ROUND_HEADER = ("round", "disagreement", "shape_error")


def fmt(x) -> str:
    """Decimal with 12 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


@dataclass(frozen=True)
class SummaryMetrics:
    final_disagreement: float
    final_shape_error: float
    rounds_to_disagreement_below: int | None
    max_estimate_error: float
    threshold: float = 0.1


def rounds_to_disagreement_below(ts: TimeSeries, threshold: float, start: int = 0):
    """Rounds after ``start`` until disagreement first drops below
    ``threshold``; None if it never does."""
    hits = np.nonzero(ts.disagreement[start:] < threshold)[0]
    return int(hits[0]) if len(hits) else None


def max_estimate_error(ts: TimeSeries) -> float:
    err = np.abs(ts.d_hat - ts.d_true)
    err = err[np.isfinite(err)]
    return float(err.max()) if err.size else 0.0


def summarize(ts: TimeSeries, threshold: float = 0.1) -> SummaryMetrics:
    return SummaryMetrics(
        final_disagreement=float(ts.disagreement[-1]),
        final_shape_error=float(ts.shape_error[-1]),
        rounds_to_disagreement_below=rounds_to_disagreement_below(ts, threshold),
        max_estimate_error=max_estimate_error(ts),
        threshold=threshold,
    )


def _write(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def agent_rows(ts: TimeSeries):
    for k in range(ts.rounds):
        for i in range(ts.n_agents):
            yield (k, i + 1, *map(fmt, (*ts.center[k, i], *ts.velocity[k, i], ts.radius[k, i])))


def edge_rows(ts: TimeSeries):
    for k in range(ts.rounds):
        for e, (i, j) in enumerate(ts.edges):
            yield (k, i + 1, j + 1, *map(fmt, (
                ts.d_true[k, e], ts.d_hat[k, e], *ts.vij_true[k, e], *ts.vij_hat[k, e],
                ts.residual[k, e])))


def _plot_script(n_agents: int) -> str:
    traj = ", \\\n     ".join(
        f"'agents.csv' using ($2=={i} ? $3 : 1/0):4 with lines title 'agent {i}'"
        for i in range(1, n_agents + 1))
    return "\n".join([
        "# gnuplot script; run from this directory: gnuplot plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        "",
        "set output 'trajectories.png'",
        "set title 'circle center trajectories'",
        "set xlabel 'x (m)'",
        "set ylabel 'y (m)'",
        "set size ratio -1",
        f"plot {traj}",
        "",
        "set output 'disagreement.png'",
        "set size noratio",
        "set title 'velocity disagreement'",
        "set xlabel 'round'",
        "set ylabel 'max |v_i - v_j| (m/s)'",
        "set logscale y",
        "plot 'rounds.csv' using 1:2 with linespoints title 'disagreement'",
        "",
        "set output 'shape_error.png'",
        "set title 'shape error'",
        "set ylabel 'max |d_ij - d*_ij| (m)'",
        "plot 'rounds.csv' using 1:3 with linespoints title 'shape error'",
        "",
        "set output 'radius.png'",
        "unset logscale y",
        "set title 'excitation radius'",
        "set ylabel 'r (m)'",
        "plot " + ", \\\n     ".join(
            f"'agents.csv' using ($2=={i} ? $1 : 1/0):7 with lines title 'agent {i}'"
            for i in range(1, n_agents + 1)),
        "",
    ])


def write_timeseries(ts: TimeSeries, path, threshold: float = 0.1) -> SummaryMetrics:
    """Write agents.csv, edges.csv, rounds.csv, summary.csv and plot.gp into
    directory ``path`` (created if needed)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "agents.csv", AGENT_HEADER, agent_rows(ts))
    _write(out / "edges.csv", EDGE_HEADER, edge_rows(ts))
    _write(out / "rounds.csv", ROUND_HEADER,
           ((k, fmt(ts.disagreement[k]), fmt(ts.shape_error[k])) for k in range(ts.rounds)))
    s = summarize(ts, threshold)
    rows = []
    for key, value in asdict(s).items():
        rows.append((key, "none" if value is None else fmt(value)))
    _write(out / "summary.csv", ("metric", "value"), rows)
    (out / "plot.gp").write_text(_plot_script(ts.n_agents), encoding="utf-8")
    return s
