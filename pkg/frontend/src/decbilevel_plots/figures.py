"""Median/IQR figure rendering over run frames.

Every figure aggregates metric columns over seeds (median line,
25th-75th percentile band), writes a vector file (SVG unless the output
path says otherwise), and embeds a JSON report of the plotted series —
labels and aggregated values — in the file's metadata. The report makes
figures checkable without rasterizing: read_figure_report() recovers
exactly what was drawn. Identical inputs produce identical bytes (the
SVG hash salt is pinned and the timestamp is stripped).
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (needs the backend set first)
import pandas as pd  # noqa: E402

from decbilevel_plots.frames import (  # noqa: E402
    RunFrame,
    SchemaError,
    concat_frames,
    frames_from_sweep,
)

matplotlib.rcParams["svg.hashsalt"] = "decbilevel-plots"
matplotlib.rcParams["svg.fonttype"] = "none"

X_AXES = ("t", "samples_upper", "comm_rounds")

_X_LABELS = {
    "t": "iteration t",
    "samples_upper": "upper-level samples per agent",
    "comm_rounds": "communication rounds",
}


def _as_frame(frames) -> RunFrame:
    if isinstance(frames, RunFrame):
        return frames
    return concat_frames(list(frames))


def aggregate(table: pd.DataFrame, x: str, y: str, by=("algorithm",)) -> pd.DataFrame:
    """Median and quartiles of y over seeds, per (by..., x) cell.

    Seeds with missing tail rows (quarantined divergences) simply drop
    out of the affected cells, so the aggregate is always defined
    wherever at least one seed reported.
    """
    grouped = table.groupby([*by, x], sort=True)[y]
    out = grouped.median().rename("median").to_frame()
    out["q25"] = grouped.quantile(0.25)
    out["q75"] = grouped.quantile(0.75)
    return out.reset_index()


def _series_payload(label: str, xs, med, q25, q75) -> dict:
    return {
        "label": label,
        "n": int(len(xs)),
        "x": [float(v) for v in xs],
        "median": [float(v) for v in med],
        "q25": [float(v) for v in q25],
        "q75": [float(v) for v in q75],
    }


def _draw(ax, agg: pd.DataFrame, x: str, mask, label: str) -> dict:
    sub = agg[mask]
    ax.plot(sub[x], sub["median"], label=label, linewidth=1.6)
    ax.fill_between(sub[x], sub["q25"], sub["q75"], alpha=0.25, linewidth=0)
    return _series_payload(label, sub[x], sub["median"], sub["q25"], sub["q75"])


def _finish(fig, out, report: dict) -> Path:
    out = Path(out)
    if out.suffix == "":
        out = out.with_suffix(".svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Description": json.dumps(report, separators=(",", ":"))}
    if out.suffix == ".svg":
        metadata["Date"] = None  # strip the timestamp for stable bytes
    fig.savefig(out, metadata=metadata)
    plt.close(fig)
    return out


def read_figure_report(path) -> dict:
    """Recover the embedded JSON series report from a written figure."""
    root = ET.parse(path).getroot()
    for el in root.iter():
        if el.tag.rsplit("}", 1)[-1] == "description" and el.text:
            return json.loads(el.text)
    raise ValueError(f"{path}: no embedded series report found")


def plot_compare(frames, out, x: str = "samples_upper") -> Path:
    """Algorithm-comparison figure: metric_M vs a budget axis, log y.

    One median curve per algorithm with its interquartile band.
    """
    if x not in X_AXES:
        raise ValueError(f"x must be one of {X_AXES}, got {x!r}")
    frame = _as_frame(frames)
    algorithms = frame.algorithms
    if not algorithms:
        raise ValueError("no algorithms present in the frame")
    agg = aggregate(frame.table, x, "metric_M")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    series = [_draw(ax, agg, x, agg["algorithm"] == a, a) for a in algorithms]
    ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[x])
    ax.set_ylabel("stationarity metric")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _finish(fig, out, {"kind": "compare", "x": x, "y": "metric_M",
                              "series": series})


def plot_pc(sweep_csv, out, x: str = "t") -> Path:
    """Connectivity-sensitivity figure from a p_c sweep: one curve per
    edge probability (per algorithm, if several were swept)."""
    if x not in X_AXES:
        raise ValueError(f"x must be one of {X_AXES}, got {x!r}")
    frame = frames_from_sweep(sweep_csv, axis="topology.p_c")
    table = frame.table
    algorithms = frame.algorithms
    agg = aggregate(table, x, "metric_M", by=("algorithm", "value"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    series = []
    for algo in algorithms:
        for value in frame.values:
            label = f"p_c={value:g}" if len(algorithms) == 1 \
                else f"{algo} p_c={value:g}"
            mask = (agg["algorithm"] == algo) & (agg["value"] == value)
            series.append(_draw(ax, agg, x, mask, label))
    ax.set_yscale("log")
    ax.set_xlabel(_X_LABELS[x])
    ax.set_ylabel("stationarity metric")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _finish(fig, out, {"kind": "pc", "x": x, "y": "metric_M",
                              "series": series})


def plot_hyperopt(frames, out, x: str = "samples_upper") -> Path:
    """Hyperparameter-task figure: validation loss vs samples, plus a
    test-accuracy panel when that optional column is present."""
    if x not in X_AXES:
        raise ValueError(f"x must be one of {X_AXES}, got {x!r}")
    frame = _as_frame(frames)
    algorithms = frame.algorithms
    if not algorithms:
        raise ValueError("no algorithms present in the frame")
    table = frame.table
    if table["upper_loss"].isna().all():
        raise SchemaError("upper_loss column is not populated")
    panels = ["upper_loss"] + [c for c in frame.extras if c == "test_accuracy"]
    fig, axes = plt.subplots(1, len(panels), figsize=(6.0 * len(panels), 4.0),
                             squeeze=False)
    series = []
    for ax, column in zip(axes[0], panels):
        agg = aggregate(table, x, column)
        for algo in algorithms:
            payload = _draw(ax, agg, x, agg["algorithm"] == algo, algo)
            payload["panel"] = column
            series.append(payload)
        ax.set_xlabel(_X_LABELS[x])
        ax.set_ylabel("validation loss" if column == "upper_loss"
                      else "test accuracy")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    return _finish(fig, out, {"kind": "hyperopt", "x": x, "y": panels,
                              "series": series})
