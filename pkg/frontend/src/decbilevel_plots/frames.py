"""Tabular access to the simulator's output files.

The simulator writes one metric CSV per (algorithm, seed) run, a
summary.json describing all runs in a directory, and — for sweeps — a
long-format sweep.csv whose per-value run CSVs live in sibling
subdirectories. A RunFrame is the concatenation of run CSVs with tag
columns (algorithm, seed, value) attached; the column set is validated
strictly so schema drift fails at load time, naming the column.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

# The run-CSV schema, verbatim. test_accuracy is the one recognized
# optional extension (hyperparameter-task runs may append it); any other
# unknown column is refused.
CSV_COLUMNS = (
    "t", "samples_upper", "samples_lower", "comm_rounds",
    "stationarity_err", "consensus_err", "lower_err", "metric_M",
    "upper_loss", "wall_seconds",
)
OPTIONAL_COLUMNS = ("test_accuracy",)
TAG_COLUMNS = ("algorithm", "seed", "value")

SWEEP_COLUMNS = ("axis", "value", "algorithm", "seed", "final_metric_M",
                 "rate_slope", "diverged_at")

_RUN_NAME = re.compile(r"^(?P<algorithm>.+)_seed(?P<seed>\d+)(r\d+)?\.csv$")


class SchemaError(ValueError):
    """An input file does not match the documented schema."""


def _check_columns(cols, required, optional, where: str) -> None:
    cols = list(cols)
    for c in required:
        if c not in cols:
            raise SchemaError(f"{where}: missing column {c!r}")
    allowed = set(required) | set(optional)
    for c in cols:
        if c not in allowed:
            raise SchemaError(f"{where}: unknown column {c!r}")


@dataclass(frozen=True)
class RunFrame:
    """Rows of one or more run CSVs, tagged by (algorithm, seed, value).

    value is the sweep-axis value the run belongs to (NaN outside
    sweeps). The underlying table is never handed back to callers for
    mutation; use .table for a defensive copy.
    """

    _table: pd.DataFrame

    def __post_init__(self):
        _check_columns(self._table.columns, CSV_COLUMNS + TAG_COLUMNS,
                       OPTIONAL_COLUMNS, "run frame")

    @property
    def table(self) -> pd.DataFrame:
        return self._table.copy()

    @property
    def algorithms(self) -> tuple:
        return tuple(sorted(self._table["algorithm"].unique()))

    @property
    def seeds(self) -> tuple:
        return tuple(int(s) for s in sorted(self._table["seed"].unique()))

    @property
    def values(self) -> tuple:
        vals = self._table["value"].dropna().unique()
        return tuple(sorted(float(v) for v in vals))

    @property
    def extras(self) -> tuple:
        return tuple(c for c in OPTIONAL_COLUMNS if c in self._table.columns)

    def __len__(self) -> int:
        return len(self._table)


def frame_from_csv(path, algorithm: str, seed: int, value=None) -> RunFrame:
    """Load one run CSV and tag every row."""
    path = Path(path)
    table = pd.read_csv(path)
    _check_columns(table.columns, CSV_COLUMNS, OPTIONAL_COLUMNS, path.name)
    table["algorithm"] = algorithm
    table["seed"] = int(seed)
    table["value"] = np.nan if value is None else float(value)
    return RunFrame(table)


def frame_from_run_dir(path, value=None) -> RunFrame:
    """Load every run listed in a directory's summary.json.

    Diverged seeds are included with whatever rows they produced; the
    median/IQR aggregation downstream is robust to the shorter series.
    """
    path = Path(path)
    summary_path = path / "summary.json"
    try:
        with open(summary_path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read summary.json ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{summary_path}: not valid JSON ({exc})") from exc
    if "results" not in summary or not isinstance(summary["results"], dict):
        raise SchemaError(f"{summary_path}: missing 'results' mapping")
    frames = []
    for algorithm, res in summary["results"].items():
        for entry in res.get("per_seed", []):
            frames.append(frame_from_csv(path / entry["csv"], algorithm,
                                         entry["seed"], value=value))
    if not frames:
        raise SchemaError(f"{summary_path}: no runs listed")
    return concat_frames(frames)


def frame_from_path(path) -> RunFrame:
    """Dispatch: a directory means summary.json, a file means one CSV
    whose (algorithm, seed) tags are parsed from its name."""
    path = Path(path)
    if path.is_dir():
        return frame_from_run_dir(path)
    match = _RUN_NAME.match(path.name)
    if match is None:
        raise SchemaError(
            f"{path.name}: cannot infer tags; run CSVs are named "
            "<algorithm>_seed<seed>.csv")
    return frame_from_csv(path, match["algorithm"], int(match["seed"]))


def concat_frames(frames) -> RunFrame:
    frames = list(frames)
    if not frames:
        raise SchemaError("no frames to concatenate")
    tables = [f._table if isinstance(f, RunFrame) else f for f in frames]
    return RunFrame(pd.concat(tables, ignore_index=True))


def load_sweep(path) -> pd.DataFrame:
    """Load and validate a long-format sweep.csv."""
    path = Path(path)
    table = pd.read_csv(path)
    _check_columns(table.columns, SWEEP_COLUMNS, (), path.name)
    return table


def _axis_token(value) -> str:
    # Mirror of the simulator's sweep-subdirectory naming.
    return str(value).replace("/", "_").replace(" ", "")


def frames_from_sweep(path, axis: str = "topology.p_c") -> RunFrame:
    """Collect the per-run CSVs behind a sweep.csv, tagged by axis value.

    The rows of sweep.csv index runs stored under sibling directories
    named <axis-with-dots-replaced>_<value>/. Requires every row's axis
    to equal the requested one.
    """
    path = Path(path)
    table = load_sweep(path)
    if len(table) == 0:
        raise SchemaError(f"{path.name}: empty sweep")
    axes = table["axis"].unique()
    if list(axes) != [axis]:
        raise SchemaError(
            f"{path.name}: expected sweep axis {axis!r}, found {list(axes)}")
    frames = []
    for value, group in table.groupby("value", sort=True):
        sub = path.parent / f"{axis.replace('.', '_')}_{_axis_token(value)}"
        for row in group.itertuples():
            name = f"{row.algorithm}_seed{row.seed}.csv"
            frames.append(frame_from_csv(sub / name, row.algorithm, row.seed,
                                         value=value))
    return concat_frames(frames)
