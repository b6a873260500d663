"""Figure rendering for the decentralized bilevel simulator's outputs.

Consumes only the simulator's documented file formats: per-run CSVs
(one per algorithm/seed pair), the summary.json written next to them,
and the long-format sweep.csv of parameter sweeps. Never imports the
simulator itself.
"""

from decbilevel_plots.frames import (
    CSV_COLUMNS,
    OPTIONAL_COLUMNS,
    RunFrame,
    SchemaError,
    concat_frames,
    frame_from_csv,
    frame_from_path,
    frame_from_run_dir,
    frames_from_sweep,
    load_sweep,
)
from decbilevel_plots.figures import (
    aggregate,
    plot_compare,
    plot_hyperopt,
    plot_pc,
    read_figure_report,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_COLUMNS",
    "OPTIONAL_COLUMNS",
    "RunFrame",
    "SchemaError",
    "aggregate",
    "concat_frames",
    "frame_from_csv",
    "frame_from_path",
    "frame_from_run_dir",
    "frames_from_sweep",
    "load_sweep",
    "plot_compare",
    "plot_hyperopt",
    "plot_pc",
    "read_figure_report",
]
