"""Command-line figure tool.

Subcommands: compare <run-dir-or-csv...>, pc <sweep.csv>,
hyperopt <run-dir-or-csv...>; all take --out <path> and (where it
applies) --x <axis>. Exit codes match the simulator CLI: 0 success,
2 invalid inputs (schema or file problems), 1 usage error.
"""

from __future__ import annotations

import argparse
import sys

from decbilevel_plots.figures import X_AXES, plot_compare, plot_hyperopt, plot_pc
from decbilevel_plots.frames import SchemaError, concat_frames, frame_from_path

USAGE_ERROR = 1
VALIDATION_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems by default; 2 is reserved for
    # validation failures here, so remap usage errors to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="decbilevel-plots",
                     description="Render figures from simulator output files")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p_cmp = sub.add_parser("compare", help="median/IQR metric curves per algorithm")
    p_cmp.add_argument("inputs", nargs="+",
                       help="run directories (with summary.json) or run CSVs")
    p_cmp.add_argument("--out", required=True, help="output figure path")
    p_cmp.add_argument("--x", default="samples_upper", choices=X_AXES)

    p_pc = sub.add_parser("pc", help="one curve per swept edge probability")
    p_pc.add_argument("sweep", help="sweep.csv of a topology.p_c sweep")
    p_pc.add_argument("--out", required=True, help="output figure path")
    p_pc.add_argument("--x", default="t", choices=X_AXES)

    p_hyp = sub.add_parser("hyperopt", help="validation loss (and accuracy) curves")
    p_hyp.add_argument("inputs", nargs="+",
                       help="run directories (with summary.json) or run CSVs")
    p_hyp.add_argument("--out", required=True, help="output figure path")
    p_hyp.add_argument("--x", default="samples_upper", choices=X_AXES)
    return parser


def _load_inputs(paths):
    return concat_frames([frame_from_path(p) for p in paths])


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            out = plot_compare(_load_inputs(args.inputs), args.out, x=args.x)
        elif args.command == "pc":
            out = plot_pc(args.sweep, args.out, x=args.x)
        else:
            out = plot_hyperopt(_load_inputs(args.inputs), args.out, x=args.x)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"decbilevel-plots: {exc}", file=sys.stderr)
        return VALIDATION_FAILURE
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
