"""Command-line interface.

Subcommands: run <config>, sweep <config> --axis <name> --values <list>,
validate <suite>, spectral <edgelist>. Exit codes: 0 success, 2 validation
failure (bad configs/inputs or failed validation suites), 1 usage error.
Output paths resolve under $DECBILEVEL_OUT (default: current directory).
"""

from __future__ import annotations

import argparse
import json
import sys

from decbilevel.harness.checks import SUITES, validate
from decbilevel.harness.config import ConfigError, parse_config
from decbilevel.harness.runner import output_root, run_experiment, sweep

USAGE_ERROR = 1
VALIDATION_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems by default; this tool reserves 2
    # for validation failures, so remap usage errors to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="decbilevel",
                     description="Decentralized bilevel optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run all (algorithm, seed) pairs of a config")
    p_run.add_argument("config", help="YAML config file")

    p_sweep = sub.add_parser("sweep", help="repeat a config across one axis")
    p_sweep.add_argument("config", help="YAML config file")
    p_sweep.add_argument("--axis", required=True,
                         help="dotted config field, e.g. topology.p_c")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 0.3,0.5,0.8")

    p_val = sub.add_parser("validate", help="run a self-check suite")
    p_val.add_argument("suite", choices=SUITES)

    p_spec = sub.add_parser("spectral", help="report mixing rates for an edge list")
    p_spec.add_argument("edgelist", help="plain-text edge list (first line m)")
    return parser


def _load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        print(f"decbilevel: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(VALIDATION_FAILURE)
    except ConfigError as exc:
        print(f"decbilevel: invalid config: {exc}", file=sys.stderr)
        raise SystemExit(VALIDATION_FAILURE)


def _parse_values(text: str) -> list:
    values = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            values.append(int(tok))
            continue
        except ValueError:
            pass
        try:
            values.append(float(tok))
            continue
        except ValueError:
            values.append(tok)
    return values


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    summary = run_experiment(cfg, quiet=False)
    out_dir = output_root() / cfg.out
    print(f"wrote {out_dir}/summary.json")
    for algo, res in summary["results"].items():
        med = res["final_metric_median"]
        med_txt = "all seeds diverged" if med is None else f"median final metric_M {med:.6e}"
        print(f"  {algo}: {med_txt}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = _parse_values(args.values)
    try:
        rows = sweep(cfg, args.axis, values, quiet=False)
    except ConfigError as exc:
        print(f"decbilevel: {exc}", file=sys.stderr)
        return VALIDATION_FAILURE
    print(f"wrote {output_root() / cfg.out}/sweep.csv ({len(rows)} rows)")
    return 0


def _cmd_validate(args) -> int:
    report = validate(args.suite)
    print(json.dumps(report, indent=2))
    return 0 if report["passed"] else VALIDATION_FAILURE


def _cmd_spectral(args) -> int:
    from decbilevel.topology import (
        laplacian_matrix,
        load_edge_list,
        metropolis_matrix,
    )
    try:
        graph = load_edge_list(args.edgelist)
    except (OSError, ValueError) as exc:
        print(f"decbilevel: cannot load edge list: {exc}", file=sys.stderr)
        return VALIDATION_FAILURE
    if not graph.connected:
        print("decbilevel: graph is disconnected (lambda would be 1)", file=sys.stderr)
        return VALIDATION_FAILURE
    print(f"m={graph.m} edges={len(graph.edges)}")
    for name, builder in (("metropolis", metropolis_matrix),
                          ("laplacian", laplacian_matrix)):
        cm = builder(graph)
        print(f"{name}: lambda={cm.lam:.12f} gap={1.0 - cm.lam:.12f}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "sweep": _cmd_sweep,
               "validate": _cmd_validate, "spectral": _cmd_spectral}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
