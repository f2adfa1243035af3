"""Command-line entry point: run, simulate, weights and diagnostics."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .config import load_experiment, load_synth
from .errors import SpatioVolError
from .panel import diagnostics, load_panel
from .runner import run_experiment, write_simulation, write_weights_only

logger = logging.getLogger("spatiovol")


def _cmd_run(args) -> int:
    summary = run_experiment(load_experiment(args.config))
    print(f"{len(summary.metrics)} cells fitted, {len(summary.failures)} failed; reports in {summary.output}")
    for row in summary.ranking:
        print(f"  {row['rank']:>2}  {row['model']:<9} {row['matrix'] or '-':<9} mean loss {row['mean_loss']:.4f}")
    return 0 if summary.metrics else 1


def _cmd_simulate(args) -> int:
    cfg = load_synth(args.config)
    panel = write_simulation(cfg, args.output)
    print(f"wrote {panel.T} x {panel.n} {cfg.dgp} panel to {args.output or cfg.output}")
    return 0


def _cmd_weights(args) -> int:
    cfg = load_experiment(args.config)
    weights = write_weights_only(cfg)
    for kind, w in weights.items():
        tag = "directed" if w.directed else "symmetric"
        print(f"{kind:<9} {tag:<9} isolated rows: {list(w.zero_rows) or '-'}")
    return 0


def _cmd_diagnostics(args) -> int:
    diag = diagnostics(load_panel(args.input, prices=args.prices), arch_lags=args.lags)
    rows = diag.rows()
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        wr = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if args.output:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spatiovol", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment grid from a YAML config")
    r.add_argument("config")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("simulate", help="draw a synthetic panel from a YAML simulation config")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="CSV path (overrides the config's output)")
    s.set_defaults(func=_cmd_simulate)

    w = sub.add_parser("weights", help="build the weight matrices of an experiment config")
    w.add_argument("config")
    w.set_defaults(func=_cmd_weights)

    d = sub.add_parser("diagnostics", help="descriptive statistics and ARCH-LM p-values")
    d.add_argument("input")
    d.add_argument("--prices", action="store_true", help="cells are prices, not returns")
    d.add_argument("--lags", type=int, default=5)
    d.add_argument("-o", "--output")
    d.set_defaults(func=_cmd_diagnostics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        return args.func(args)
    except SpatioVolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
