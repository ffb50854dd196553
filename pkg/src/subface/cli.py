"""Command-line entry point.

Verbs:
  run <config.yaml>            execute a batch experiment and emit reports
  report <bundle-dir>          regenerate derived reports from a bundle
  sweep <config.yaml> --t a..b rank-1 accuracy over a dimensionality range
  fuse <tables...> --...       combine externally produced score tables

SUBFACE_OUTPUT_DIR overrides the configured output directory (and only
that).  Exit status is 0 on success, 2 on a diagnosed failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, SubfaceError
from .experiment import (
    emit_reports,
    re_emit_reports,
    run_experiment,
    substream_seed,
    sweep_csv,
    sweep_dimensionality,
)
from .fusion import (
    AccuracySummary,
    FusionWeights,
    fuse,
    read_score_table,
    weights_method1,
    weights_method2,
    write_score_table,
)

OUTPUT_ENV_VAR = "SUBFACE_OUTPUT_DIR"


def _apply_output_override(config):
    override = os.environ.get(OUTPUT_ENV_VAR)
    if override:
        object.__setattr__(config, "output_dir", override)
    return config


def _cmd_run(args) -> int:
    config = _apply_output_override(load_config(args.config))
    if args.threads is not None:
        # scheduling is a runtime choice; reports never depend on it
        object.__setattr__(config, "threads", args.threads)
    bundle = run_experiment(config)
    written = emit_reports(bundle, plots=args.plots or None)
    print(f"wrote {len(written)} files to {config.output_dir}")
    print(f"config hash: {bundle.config_hash}")
    return 0


def _cmd_report(args) -> int:
    out = args.out or args.bundle
    written = re_emit_reports(args.bundle, out)
    print(f"re-emitted {len(written)} report files to {out}")
    return 0


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _cmd_sweep(args) -> int:
    config = _apply_output_override(load_config(args.config))
    rows = sweep_dimensionality(config, _parse_range(args.t))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    path.write_text(sweep_csv(rows))
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_fuse(args) -> int:
    tables = [read_score_table(p) for p in args.tables]
    tags = tuple(t.tag for t in tables)
    if args.weights:
        weights = FusionWeights(
            weights=np.array([float(w) for w in args.weights.split(",")]),
            tags=tags,
        )
    elif args.accuracies:
        acc = AccuracySummary(
            tags=tags,
            accuracies=np.array([float(a) for a in args.accuracies.split(",")]),
        )
        weights = weights_method2(acc)
    elif args.wins:
        wins = {}
        for item in args.wins.split(","):
            category, _, winner = item.partition("=")
            wins[category] = winner
        weights = weights_method1(wins, tags)
    else:
        raise ConfigError("fuse needs --weights, --accuracies, or --wins")
    fused = fuse(tables, weights, tag="hybrid")
    write_score_table(fused, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subface",
        description="Seeded batch experiments for subspace face identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured experiment")
    p_run.add_argument("config", help="YAML experiment configuration")
    p_run.add_argument("--plots", action="store_true", help="emit CMS plots (SVG)")
    p_run.add_argument("--threads", type=int, help="evaluation thread count")
    p_run.set_defaults(func=_cmd_run)

    p_report = sub.add_parser("report", help="re-emit reports from a bundle")
    p_report.add_argument("bundle", help="directory written by `subface run`")
    p_report.add_argument("--out", help="target directory (default: in place)")
    p_report.set_defaults(func=_cmd_report)

    p_sweep = sub.add_parser("sweep", help="rank-1 accuracy over a t range")
    p_sweep.add_argument("config", help="YAML experiment configuration")
    p_sweep.add_argument("--t", required=True, help="range a..b or comma list")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fuse = sub.add_parser("fuse", help="fuse externally produced score tables")
    p_fuse.add_argument("tables", nargs="+", help="score table CSV files")
    p_fuse.add_argument("--weights", help="comma-separated explicit weights")
    p_fuse.add_argument("--accuracies", help="comma-separated rank-1 accuracies")
    p_fuse.add_argument("--wins", help="category=tag list for the win table")
    p_fuse.add_argument("--out", default="fused.csv", help="output CSV path")
    p_fuse.set_defaults(func=_cmd_fuse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SubfaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: [stage=io] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
