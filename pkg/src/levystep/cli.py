"""Command-line entry points.

    levystep simulate --config cfg.json [--seed S] [--out-dir D]
    levystep converge --config cfg.json [--paths M] [--seed S] [--out-dir D]
    levystep truncate --config cfg.json [--paths M] [--seed S] [--out-dir D]

Exit codes: 0 success, 2 configuration error (bad flags, missing or invalid
config), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .common import ConfigError
from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levystep")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "write one coupled scheme/oracle trajectory"),
        ("converge", "run the strong-convergence study"),
        ("truncate", "run the truncation-error study"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--paths", type=int, default=None, help="override the path count")
        p.add_argument("--out-dir", default=".", help="output directory (created if needed)")
    return parser


def _load_config(args) -> harness.StudyConfig:
    cfg = harness.config_from_json(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paths is not None:
        if args.paths < 2:
            raise ConfigError("--paths must be at least 2")
        overrides["paths"] = args.paths
    if overrides:
        source = dict(cfg.source)
        source.update(overrides)
        cfg = dataclasses.replace(cfg, source=source, **overrides)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        out = harness.ensure_out_dir(args.out_dir)
        if args.command == "simulate":
            traj, oracle_vals = harness.simulate_trajectory(cfg)
            harness.write_trajectory_csv(traj.times, traj.values, oracle_vals,
                                         out / "trajectory.csv")
            print(f"wrote {out / 'trajectory.csv'}")
        elif args.command == "converge":
            report = harness.strong_error_study(cfg)
            harness.write_errors_csv(report, out / "errors.csv")
            harness.write_report_json(report, out / "report.json")
            print(f"slope {report.slope:.4f} "
                  f"(ci {report.slope_ci[0]:.4f}..{report.slope_ci[1]:.4f}, "
                  f"target {report.target_order}); wrote {out / 'errors.csv'}, "
                  f"{out / 'report.json'}")
        else:
            report = harness.truncation_study(cfg)
            harness.write_truncation_csv(report, out / "truncation.csv")
            harness.write_report_json(report, out / "report.json")
            print(f"slope {report.slope:.4f} "
                  f"(ci {report.slope_ci[0]:.4f}..{report.slope_ci[1]:.4f}); "
                  f"wrote {out / 'truncation.csv'}, {out / 'report.json'}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, distinct from config problems
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
