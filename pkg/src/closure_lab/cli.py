"""Command line: ``closure-lab run <config> [-o DIR]`` and ``closure-lab list``.

Exit codes: 0 success, 2 invalid input (nothing written), 3 numerical
failure (report.json records the error and its diagnostics).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig, list_experiments, load_config
from .errors import NumericalFailure, ValidationError
from .experiments import Outcome, run_experiment
from .report import dumps_json

__all__ = ["main", "run"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _write(out: Path, report: dict, outcome: Outcome | None, plots: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if outcome is not None:
        if outcome.tables:
            (out / "data").mkdir(exist_ok=True)
            for name, text in outcome.tables.items():
                (out / "data" / f"{name}.csv").write_text(text)
        if plots and outcome.plots:
            (out / "plots").mkdir(exist_ok=True)
            for name, svg in outcome.plots.items():
                (out / "plots" / f"{name}.svg").write_text(svg)
    (out / "report.json").write_text(dumps_json(report))


def run(cfg: ExperimentConfig, output=None) -> tuple[int, dict]:
    """Run one configured experiment and write its artifacts; returns (exit code, report)."""
    out = Path(output) if output is not None else cfg.output
    header = {"kind": cfg.kind, "seed": cfg.seed, "config": cfg.echo()}
    try:
        outcome = run_experiment(cfg)
    except NumericalFailure as exc:
        report = {**header, "status": "numerical_failure",
                  "error": {"type": type(exc).__name__, "message": str(exc), "diagnostics": exc.diagnostics}}
        _write(out, report, None, False)
        return EXIT_NUMERICAL, report
    report = {**header, "status": "ok", **outcome.results}
    _write(out, report, outcome, cfg.plots)
    return EXIT_OK, report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="closure-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("-o", "--output", type=Path, default=None, help="output directory")
    sub.add_parser("list", help="list experiment kinds and their keys")
    args = parser.parse_args(argv)

    if args.command == "list":
        sys.stdout.write(list_experiments())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        code, report = run(cfg, args.output)
    except ValidationError as exc:
        print(f"closure-lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if code == EXIT_NUMERICAL:
        err = report["error"]
        print(f"closure-lab: {err['type']}: {err['message']}", file=sys.stderr)
    else:
        print(f"closure-lab: {cfg.kind} done -> {args.output or cfg.output}")
    return code


if __name__ == "__main__":
    sys.exit(main())
