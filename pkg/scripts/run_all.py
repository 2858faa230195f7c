"""Run every example config in configs/ and print one summary line per run.

Usage: python scripts/run_all.py [OUTPUT_DIR]   (default: results/)
"""

import json
import sys
from pathlib import Path

from closure_lab.cli import main

ROOT = Path(__file__).resolve().parents[1]
KEYS = ("verdict", "k", "case", "slope", "C", "sigma", "residual", "product_law", "index_bound", "error")


def summarize(report: dict) -> str:
    parts = []
    for key in KEYS:
        if key in report:
            v = report[key]
            parts.append(f"{key}={v['type'] if key == 'error' else v}")
    return " ".join(parts)


def run_all(out_root: Path) -> int:
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.cfg")):
        out = out_root / cfg.stem
        code = main(["run", str(cfg), "-o", str(out)])
        worst = max(worst, code)
        report = out / "report.json"
        line = summarize(json.loads(report.read_text())) if report.exists() else "no artifacts"
        print(f"{cfg.stem:15s} exit={code} {line}")
    return worst


if __name__ == "__main__":
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "results"
    run_all(out_root)
