#!/usr/bin/env python3
"""Run every shipped scenario file under scenarios/ and summarize reports.

Usage:
    python scripts/run_all_scenarios.py [--out out] [--parallel]
"""
import argparse
import sys
from pathlib import Path

from polldiff.cli import run_scenario
from polldiff.scenario import load_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out")
    ap.add_argument("--parallel", action="store_true")
    args = ap.parse_args()
    root = Path(__file__).resolve().parents[1]
    status = 0
    for path in sorted((root / "scenarios").glob("*.ini")):
        out_dir = Path(args.out) / path.stem
        scn = load_scenario(path, out_override=out_dir)
        code = run_scenario(scn, parallel=args.parallel)
        print(f"{path.name}: exit {code}; report at {out_dir / 'report.txt'}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
