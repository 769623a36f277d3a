"""Run every experiment with the configs in scripts/configs and report the exit codes.

Usage: python scripts/run_all.py [--out DIR] [--workers N] [--quick]
``--quick`` skips the two Monte Carlo heavy runs (clt, chaos).
"""

import argparse
import sys
from pathlib import Path

from rmfchaos.cli import main

HERE = Path(__file__).resolve().parent
RUNS = [
    ("analytics", "analytics.cfg"),
    ("dickman-table", "dickman.cfg"),
    ("coupling", "coupling.cfg"),
    ("multifractal", "multifractal.cfg"),
    ("clt", "clt.cfg"),
    ("chaos", "chaos.cfg"),
]


def run(out: str, workers: int, quick: bool) -> int:
    worst = 0
    for command, cfg in RUNS:
        if quick and command in ("clt", "chaos"):
            continue
        print(f"== {command}")
        code = main([command, "--config", str(HERE / "configs" / cfg), "--out", out, "--workers", str(workers)])
        print(f"== {command}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--quick", action="store_true")
    a = ap.parse_args()
    sys.exit(run(a.out, a.workers, a.quick))
