#!/usr/bin/env python3
"""Run the full pipeline on a synthetic corpus and print the comparison table.

Equivalent to:

    gametrace gen-synthetic --workdir WD
    gametrace aggregate     --workdir WD
    gametrace select        --workdir WD
    gametrace benchmark     --workdir WD
    gametrace verify        --workdir WD

Useful for eyeballing how corpus scale and seed move the model scores.
"""

import argparse
import sys
import time

from gametrace.cli import main as cli


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="experiment_out")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--sessions", type=int, default=120)
    parser.add_argument("--events-per-session", type=int, default=1000)
    args = parser.parse_args(argv)

    common = ["--workdir", args.workdir, "--seed", str(args.seed)]
    steps = [
        ["gen-synthetic", "--sessions", str(args.sessions),
         "--events-per-session", str(args.events_per_session)],
        ["aggregate"],
        ["select"],
        ["benchmark"],
        ["verify"],
    ]
    started = time.perf_counter()
    for step in steps:
        print(f"\n=== gametrace {step[0]} ===")
        code = cli(step + common)
        if code != 0:
            print(f"step {step[0]} failed with exit code {code}", file=sys.stderr)
            return code
    print(f"\ndone in {time.perf_counter() - started:.1f}s; artifacts in {args.workdir}/")
    return 0


if __name__ == "__main__":
    sys.exit(run())
