#!/usr/bin/env python3
"""Verify every registry entry at its defaults and tabulate the verdicts."""

import argparse
import time

from asdkit import zoo


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    failures = 0
    for name in zoo.entry_names():
        entry = zoo.get_entry(name)
        t0 = time.perf_counter()
        S = entry.samples(args.samples, args.seed)
        reps = list(entry.verify(S)) + list(entry.killing_reports(S))
        bad = [r.name for r in reps if not r.passed]
        worst = max((r.maxAbs for r in reps), default=0.0)
        failures += bool(bad)
        status = "ok" if not bad else "FAIL " + ", ".join(bad)
        print(f"{name:28s} {len(reps):3d} checks  worst {worst:9.2e}  {time.perf_counter() - t0:6.2f}s  {status}")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
