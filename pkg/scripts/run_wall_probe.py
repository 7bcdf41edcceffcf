#!/usr/bin/env python
"""Wall-room probing experiment: recover a 0.10 m prior offset from leg probes."""

import sys

from hapticloc.evaluate import default_wallroom_experiment, run_experiment


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/wall-room"
    report = run_experiment(default_wallroom_experiment(), out)
    for row in report.rows:
        print(f"{row.mode:>10s} seed={row.seed:>4s} ate={row.ate_m:.4f} m improvement={row.improvement_pct:+.1f}%")


if __name__ == "__main__":
    main()
