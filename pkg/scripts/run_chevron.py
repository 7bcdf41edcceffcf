#!/usr/bin/env python
"""Chevron-ramp experiment: geometry-only filter vs dead reckoning, 5 seeds."""

import sys

from hapticloc.evaluate import default_chevron_experiment, run_experiment


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/chevron"
    report = run_experiment(default_chevron_experiment(), out)
    for row in report.rows:
        print(f"{row.mode:>10s} seed={row.seed:>4s} ate={row.ate_m:.4f} m improvement={row.improvement_pct:+.1f}%")


if __name__ == "__main__":
    main()
