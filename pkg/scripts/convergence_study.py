#!/usr/bin/env python3
"""Convergence statistics of the learning MAC over a seed sweep.

Prints per-seed network convergence iterations plus summary statistics,
and verifies the post-convergence steady state stays collision-free.

Usage:
    python3 scripts/convergence_study.py [N_SEEDS] [HORIZON]
"""

import statistics
import sys
from dataclasses import replace

from qtdma import Outcome, ScenarioConfig, run
from qtdma.metrics import convergence_time


def study(n_seeds: int = 100, horizon: int = 3000) -> int:
    cfg = ScenarioConfig()
    converged = []
    print("seed network_iteration seconds clean_steady_state")
    for seed in range(1, n_seeds + 1):
        result = run(replace(cfg, rng_seed=seed), "qlearning", horizon)
        summary = convergence_time(result)
        if not summary.converged:
            print(f"{seed} not-converged - -")
            continue
        w0 = result.origin_us + summary.network_iteration * cfg.frame_period_us
        dirty = any(
            rec.outcome is Outcome.COLLIDED for rec in result.records
        ) or any(t >= w0 for t, _ in result.busy_senses)
        print(
            f"{seed} {summary.network_iteration} "
            f"{summary.network_seconds:.1f} {not dirty}"
        )
        converged.append(summary.network_iteration)

    print()
    print(f"converged: {len(converged)}/{n_seeds}")
    if converged:
        print(f"median iteration: {statistics.median(converged)}")
        print(f"range: [{min(converged)}, {max(converged)}]")
        frame_s = cfg.frame_period_us / 1e6
        print(f"median time: {statistics.median(converged) * frame_s:.1f} s")
    return 0


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    horizon = int(sys.argv[2]) if len(sys.argv) > 2 else 3000
    sys.exit(study(n, horizon))
