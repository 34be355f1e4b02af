#!/usr/bin/env python3
"""Reproduce the reference evaluation end to end.

Runs the Table-1-style default scenario: the learning MAC against the
CSMA/CA baseline across the packet-size sweep, then emits every series,
the comparison table, and the manifest the figure renderer consumes.

Usage:
    python3 scripts/reproduce_reference_experiments.py [OUT_DIR] [N_SEEDS]

Defaults: OUT_DIR=artifacts/reference, N_SEEDS=5. With the artifacts in
hand, render the five figures:

    cd frontend && npm run render -- --manifest ../artifacts/reference/manifest.json --all --out-dir ../artifacts/reference/figures
"""

import sys

from qtdma.cli import main


def run(out_dir: str = "artifacts/reference", n_seeds: int = 5) -> int:
    seeds = ",".join(str(s) for s in range(1, n_seeds + 1))
    return main(
        [
            "compare",
            "--sizes", "30,60,90,120,150,180",
            "--seeds", seeds,
            "--horizon", "2500",
            "--out", out_dir,
        ]
    )


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "artifacts/reference"
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    sys.exit(run(out, n))
