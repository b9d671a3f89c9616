#!/usr/bin/env python3
"""Run the full 4-ary depth-5 compression comparison and write the CSV.

Equivalent to:
    rootedtrees experiment --config configs/experiment_full.txt \
        --output full_experiment.csv
"""

import sys
from pathlib import Path

from rootedtrees.cli import main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "full_experiment.csv"
    sys.exit(
        main(
            [
                "experiment",
                "--config",
                str(ROOT / "configs" / "experiment_full.txt"),
                "--output",
                out,
            ]
        )
    )
