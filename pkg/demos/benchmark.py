"""
Clean labels and label outliers
===============================

The canonical comparison: one radio map, one split, two training sets.  The
second has 5% of its labels moved to random positions.  Takes a minute or
two on a laptop.
"""

import sys
from pathlib import Path

from dnlpos.benchmark import run_benchmark

out = Path(sys.argv[1] if len(sys.argv) > 1 else "benchmark_output")
res = run_benchmark(out, seed=42)
for name in ("clean", "outliers"):
    print((out / name / "report.md").read_text())
