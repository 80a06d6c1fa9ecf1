"""Four robots cross a corridor intersection, one per arm.

Compares the auction schedule with the two ablations and the
social-forces baseline over a handful of seeds and prints the same table
``bilevel-nav batch`` produces.

    python3 demos/intersection_sweep.py [n_seeds]
"""

import sys

from bilevel_nav import builtin_scenario, run_episode
from bilevel_nav.cli import CELLS
from bilevel_nav.metrics import aggregate, format_table

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
base = builtin_scenario("intersection")

rows = []
for cell in ("auction", "none", "alt-scaling", "social-forces"):
    eps = [run_episode(base.with_overrides(seed=s, **CELLS[cell])).metrics for s in range(n)]
    rows.append(aggregate(cell, eps))
    print(f"{cell}: outcomes {[e.outcome for e in eps]}", file=sys.stderr)

sys.stdout.write(format_table(rows))
