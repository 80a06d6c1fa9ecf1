"""Two robots, one 0.5 m gap.

Runs the doorway once with the priority auction and once without it,
prints what the auction decided and how each episode ended, and writes
trajectory plots next to this file (demos/out/).

    python3 demos/doorway_walkthrough.py [seed]
"""

import json
import sys
from pathlib import Path

from bilevel_nav import builtin_scenario, run_episode
from bilevel_nav.plot import plot_telemetry, read_telemetry

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
out = Path(__file__).parent / "out"
base = builtin_scenario("doorway").with_overrides(seed=seed)

for mode in ("auction", "none"):
    res = run_episode(base.with_overrides(scheduling=mode))
    m = res.metrics
    print(f"--- scheduling={mode}, seed={seed}: {m.outcome} after {m.ticks} ticks")

    for line in res.telemetry:
        rec = json.loads(line)
        if rec["type"] == "auction":
            # private values stay private; only the bids are published
            print(f"  auction at tick {rec['t']} for zone {rec['zone']!r}")
            for rid, turn in sorted(rec["sigma"].items(), key=lambda kv: kv[1]):
                print(f"    robot {rid}: bid {rec['bids'][rid]:.2f} -> turn {turn}, pays {rec['payments'][rid]:.2f}")

    if m.success:
        print(f"  gap makespan {m.makespan:.3f} s, flow rate {m.flow_rate:.2f} robots/(m s)")
    print(f"  stop ticks {m.stop_ticks}, velocity changes {m.delta_v}, collisions {m.collisions}")

    stem = f"doorway-{mode}-s{seed}"
    tpath, _ = res.write(out, stem)
    print(f"  plot: {plot_telemetry(read_telemetry(tpath), out / (stem + '.svg'))}")
