"""``bilevel-nav`` command line.

    bilevel-nav run doorway --seed 3 --out runs/ --plot
    bilevel-nav batch doorway --seeds 0-24 --cells auction,none,alt-scaling
    bilevel-nav plot runs/doorway-s3.telemetry.jsonl -o doorway.svg
    bilevel-nav graph doorway

A scenario argument is a JSON file path or a packaged scenario name.
Exit codes: 0 success, 1 failed episode (collision, deadlock, timeout) or
failed batch cell, 2 bad input.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .engine import run_episode
from .geometry import MapFormatError
from .global_planner import PlanningError, build_nav_graph
from .metrics import aggregate, format_table
from .plot import TelemetryError, plot_telemetry, read_telemetry
from .scenario import SCENARIO_DIR, Scenario, ScenarioError, builtin_scenario, load_scenario

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

# batch cell name -> scenario overrides
CELLS = {
    "auction": {"scheduling": "auction", "baseline": "bilevel"},
    "none": {"scheduling": "none", "baseline": "bilevel"},
    "alt-scaling": {"scheduling": "enforced-alt-scaling", "baseline": "bilevel"},
    "social-forces": {"baseline": "social-forces"},
}


class UsageError(ValueError):
    pass


def resolve_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.suffix != ".json" and not path.exists() and (SCENARIO_DIR / f"{ref}.json").exists():
        return builtin_scenario(ref)
    return load_scenario(path)


def parse_seeds(text: str) -> list[int]:
    """``"0-24"``, ``"1,5,9"`` or a mix such as ``"0-3,10"``."""
    seeds: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise UsageError(f"bad seed spec {part!r}") from None
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def _overrides(args) -> dict:
    kw: dict = {}
    if args.no_schedule:
        kw["scheduling"] = "none"
    if args.alt_scaling:
        kw["scheduling"] = "enforced-alt-scaling"
    if args.baseline:
        kw["baseline"] = args.baseline
    return kw


def cmd_run(args) -> int:
    sc = resolve_scenario(args.scenario).with_overrides(seed=args.seed, **_overrides(args))
    result = run_episode(sc)
    stem = f"{sc.name}-s{sc.seed}"
    tpath, mpath = result.write(args.out, stem)
    m = result.metrics
    print(f"{sc.name} seed={sc.seed} {sc.scheduling}/{sc.baseline}: {m.outcome}")
    if m.makespan is not None:
        print(f"makespan {m.makespan:.3f} s  flow rate {m.flow_rate:.3f} /(m s)")
    print(f"stop time {m.avg_stop_time:.2f} ticks  avg dV {m.avg_delta_v:.2f}  collisions {m.collisions}")
    print(f"wrote {tpath} and {mpath}")
    if args.plot:
        svg = plot_telemetry(read_telemetry(tpath), tpath.with_name(f"{stem}.svg"))
        print(f"wrote {svg}")
    return EXIT_OK if m.success else EXIT_FAILED


def cmd_batch(args) -> int:
    base = resolve_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    names = [c.strip() for c in args.cells.split(",") if c.strip()]
    unknown = [c for c in names if c not in CELLS]
    if unknown or not names:
        raise UsageError(f"unknown cell(s) {unknown}; choose from {sorted(CELLS)}")
    jobs = [(c, s) for c in names for s in seeds]
    scenarios = [base.with_overrides(seed=s, **CELLS[c]) for c, s in jobs]

    def one(sc):
        try:
            return run_episode(sc)
        except Exception as exc:  # recorded per cell, the batch goes on
            return exc

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(one, scenarios))
    rows, errors = [], 0
    out = Path(args.out) if args.out else None
    for c in names:
        eps = []
        for (cell, seed), sc, res in zip(jobs, scenarios, results):
            if cell != c:
                continue
            if isinstance(res, Exception):
                errors += 1
                print(f"{c} seed {seed}: error: {res}", file=sys.stderr)
                continue
            eps.append(res.metrics)
            if out:
                res.write(out / c, f"{sc.name}-s{seed}")
        rows.append(aggregate(c, eps))
    table = format_table(rows)
    sys.stdout.write(table)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.tsv").write_text(table)
    return EXIT_FAILED if errors else EXIT_OK


def cmd_plot(args) -> int:
    tel = read_telemetry(args.telemetry)
    out = args.output or str(Path(args.telemetry).with_suffix("").with_suffix(".svg"))
    print(f"wrote {plot_telemetry(tel, out)}")
    return EXIT_OK


def cmd_graph(args) -> int:
    sc = resolve_scenario(args.scenario)
    radius = max(r.kinodynamics.robot_radius for r in sc.robots)
    sys.stdout.write(build_nav_graph(sc.load_map(), sc.resolution, radius).dump())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bilevel-nav", description="Auction-scheduled multi-robot navigation simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one episode")
    r.add_argument("scenario", help="scenario JSON path or packaged name (doorway, intersection)")
    r.add_argument("--seed", type=int, default=0)
    mode = r.add_mutually_exclusive_group()
    mode.add_argument("--no-schedule", action="store_true", help="disable the auction (ablation)")
    mode.add_argument("--alt-scaling", action="store_true", help="use the alternate velocity scaling")
    r.add_argument("--baseline", choices=("bilevel", "social-forces"))
    r.add_argument("--out", default="runs", help="output directory (default: runs)")
    r.add_argument("--plot", action="store_true", help="also write an SVG trajectory plot")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="run seeds x cells and print a metrics table")
    b.add_argument("scenario")
    b.add_argument("--seeds", default="0-24", help="e.g. 0-24 or 1,4,7 (default 0-24)")
    b.add_argument("--cells", default="auction", help=f"comma list from {', '.join(CELLS)}")
    b.add_argument("--out", help="write per-episode files and summary.tsv here")
    b.add_argument("--jobs", type=int, default=1, help="worker threads")
    b.set_defaults(func=cmd_batch)

    pl = sub.add_parser("plot", help="render a telemetry file to SVG")
    pl.add_argument("telemetry")
    pl.add_argument("-o", "--output")
    pl.set_defaults(func=cmd_plot)

    g = sub.add_parser("graph", help="dump the navigation graph as text")
    g.add_argument("scenario")
    g.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, MapFormatError, TelemetryError, UsageError, PlanningError, OSError) as exc:
        print(f"bilevel-nav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
