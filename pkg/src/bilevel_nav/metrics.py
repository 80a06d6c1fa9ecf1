"""Episode outcome measures: deadlock rule, velocity-change and stop counts, flow rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HUMAN_FLOW_RATE = 4.0  # robots per (meter of gap * second), human doorway reference


def detect_deadlock(progress: Sequence[float], window: int = 100, threshold: float = 0.5) -> bool:
    """True when the summed displacement of the unfinished robots over the
    last ``window`` ticks is below ``threshold`` meters.

    ``progress[t]`` is the total distance the unfinished robots moved on tick t.
    """
    if len(progress) < window:
        return False
    # fsum: a borderline total must not drift below the threshold by rounding
    return math.fsum(progress[-window:]) < threshold


def count_delta_v(velocities: Sequence[float], threshold: float = 0.05) -> int:
    v = np.asarray(velocities, dtype=float)
    if len(v) < 2:
        return 0
    return int(np.count_nonzero(np.abs(np.diff(v)) > threshold))


def count_stop_time(velocities: Sequence[float], v_eps: float = 0.01) -> int:
    """Ticks spent (nearly) still; pass only the ticks before goal arrival."""
    return int(np.count_nonzero(np.abs(np.asarray(velocities, dtype=float)) < v_eps))


def compute_flow_rate(n_robots: int, gap_width: float, makespan: float) -> float:
    """N / (z T)."""
    if not (gap_width > 0 and makespan > 0):
        raise ValueError("gap width and makespan must be positive")
    return n_robots / (gap_width * makespan)


@dataclass
class EpisodeMetrics:
    robot_ids: list[int]
    reached: dict[int, bool]
    goal_times: dict[int, float | None]  # seconds
    collisions: int
    goal_adjacent_collisions: int
    wall_collisions: int
    deadlock: bool
    timeout: bool
    ticks: int
    stop_ticks: dict[int, int]
    delta_v: dict[int, int]
    gap_width: float
    turns: dict[int, int] = field(default_factory=dict)  # initial sigma per robot
    zone_entries: dict[str, dict[int, int]] = field(default_factory=dict)  # zone -> robot -> tick
    zone_exits: dict[str, dict[int, int]] = field(default_factory=dict)  # zone -> robot -> last exit tick
    dt: float = 1.0 / 40.0
    feasibility_violations: int = 0

    @property
    def success(self) -> bool:
        return all(self.reached.values()) and self.collisions == 0 and self.wall_collisions == 0

    @property
    def completion_time(self) -> float | None:
        """Time of the last goal arrival."""
        if not all(self.reached.values()):
            return None
        return max(self.goal_times.values())

    @property
    def makespan(self) -> float | None:
        """Length of the mini-game: first conflict-zone entry to last exit.

        Falls back to the completion time when no robot used a zone.
        """
        if not all(self.reached.values()):
            return None
        entries = [t for e in self.zone_entries.values() for t in e.values()]
        exits = [t for e in self.zone_exits.values() for t in e.values()]
        if not entries or not exits:
            return self.completion_time
        return (max(exits) - min(entries)) * self.dt

    @property
    def flow_rate(self) -> float | None:
        if not self.success or not self.makespan:
            return None
        return compute_flow_rate(len(self.robot_ids), self.gap_width, self.makespan)

    @property
    def avg_delta_v(self) -> float:
        return float(np.mean(list(self.delta_v.values())))

    @property
    def avg_stop_time(self) -> float:
        return float(np.mean(list(self.stop_ticks.values())))

    @property
    def outcome(self) -> str:
        if self.success:
            return "success"
        if self.collisions or self.wall_collisions:
            return "collision"
        if self.deadlock:
            return "deadlock"
        if self.timeout:
            return "timeout"
        return "failure"

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "success": self.success,
            "collisions": self.collisions,
            "goal_adjacent_collisions": self.goal_adjacent_collisions,
            "wall_collisions": self.wall_collisions,
            "deadlock": self.deadlock,
            "timeout": self.timeout,
            "ticks": self.ticks,
            "makespan": self.makespan,
            "completion_time": self.completion_time,
            "flow_rate": self.flow_rate,
            "avg_stop_time": self.avg_stop_time,
            "avg_delta_v": self.avg_delta_v,
            "goal_times": {str(k): v for k, v in sorted(self.goal_times.items())},
            "turns": {str(k): v for k, v in sorted(self.turns.items())},
            "feasibility_violations": self.feasibility_violations,
        }


TABLE_COLUMNS = (
    "cell",
    "episodes",
    "success_rate",
    "collision_rate",
    "stop_time",
    "avg_delta_v",
    "makespan",
    "flow_rate",
)


def aggregate(cell: str, episodes: Sequence[EpisodeMetrics]) -> dict:
    """Table row: means over episodes. Makespan and flow rate average the
    successful episodes only (None when there are none)."""
    n = len(episodes)
    ok = [e for e in episodes if e.success]
    return {
        "cell": cell,
        "episodes": n,
        "success_rate": sum(e.success for e in episodes) / n if n else None,
        "collision_rate": float(np.mean([e.collisions for e in episodes])) if n else None,
        "stop_time": float(np.mean([e.avg_stop_time for e in episodes])) if n else None,
        "avg_delta_v": float(np.mean([e.avg_delta_v for e in episodes])) if n else None,
        "makespan": float(np.mean([e.makespan for e in ok])) if ok else None,
        "flow_rate": float(np.mean([e.flow_rate for e in ok])) if ok else None,
    }


def format_table(rows: Sequence[dict]) -> str:
    """Tab-separated table with a header line; missing values print as ``-``."""

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    lines = ["\t".join(TABLE_COLUMNS)]
    lines += ["\t".join(fmt(r.get(c)) for c in TABLE_COLUMNS) for r in rows]
    return "\n".join(lines) + "\n"
