"""Scenario files: JSON documents describing one mini-game.

Schema (keys not listed are rejected)::

    {
      "name": str,
      "map": str,                     # map file, relative to this file
      "gap_width": float > 0,         # z in the flow rate N/(zT)
      "tick_rate": float > 0,         # Hz
      "episode_cap": int > 0,         # ticks
      "scheduling": "auction" | "none" | "enforced-alt-scaling",
      "baseline": "bilevel" | "social-forces",
      "seed": int,
      "zeta_max": float > 0,          # support of sampled zeta and proxy bids
      "engagement_radius": float > 0,
      "goal_tolerance": float > 0,
      "sensing_radius": float > 0 | null,   # null: everyone sees everyone
      "start_jitter": float >= 0,     # per-seed uniform start offset, meters
      "graph": {"resolution": float},
      "planner": {"n_arcs", "horizon", "spacing", "lookahead", "eps",
                  "clearance_cap", "safety", "predict",
                  "weights": {"clearance", "progress", "length", "goal"}},
      "metrics": {"delta_v_threshold", "stop_v_eps", "deadlock_window",
                  "deadlock_distance"},
      "social_forces": {"goal_gain", "agent_strength", "agent_range",
                        "wall_strength", "wall_range", "desired_speed"},
      "kinodynamics": {"v_max", "a_max", "omega_max", "curvature_max",
                       "robot_radius"},          # default for every robot
      "robots": [{"id": int, "start": [x, y, theta], "goal": [x, y],
                  "zeta": float | null, "kinodynamics": {...}}]
    }

Everything except ``map`` and ``robots`` has a default. A ``null`` zeta is
drawn uniformly from ``(0, zeta_max]`` with the episode seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .baselines import SocialForceParams
from .geometry import VectorMap, load_map
from .local_planner import FeatureWeights, Kinodynamics, PlannerConfig

SCHEDULING_MODES = ("auction", "none", "enforced-alt-scaling")
BASELINE_MODES = ("bilevel", "social-forces")

SCENARIO_DIR = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsConfig:
    delta_v_threshold: float = 0.05  # m/s
    stop_v_eps: float = 0.01  # m/s
    deadlock_window: int = 100  # ticks
    deadlock_distance: float = 0.5  # m


@dataclass(frozen=True)
class RobotSpec:
    id: int
    start: tuple[float, float, float]
    goal: tuple[float, float]
    kinodynamics: Kinodynamics
    zeta: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    map_path: Path
    robots: tuple[RobotSpec, ...]
    gap_width: float = 0.5
    tick_rate: float = 40.0
    episode_cap: int = 4000
    scheduling: str = "auction"
    baseline: str = "bilevel"
    seed: int = 0
    zeta_max: float = 10.0
    engagement_radius: float = 3.0
    goal_tolerance: float = 0.15
    sensing_radius: float | None = None
    start_jitter: float = 0.0
    resolution: float = 0.1
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    weights: FeatureWeights = field(default_factory=FeatureWeights)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    social_forces: SocialForceParams = field(default_factory=SocialForceParams)
    source: Path | None = None

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate

    def load_map(self) -> VectorMap:
        return load_map(self.map_path)

    def with_overrides(self, **kw) -> "Scenario":
        sc = replace(self, **kw)
        sc.validate()
        return sc

    def validate(self):
        _check(self.tick_rate > 0, "tick_rate", "must be > 0")
        _check(self.episode_cap > 0, "episode_cap", "must be > 0")
        _check(self.gap_width > 0, "gap_width", "must be > 0")
        _check(self.scheduling in SCHEDULING_MODES, "scheduling", f"must be one of {SCHEDULING_MODES}")
        _check(self.baseline in BASELINE_MODES, "baseline", f"must be one of {BASELINE_MODES}")
        _check(len(self.robots) >= 1, "robots", "need at least one robot")
        ids = [r.id for r in self.robots]
        _check(len(set(ids)) == len(ids), "robots", "robot ids must be unique")
        _check(self.zeta_max > 0, "zeta_max", "must be > 0")
        _check(self.goal_tolerance > 0, "goal_tolerance", "must be > 0")
        _check(self.start_jitter >= 0, "start_jitter", "must be >= 0")
        _check(self.resolution > 0, "graph.resolution", "must be > 0")
        _check(self.sensing_radius is None or self.sensing_radius > 0, "sensing_radius", "must be > 0 or null")
        for i, r in enumerate(self.robots):
            _check(r.zeta is None or r.zeta > 0, f"robots[{i}].zeta", "must be > 0 or null")
        # planner and metrics dataclasses
        p = self.planner
        _check(p.n_arcs >= 3 and p.n_arcs % 2 == 1, "planner.n_arcs", "must be odd and >= 3")
        for name in ("horizon", "spacing", "lookahead", "eps", "clearance_cap"):
            _check(getattr(p, name) > 0, f"planner.{name}", "must be > 0")
        for name in ("safety", "predict"):
            _check(getattr(p, name) >= 0, f"planner.{name}", "must be >= 0")
        mc = self.metrics
        _check(mc.deadlock_window >= 1, "metrics.deadlock_window", "must be >= 1")
        for name in ("delta_v_threshold", "stop_v_eps", "deadlock_distance"):
            _check(getattr(mc, name) >= 0, f"metrics.{name}", "must be >= 0")

    def to_dict(self) -> dict:
        """JSON-ready dict; ``map`` is stored as an absolute path."""
        d = {
            "name": self.name,
            "map": str(self.map_path),
            "gap_width": self.gap_width,
            "tick_rate": self.tick_rate,
            "episode_cap": self.episode_cap,
            "scheduling": self.scheduling,
            "baseline": self.baseline,
            "seed": self.seed,
            "zeta_max": self.zeta_max,
            "engagement_radius": self.engagement_radius,
            "goal_tolerance": self.goal_tolerance,
            "sensing_radius": self.sensing_radius,
            "start_jitter": self.start_jitter,
            "graph": {"resolution": self.resolution},
            "planner": {**{k: v for k, v in asdict(self.planner).items() if k != "dt"}, "weights": asdict(self.weights)},
            "metrics": asdict(self.metrics),
            "social_forces": asdict(self.social_forces),
            "robots": [
                {
                    "id": r.id,
                    "start": list(r.start),
                    "goal": list(r.goal),
                    "zeta": r.zeta,
                    "kinodynamics": asdict(r.kinodynamics),
                }
                for r in self.robots
            ],
        }
        if math.isinf(d["planner"]["clearance_cap"]):
            d["planner"]["clearance_cap"] = None
        return d


def _check(cond, where, message):
    if not cond:
        raise ScenarioError(f"{where}: {message}")


def _build(cls, data: Any, where: str, **fixed):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)} - set(fixed)
    unknown = set(data) - names
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{where}.{k}: expected a number, got {v!r}")
        kw[k] = v
    try:
        return cls(**kw, **fixed)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _number(data, key, where, default=None, kind=float):
    if key not in data:
        if default is None:
            raise ScenarioError(f"{where}{key}: required field missing")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}{key}: expected a number, got {v!r}")
    if kind is int and v != int(v):
        raise ScenarioError(f"{where}{key}: expected an integer, got {v!r}")
    return kind(v)


def _point(v, n, where):
    if not (isinstance(v, list) and len(v) == n and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
        raise ScenarioError(f"{where}: expected a list of {n} numbers, got {v!r}")
    return tuple(float(x) for x in v)


_TOP_KEYS = {
    "name", "map", "gap_width", "tick_rate", "episode_cap", "scheduling", "baseline", "seed",
    "zeta_max", "engagement_radius", "goal_tolerance", "sensing_radius", "start_jitter",
    "graph", "planner", "metrics", "social_forces", "kinodynamics", "robots",
}


def scenario_from_dict(data: dict, base_dir: Path | str = ".", source: Path | None = None) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"scenario: unknown field(s) {sorted(unknown)}")
    if "map" not in data or not isinstance(data["map"], str):
        raise ScenarioError("map: required string field missing")
    map_path = (Path(base_dir) / data["map"]).resolve()
    if not map_path.exists():
        raise ScenarioError(f"map: file not found: {map_path}")

    default_kin = data.get("kinodynamics")
    robots_raw = data.get("robots")
    if not isinstance(robots_raw, list) or not robots_raw:
        raise ScenarioError("robots: expected a non-empty list")
    robots = []
    for i, r in enumerate(robots_raw):
        where = f"robots[{i}]"
        if not isinstance(r, dict):
            raise ScenarioError(f"{where}: expected an object")
        extra = set(r) - {"id", "start", "goal", "zeta", "kinodynamics"}
        if extra:
            raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
        kin_raw = {**(default_kin or {}), **(r.get("kinodynamics") or {})}
        kin = _build(Kinodynamics, kin_raw, f"{where}.kinodynamics")
        zeta = r.get("zeta")
        if zeta is not None:
            zeta = _number(r, "zeta", f"{where}.")
        robots.append(
            RobotSpec(
                id=_number(r, "id", f"{where}.", default=i, kind=int),
                start=_point(r.get("start"), 3, f"{where}.start"),
                goal=_point(r.get("goal"), 2, f"{where}.goal"),
                kinodynamics=kin,
                zeta=zeta,
            )
        )

    planner_raw = dict(data.get("planner") or {})
    weights = _build(FeatureWeights, planner_raw.pop("weights", None), "planner.weights")
    tick_rate = _number(data, "tick_rate", "", 40.0)
    if planner_raw.get("clearance_cap", 0) is None:
        planner_raw.pop("clearance_cap")
    for k in ("n_arcs",):
        if k in planner_raw:
            planner_raw[k] = _number(planner_raw, k, "planner.", kind=int)
    planner = _build(PlannerConfig, planner_raw, "planner", dt=1.0 / tick_rate if tick_rate > 0 else 1.0)
    metrics_raw = dict(data.get("metrics") or {})
    if "deadlock_window" in metrics_raw:
        metrics_raw["deadlock_window"] = _number(metrics_raw, "deadlock_window", "metrics.", kind=int)
    metrics = _build(MetricsConfig, metrics_raw, "metrics")
    sf = _build(SocialForceParams, data.get("social_forces"), "social_forces")
    graph = data.get("graph") or {}
    if not isinstance(graph, dict) or set(graph) - {"resolution"}:
        raise ScenarioError("graph: only 'resolution' is supported")

    sensing = data.get("sensing_radius")
    if sensing is not None:
        sensing = _number(data, "sensing_radius", "")
    scheduling = data.get("scheduling", "auction")
    baseline = data.get("baseline", "bilevel")
    sc = Scenario(
        name=str(data.get("name", map_path.stem)),
        map_path=map_path,
        robots=tuple(robots),
        gap_width=_number(data, "gap_width", "", 0.5),
        tick_rate=tick_rate,
        episode_cap=_number(data, "episode_cap", "", 4000, kind=int),
        scheduling=scheduling,
        baseline=baseline,
        seed=_number(data, "seed", "", 0, kind=int),
        zeta_max=_number(data, "zeta_max", "", 10.0),
        engagement_radius=_number(data, "engagement_radius", "", 3.0),
        goal_tolerance=_number(data, "goal_tolerance", "", 0.15),
        sensing_radius=sensing,
        start_jitter=_number(data, "start_jitter", "", 0.0),
        resolution=_number(graph, "resolution", "graph.", 0.1),
        planner=planner,
        weights=weights,
        metrics=metrics,
        social_forces=sf,
        source=source,
    )
    sc.validate()
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(data, path.parent, source=path)


def builtin_scenario(name: str) -> Scenario:
    """``doorway`` or ``intersection`` from the packaged scenario set."""
    return load_scenario(SCENARIO_DIR / f"{name}.json")
