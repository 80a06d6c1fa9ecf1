"""Arc-sampling local planner with priority-scaled speed limits.

Per tick a robot picks a pure-pursuit target on its global path, fans out
constant-curvature arcs, truncates each arc at the first obstacle contact,
scores the survivors with a weighted feature sum, and runs a 1-D
cruise/accelerate/brake program for the linear speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import Disc, VectorMap, point_segment_distances
from .global_planner import GlobalPath
from .state import Observation


class PlannerError(ValueError):
    pass


@dataclass(frozen=True)
class Kinodynamics:
    v_max: float  # m/s
    a_max: float  # m/s^2
    omega_max: float  # rad/s
    curvature_max: float  # 1/m
    robot_radius: float  # m

    def __post_init__(self):
        for name in ("v_max", "a_max", "omega_max", "curvature_max", "robot_radius"):
            if not getattr(self, name) > 0:
                raise PlannerError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class FeatureWeights:
    clearance: float = 1.0
    progress: float = 2.0
    length: float = 0.5
    goal: float = 1.0

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.any(w > 0):
            raise PlannerError("feature weights must be >= 0 with at least one positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.clearance, self.progress, self.length, self.goal], dtype=float)

    def scaled(self, c: float) -> "FeatureWeights":
        return FeatureWeights(*(c * self.as_array()))


@dataclass(frozen=True)
class PlannerConfig:
    n_arcs: int = 41
    horizon: float = 2.0  # m
    spacing: float = 0.05  # m between arc samples
    lookahead: float = 1.0  # m
    eps: float = 1e-3  # m, keeps the clearance feature finite
    clearance_cap: float = math.inf  # m, clearances beyond this score the same
    safety: float = 0.01  # m, soft band outside the footprint; entered only while moving away
    predict: float = 0.0  # s of constant-velocity travel added to a neighbor's braking sweep
    dt: float = 1.0 / 40.0  # s


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    omega: float


@dataclass(frozen=True, eq=False)
class ArcTrajectory:
    """Constant-curvature path from ``start`` (x, y, theta); length >= 0."""

    start: tuple[float, float, float]
    curvature: float
    arc_length: float
    spacing: float = 0.05

    @property
    def s(self) -> np.ndarray:
        return arc_stations(self.arc_length, self.spacing)

    @property
    def poses(self) -> np.ndarray:
        return arc_poses(self.start, self.curvature, self.s)

    @property
    def endpoint(self) -> np.ndarray:
        return arc_poses(self.start, self.curvature, np.array([self.arc_length]))[0]

    def with_length(self, length: float) -> "ArcTrajectory":
        return replace(self, arc_length=max(0.0, float(length)))


def arc_stations(length: float, spacing: float) -> np.ndarray:
    n = int(math.floor(length / spacing + 1e-9))
    s = spacing * np.arange(n + 1)
    if length - s[-1] > 1e-9:
        s = np.append(s, length)
    return s


def arc_poses(start, curvature, s) -> np.ndarray:
    """Closed-form unicycle poses at arc lengths ``s``; broadcasts over curvature.

    ``curvature`` may be a scalar or an ``(n,)`` array, giving ``(len(s), 3)``
    or ``(n, len(s), 3)``.
    """
    x0, y0, th0 = start
    k = np.asarray(curvature, dtype=float)[..., None]
    s = np.asarray(s, dtype=float)
    dth = k * s
    th = th0 + dth
    # sin(k s)/k and (1 - cos(k s))/k, series form near k = 0
    small = np.abs(dth) < 1e-6
    safe_k = np.where(k == 0, 1.0, k)
    a = np.where(small, s * (1 - dth**2 / 6), np.sin(dth) / safe_k)
    b = np.where(small, s * dth / 2, (1 - np.cos(dth)) / safe_k)
    c, sn = math.cos(th0), math.sin(th0)
    x = x0 + a * c - b * sn
    y = y0 + a * sn + b * c
    return np.stack([x, y, th], axis=-1)


def integrate_unicycle(pose, v: float, omega: float, dt: float) -> tuple[float, float, float]:
    """Exact constant-(v, omega) integration over one tick."""
    if v == 0.0:
        return (pose[0], pose[1], pose[2] + omega * dt)
    x, y, th = arc_poses(pose, omega / v, np.array([v * dt]))[0]
    return (float(x), float(y), float(th))


def scale_kinodynamics(base: Kinodynamics, turn: int) -> Kinodynamics:
    """Top speed divided by the turn number; turn 1 is unchanged."""
    if turn < 1:
        raise PlannerError(f"turn must be >= 1, got {turn}")
    return replace(base, v_max=base.v_max / turn)


def alt_scale_kinodynamics(base: Kinodynamics, turn: int) -> Kinodynamics:
    """Ablation scaling ``v_max / (1 - turn / (5 v_max))``."""
    if turn < 1:
        raise PlannerError(f"turn must be >= 1, got {turn}")
    denom = 1.0 - turn / (5.0 * base.v_max)
    if denom <= 0:
        raise PlannerError(f"invalid alt scaling: 1 - {turn}/(5*{base.v_max}) <= 0")
    return replace(base, v_max=base.v_max / denom)


def pure_pursuit_target(position, path, lookahead: float) -> np.ndarray:
    """Farthest-along point of the path polyline at ``lookahead`` from ``position``.

    Falls back to the nearest path point when the circle misses the path,
    and returns the goal once it is within ``lookahead``.
    """
    if not lookahead > 0:
        raise PlannerError("lookahead must be positive")
    wp = np.asarray(path.waypoints if isinstance(path, GlobalPath) else path, dtype=float).reshape(-1, 2)
    if len(wp) == 0:
        raise PlannerError("empty path")
    p = np.asarray(position, dtype=float)
    if np.hypot(*(wp[-1] - p)) <= lookahead:
        return wp[-1].copy()

    a, b = wp[:-1], wp[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    keep = dd > 0
    if not keep.any():
        return wp[0].copy()
    a, d, dd = a[keep], d[keep], dd[keep]
    f = a - p
    fd = np.einsum("ij,ij->i", f, d)
    # nearest point, for the fallback
    t_near = np.clip(-fd / dd, 0.0, 1.0)
    near = a + t_near[:, None] * d
    nearest = near[int(np.argmin(np.hypot(near[:, 0] - p[0], near[:, 1] - p[1])))]

    bq = 2 * fd
    cq = np.einsum("ij,ij->i", f, f) - lookahead**2
    disc = bq * bq - 4 * dd * cq
    root = np.sqrt(np.maximum(disc, 0.0))
    ts = np.stack([(-bq + root) / (2 * dd), (-bq - root) / (2 * dd)], axis=1)
    ok = (disc[:, None] >= 0) & (ts >= 0.0) & (ts <= 1.0)
    if ok.any():
        # farthest along: largest segment index, then largest parameter
        key = np.where(ok, np.arange(len(a))[:, None] + ts, -np.inf)
        i, j = np.unravel_index(int(np.argmax(key)), key.shape)
        return a[i] + ts[i, j] * d[i]
    return nearest.copy()


def sample_arcs(pose, kin: Kinodynamics, n: int = 41, horizon: float = 2.0, spacing: float = 0.05) -> list[ArcTrajectory]:
    if n < 3 or n % 2 == 0:
        raise PlannerError("arc count must be odd and >= 3")
    if not horizon > 0:
        raise PlannerError("horizon must be positive")
    ks = np.linspace(-kin.curvature_max, kin.curvature_max, n)
    ks[n // 2] = 0.0
    start = tuple(float(v) for v in pose)
    return [ArcTrajectory(start, float(k), float(horizon), spacing) for k in ks]


def _others_array(others: Sequence[Disc]) -> np.ndarray:
    if not others:
        return np.zeros((0, 3))
    return np.array([[d.center[0], d.center[1], d.radius] for d in others], dtype=float)


def _sample_distances(xy: np.ndarray, m: VectorMap, others: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wall distance and other-disc surface distance for points ``(..., 2)``."""
    shape = xy.shape[:-1]
    flat = xy.reshape(-1, 2)
    wall = m.clearance(flat).reshape(shape)
    if len(others):
        diff = flat[:, None, :] - others[None, :, :2]
        surf = (np.sqrt(np.einsum("pkj,pkj->pk", diff, diff)) - others[None, :, 2]).min(axis=1)
        other = surf.reshape(shape)
    else:
        other = np.full(shape, np.inf)
    return wall, other


def _closing(d: np.ndarray, band: float) -> np.ndarray:
    """Inside ``band`` and closer than at the arc start (sample 0)."""
    return (d < band) & (d < d[..., :1] - 1e-12)


def _blocked(
    wall: np.ndarray, other: np.ndarray, radius: float, safety: float = 0.0, swept: np.ndarray | None = None
) -> np.ndarray:
    """Samples inside the footprint, or inside the soft zones while closing in.

    The soft zones are the ``safety`` band around walls and robots and the
    optional ``swept`` distances to where neighbors are heading.
    """
    hard = (wall < radius) | (other < radius)
    if safety > 0:
        hard = hard | _closing(wall, radius + safety) | _closing(other, radius + safety)
    if swept is not None:
        hard = hard | _closing(swept, radius + safety)
    return hard


def _free_lengths(blocked: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Arc length up to the last sample before the first blocked one."""
    any_blocked = blocked.any(axis=-1)
    first = np.argmax(blocked, axis=-1)
    before = np.where(first > 0, s[np.maximum(first - 1, 0)], 0.0)
    return np.where(any_blocked, before, s[-1])


def _swept_distances(xy: np.ndarray, obs: Observation, horizon: float, a_max: float) -> np.ndarray | None:
    """Surface distance to the stretch each higher-priority neighbor covers
    if it holds its velocity for ``horizon`` seconds and then brakes at ``a_max``."""
    movers = [nb for nb in obs.neighbors if nb.v > 0 and nb.id in obs.ahead]
    if not movers:
        return None
    reach = [nb.v * horizon + nb.v * nb.v / (2 * a_max) for nb in movers]
    segs = np.array(
        [
            [[nb.x, nb.y], [nb.x + d * math.cos(nb.theta), nb.y + d * math.sin(nb.theta)]]
            for nb, d in zip(movers, reach)
        ]
    )
    radii = np.array([nb.radius for nb in movers])
    shape = xy.shape[:-1]
    d = point_segment_distances(xy.reshape(-1, 2), segs) - radii[None, :]
    return d.min(axis=1).reshape(shape)


def clip_arc(
    arc: ArcTrajectory, m: VectorMap, others: Sequence[Disc] = (), radius: float = 0.2, margin: float = 0.0
) -> ArcTrajectory:
    """Cut the arc at its last sample clear of walls (by ``radius``) and of
    other robots (by ``radius`` plus theirs), then back off ``margin``.

    Pass ``margin = v**2 / (2 a_max)`` to keep a braking reserve.
    """
    s = arc.s
    xy = arc_poses(arc.start, arc.curvature, s)[:, :2]
    wall, other = _sample_distances(xy, m, _others_array(others))
    free = float(_free_lengths(_blocked(wall, other, radius), s))
    return arc.with_length(max(0.0, free - margin))


def _feature_matrix(
    lengths: np.ndarray,
    curvatures: np.ndarray,
    start,
    s: np.ndarray,
    clearance: np.ndarray,
    target,
    goal,
    eps: float,
    cap: float,
) -> np.ndarray:
    """Rows of [1/(clearance+eps), dist-to-target, -length, dist-to-goal]."""
    in_arc = s[None, :] <= lengths[:, None] + 1e-12
    min_clear = np.where(in_arc, clearance, np.inf).min(axis=1)
    min_clear = np.clip(min_clear, 0.0, cap)
    ends = arc_poses(start, curvatures, lengths[:, None])[:, 0, :2]
    f_clear = 1.0 / (min_clear + eps)
    f_target = np.hypot(*(ends - np.asarray(target, dtype=float)).T)
    f_goal = np.hypot(*(ends - np.asarray(goal, dtype=float)).T)
    return np.stack([f_clear, f_target, -lengths, f_goal], axis=1)


def evaluate_cost(
    arc: ArcTrajectory,
    target,
    weights: FeatureWeights,
    m: VectorMap,
    goal=None,
    others: Sequence[Disc] = (),
    radius: float = 0.0,
    eps: float = 1e-3,
    clearance_cap: float = math.inf,
) -> float:
    """Weighted feature cost of an arc; lower is better.

    Clearance is measured from the robot's edge (``radius``) to the nearest
    wall or other robot over the arc samples. ``goal`` defaults to
    ``target``.
    """
    s = arc.s
    xy = arc_poses(arc.start, arc.curvature, s)[:, :2]
    wall, other = _sample_distances(xy, m, _others_array(others))
    clearance = np.minimum(wall, other) - radius
    feats = _feature_matrix(
        np.array([arc.arc_length]),
        np.array([arc.curvature]),
        arc.start,
        s,
        clearance[None, :],
        target,
        target if goal is None else goal,
        eps,
        clearance_cap,
    )
    return float(feats[0] @ weights.as_array())


def plan_velocity(current_v: float, kin: Kinodynamics, dist_to_stop: float, dt: float) -> float:
    """Cruise, accelerate or brake; result lies in [0, v_max] and within a_max*dt of current_v."""
    if not dt > 0:
        raise PlannerError("dt must be positive")
    a = kin.a_max
    dv = a * dt
    v = max(0.0, current_v)

    def stops_in_time(v_next):
        # distance covered this tick plus braking distance afterwards
        return v_next * dt + v_next * v_next / (2 * a) < dist_to_stop

    if v * v / (2 * a) >= dist_to_stop:
        target = v - dv
    elif v > kin.v_max:
        target = max(v - dv, kin.v_max)
    elif v < kin.v_max and stops_in_time(min(v + dv, kin.v_max)):
        target = min(v + dv, kin.v_max)
    elif stops_in_time(v):
        target = v
    else:
        target = v - dv
    return float(min(max(target, 0.0, v - dv), v + dv, max(kin.v_max, v - dv)))


@dataclass(frozen=True, eq=False)
class PlanResult:
    command: VelocityCommand
    arc: ArcTrajectory
    target: np.ndarray
    cost: float


def plan_step(
    obs: Observation,
    path: GlobalPath,
    kin_sigma: Kinodynamics,
    weights: FeatureWeights,
    config: PlannerConfig,
    m: VectorMap,
) -> PlanResult:
    """One planning cycle from an observation snapshot.

    Target by pure pursuit, fan out arcs, clip them against walls and the
    observed robots, take the cheapest, then pick the speed. When every arc
    is blocked the robot brakes at full deceleration along the roomiest arc.
    """
    me = obs.own
    pose = (me.x, me.y, me.theta)
    pos = np.array([me.x, me.y])
    goal = np.asarray(me.goal, dtype=float)
    dt = config.dt
    a = kin_sigma.a_max
    v = max(0.0, me.v)

    target = pure_pursuit_target(pos, path, config.lookahead)
    final = bool(np.hypot(*(goal - pos)) <= config.lookahead)
    if final:
        target = goal

    n = config.n_arcs
    ks = np.linspace(-kin_sigma.curvature_max, kin_sigma.curvature_max, n)
    ks[n // 2] = 0.0
    s = arc_stations(config.horizon, config.spacing)
    xy = arc_poses(pose, ks, s)[..., :2]
    others = np.array(
        [[nb.x, nb.y, nb.radius] for nb in obs.neighbors], dtype=float
    ).reshape(-1, 3)
    wall, other = _sample_distances(xy, m, others)
    r = kin_sigma.robot_radius
    free = _free_lengths(_blocked(wall, other, r, config.safety), s)
    # higher-priority robots limit how far we may go, not where we may head
    swept = _swept_distances(xy, obs, config.predict, a)
    room = free if swept is None else _free_lengths(_blocked(wall, other, r, config.safety, swept), s)
    margin = v * v / (2 * a)
    # no more than a quarter turn is worth scoring
    turn_cap = np.where(ks == 0, np.inf, (math.pi / 2) / np.where(ks == 0, 1.0, np.abs(ks)))
    lengths = np.minimum(np.maximum(0.0, free - margin), turn_cap)
    scored = lengths
    if final:
        # on the final approach, score each arc only up to its closest approach to the goal
        to_goal = np.hypot(xy[..., 0] - goal[0], xy[..., 1] - goal[1])
        to_goal = np.where(s[None, :] <= lengths[:, None] + 1e-12, to_goal, np.inf)
        scored = np.minimum(lengths, s[np.argmin(to_goal, axis=1)])

    v_floor = max(0.0, v - a * dt)
    turnable = np.abs(ks) * v_floor <= kin_sigma.omega_max + 1e-12
    ok = turnable & (lengths > 0)
    if not ok.any():
        # brake along the arc with the most room from walls and robots
        room = np.where(turnable, _free_lengths(_blocked(wall, other, r, config.safety), s), -1.0)
        j = int(np.lexsort((np.abs(ks), -room))[0])
        arc = ArcTrajectory(pose, float(ks[j]), float(max(room[j], 0.0)), config.spacing)
        return PlanResult(VelocityCommand(v_floor, v_floor * float(ks[j])), arc, target, math.inf)

    idx = np.flatnonzero(ok)
    feats = _feature_matrix(
        scored[idx], ks[idx], pose, s, (np.minimum(wall, other) - r)[idx], target, goal, config.eps, config.clearance_cap
    )
    costs = feats @ weights.as_array()
    # ties go to the gentlest curvature, then the lower index
    order = np.lexsort((idx, np.abs(ks[idx]), costs))
    best = order[0]
    j = idx[best]
    k = float(ks[j])

    dist_to_stop = min(float(room[j]), float(np.hypot(*(goal - pos))))
    cap = kin_sigma.v_max if k == 0.0 else min(kin_sigma.v_max, kin_sigma.omega_max / abs(k))
    v_new = plan_velocity(v, replace(kin_sigma, v_max=cap), dist_to_stop, dt)
    arc = ArcTrajectory(pose, k, float(scored[j]), config.spacing)
    return PlanResult(VelocityCommand(v_new, v_new * k), arc, target, float(costs[best]))
