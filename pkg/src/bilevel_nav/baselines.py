"""Social-forces comparison controller.

Attraction relaxes the velocity toward ``desired_speed`` along the goal
direction; every other robot and the nearest wall push back with an
exponential falloff. The resulting planar velocity is mapped onto the
unicycle and clamped to the same limits the bi-level planner obeys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import VectorMap, point_segment_distances
from .local_planner import Kinodynamics, VelocityCommand
from .state import Observation


@dataclass(frozen=True)
class SocialForceParams:
    goal_gain: float = 2.0  # 1/s, inverse of the 0.5 s relaxation time
    agent_strength: float = 2.1  # m/s^2
    agent_range: float = 0.3  # m
    wall_strength: float = 10.0  # m/s^2
    wall_range: float = 0.2  # m
    desired_speed: float = 1.34  # m/s

    def __post_init__(self):
        for name in ("goal_gain", "agent_strength", "wall_strength", "desired_speed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("agent_range", "wall_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


def social_force(obs: Observation, goal, params: SocialForceParams, m: VectorMap | None = None) -> np.ndarray:
    """Net planar force (m/s^2) on the observing robot."""
    me = obs.own
    p = np.array([me.x, me.y])
    vel = me.v * np.array([math.cos(me.theta), math.sin(me.theta)])
    to_goal = np.asarray(goal, dtype=float) - p
    dist = math.hypot(*to_goal)
    e = to_goal / dist if dist > 1e-9 else np.zeros(2)
    force = params.goal_gain * (params.desired_speed * e - vel)

    for nb in obs.neighbors:
        d = p - np.array([nb.x, nb.y])
        r = math.hypot(*d)
        if r < 1e-12:
            continue
        gap = r - me.radius - nb.radius
        force += params.agent_strength * math.exp(-gap / params.agent_range) * d / r

    if m is not None and len(m.segments):
        dists = point_segment_distances(p, m.segments)[0]
        i = int(np.argmin(dists))
        a, b = m.segments[i]
        ab = b - a
        t = min(1.0, max(0.0, float((p - a) @ ab) / float(ab @ ab)))
        d = p - (a + t * ab)
        r = math.hypot(*d)
        if r > 1e-12:
            gap = r - me.radius
            force += params.wall_strength * math.exp(-gap / params.wall_range) * d / r
    return force


def social_force_step(
    obs: Observation,
    goal,
    params: SocialForceParams,
    kin: Kinodynamics,
    dt: float,
    m: VectorMap | None = None,
) -> VelocityCommand:
    me = obs.own
    vel = me.v * np.array([math.cos(me.theta), math.sin(me.theta)])
    desired = vel + social_force(obs, goal, params, m) * dt
    speed = math.hypot(*desired)
    if speed < 1e-9:
        heading_err = 0.0
    else:
        heading_err = math.atan2(desired[1], desired[0]) - me.theta
        heading_err = (heading_err + math.pi) % (2 * math.pi) - math.pi
    omega = max(-kin.omega_max, min(kin.omega_max, heading_err / dt))
    v_want = speed * max(0.0, math.cos(heading_err))
    dv = kin.a_max * dt
    v = max(0.0, me.v - dv, min(v_want, me.v + dv, kin.v_max))
    v = min(v, max(kin.v_max, me.v - dv))
    return VelocityCommand(float(v), float(omega))
