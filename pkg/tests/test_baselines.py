import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilevel_nav.baselines import SocialForceParams, social_force, social_force_step
from bilevel_nav.geometry import load_map
from bilevel_nav.local_planner import Kinodynamics, integrate_unicycle
from bilevel_nav.scenario import SCENARIO_DIR
from bilevel_nav.state import NeighborInfo, Observation, RobotState

KIN = Kinodynamics(v_max=1.5, a_max=1.8, omega_max=4.0, curvature_max=4.0, robot_radius=0.2)
DT = 0.025
P = SocialForceParams()


def robot(i, x, y, th, v=0.0, goal=(0.0, 0.0)):
    return RobotState(i, x, y, th, (x, y), goal, 0.2, 1.5, v=v)


def public(r):
    return NeighborInfo(r.id, r.x, r.y, r.theta, r.v, r.omega, r.radius, r.v_max, r.done)


def obs_of(me, *others):
    return Observation(me, tuple(public(o) for o in others))


def reference_force(me, goal, others, p=P):
    """Direct evaluation of the force law for free space."""
    fx = p.goal_gain * (p.desired_speed * (goal[0] - me.x) / math.dist(goal, (me.x, me.y)) - me.v * math.cos(me.theta))
    fy = p.goal_gain * (p.desired_speed * (goal[1] - me.y) / math.dist(goal, (me.x, me.y)) - me.v * math.sin(me.theta))
    for o in others:
        r = math.dist((me.x, me.y), (o.x, o.y))
        mag = p.agent_strength * math.exp(-(r - me.radius - o.radius) / p.agent_range)
        fx += mag * (me.x - o.x) / r
        fy += mag * (me.y - o.y) / r
    return np.array([fx, fy])


def test_params_validation():
    with pytest.raises(ValueError):
        SocialForceParams(goal_gain=-1)
    with pytest.raises(ValueError):
        SocialForceParams(agent_range=0)


def test_lone_robot_at_rest_heads_for_goal():
    me = robot(0, 0, 0, 0.0)
    f = social_force(obs_of(me), (2.0, 0.0), P)
    assert f[0] > 0 and f[1] == pytest.approx(0.0)
    cmd = social_force_step(obs_of(me), (2.0, 0.0), P, KIN, DT)
    assert cmd.v > 0.0 and cmd.omega == pytest.approx(0.0)


def test_force_matches_reference_law():
    rng = np.random.default_rng(5)
    for _ in range(200):
        me = robot(0, *rng.uniform(-2, 2, 2), rng.uniform(-math.pi, math.pi), rng.uniform(0, 1.5))
        others = [robot(i + 1, *rng.uniform(-2, 2, 2), 0.0) for i in range(3)]
        goal = tuple(rng.uniform(-2, 2, 2))
        np.testing.assert_allclose(social_force(obs_of(me, *others), goal, P), reference_force(me, goal, others), rtol=1e-12, atol=1e-12)


def test_mirror_symmetry_about_doorway_axis():
    m = load_map(SCENARIO_DIR / "doorway.map")
    a = robot(0, -0.6, -0.7, 0.9, 0.8)
    b = robot(1, 0.6, -0.7, math.pi - 0.9, 0.8)
    fa = social_force(obs_of(a, b), (-0.6, 0.9), P, m)
    fb = social_force(obs_of(b, a), (0.6, 0.9), P, m)
    np.testing.assert_allclose(fb, [-fa[0], fa[1]], atol=1e-12)


pose = st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-math.pi, math.pi), st.floats(0, 1.5))


@given(pose, pose, st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_swapping_states_swaps_forces(pa, pb, ga, gb):
    if math.dist(pa[:2], pb[:2]) < 1e-3 or math.dist(pa[:2], ga) < 1e-3 or math.dist(pb[:2], gb) < 1e-3:
        return
    a, b = robot(0, *pa[:3], pa[3]), robot(1, *pb[:3], pb[3])
    fa = social_force(obs_of(a, b), ga, P)
    fb = social_force(obs_of(b, a), gb, P)
    a2, b2 = robot(0, *pb[:3], pb[3]), robot(1, *pa[:3], pa[3])
    np.testing.assert_array_equal(social_force(obs_of(a2, b2), gb, P), fb)
    np.testing.assert_array_equal(social_force(obs_of(b2, a2), ga, P), fa)


def rollout(states, goals, params, ticks, m=None):
    traj = {r.id: [] for r in states}
    cmds = {r.id: [] for r in states}
    for _ in range(ticks):
        out = {}
        for r in states:
            others = [o for o in states if o.id != r.id]
            out[r.id] = social_force_step(obs_of(r, *others), goals[r.id], params, KIN, DT, m)
        for r in states:
            c = out[r.id]
            r.x, r.y, r.theta = integrate_unicycle(r.pose, c.v, c.omega, DT)
            r.v, r.omega = c.v, c.omega
            traj[r.id].append((r.x, r.y))
            cmds[r.id].append(c)
    return {k: np.array(v) for k, v in traj.items()}, cmds


def test_zero_repulsion_pursues_goal_in_a_straight_line():
    params = SocialForceParams(agent_strength=0.0, wall_strength=0.0)
    a = robot(0, -1.5, -0.5, math.atan2(1.0, 3.0))
    b = robot(1, 1.5, -0.5, math.atan2(1.0, -3.0))  # crosses robot 0 but exerts no force
    traj, _ = rollout([a, b], {0: (1.5, 0.5), 1: (-1.5, 0.5)}, params, 60)
    line = np.array([3.0, 1.0]) / math.hypot(3.0, 1.0)
    rel = traj[0] - np.array([-1.5, -0.5])
    off_axis = rel[:, 0] * line[1] - rel[:, 1] * line[0]
    assert np.abs(off_axis).max() < 1e-9


def test_head_on_robots_deflect_sideways_and_slow_down():
    off = 0.1
    a = robot(0, -2.0, off, 0.0)
    b = robot(1, 2.0, -off, math.pi)
    traj, cmds = rollout([a, b], {0: (2.0, off), 1: (-2.0, -off)}, P, 200)
    gaps = np.hypot(*(traj[0] - traj[1]).T)
    k = int(np.argmin(gaps))
    # pushed apart sideways: lateral separation grew from its initial 2 * off
    assert traj[0][k, 1] - traj[1][k, 1] > 2 * off + 0.02
    assert np.abs(traj[0][:, 1] - off).max() > 0.1
    assert cmds[0][k].v < P.desired_speed and cmds[1][k].v < P.desired_speed


@given(pose, pose, st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_commands_respect_the_shared_limits(pa, pb, goal):
    if math.dist(pa[:2], pb[:2]) < 1e-3:
        return
    a, b = robot(0, *pa[:3], pa[3]), robot(1, *pb[:3], pb[3])
    strong = SocialForceParams(agent_strength=50.0, goal_gain=20.0, desired_speed=5.0)
    for params in (P, strong):
        c = social_force_step(obs_of(a, b), goal, params, KIN, DT)
        assert c.v >= 0.0
        assert abs(c.v - a.v) <= KIN.a_max * DT + 1e-12
        assert c.v <= max(KIN.v_max, a.v - KIN.a_max * DT) + 1e-12
        assert abs(c.omega) <= KIN.omega_max + 1e-12
