import json
import math
from dataclasses import replace

import numpy as np
import pytest

from bilevel_nav.engine import EpisodeOver, Simulation, run_episode
from bilevel_nav.scenario import builtin_scenario, scenario_from_dict
from bilevel_nav.state import NeighborInfo, Observation, RobotState


def records(result, kind=None):
    recs = [json.loads(line) for line in result.telemetry]
    return [r for r in recs if kind is None or r["type"] == kind]


def doorway(seed=0, **kw):
    return builtin_scenario("doorway").with_overrides(seed=seed, **kw)


def with_robots(sc, robots):
    specs = []
    for i, (start, goal, zeta) in enumerate(robots):
        specs.append(replace(sc.robots[0], id=i, start=start, goal=goal, zeta=zeta))
    return sc.with_overrides(robots=tuple(specs), start_jitter=0.0)


def unicycle_closed_form(x, y, th, v, w, dt):
    if abs(w) < 1e-9:
        return x + v * dt * math.cos(th), y + v * dt * math.sin(th), th
    th1 = th + w * dt
    return x + v / w * (math.sin(th1) - math.sin(th)), y - v / w * (math.cos(th1) - math.cos(th)), th1


def angle_diff(a, b):
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


@pytest.fixture(scope="module")
def open_scenario(tmp_path_factory):
    d = tmp_path_factory.mktemp("open")
    (d / "open.map").write_text("bounds -2 -2 2 2\n-2 -2 2 -2\n2 -2 2 2\n2 2 -2 2\n-2 2 -2 -2\n")
    return scenario_from_dict(
        {
            "map": "open.map",
            "kinodynamics": {"v_max": 1.5, "a_max": 1.8, "omega_max": 4, "curvature_max": 4, "robot_radius": 0.2},
            "robots": [{"start": [-1.2, 0, 0], "goal": [1.2, 0]}],
        },
        d,
    )


def test_single_robot_open_map(open_scenario):
    res = run_episode(open_scenario)
    m = res.metrics
    assert m.success and m.collisions == 0
    # 2.4 m at no more than 1.5 m/s, plus the tolerance disc
    assert m.goal_times[0] >= (2.4 - 0.15) / 1.5
    assert m.goal_times[0] < 4.0
    assert not records(res, "auction")
    kinds = [r["type"] for r in records(res)]
    assert kinds[0] == "header" and kinds[-1] == "end"


def test_step_after_end_raises(open_scenario):
    sim = Simulation(open_scenario)
    sim.run()
    with pytest.raises(EpisodeOver):
        sim.step()


def test_doorway_auction_succeeds_and_turn_two_is_capped():
    res = run_episode(doorway(0))
    assert res.metrics.success
    (auc,) = records(res, "auction")
    assert sorted(auc["sigma"].values()) == [1, 2]
    second = int(next(r for r, j in auc["sigma"].items() if j == 2))
    # the second robot brakes into its halved limit and then never exceeds it
    prev = None
    for r in records(res, "state"):
        if r["robot"] != second:
            continue
        if r["turn"] == 2:
            bound = 0.75 if prev is None else max(0.75, prev - 1.8 / 40)
            assert r["v"] <= bound + 1e-9
        prev = r["v"]


def test_doorway_without_schedule_fails():
    m = run_episode(doorway(0, scheduling="none")).metrics
    assert not m.success
    assert m.outcome in ("collision", "deadlock")


def test_episodes_are_deterministic():
    a = run_episode(doorway(3))
    b = run_episode(doorway(3))
    assert a.telemetry == b.telemetry
    c = run_episode(doorway(4))
    assert a.telemetry != c.telemetry


def test_controllers_see_only_public_information():
    sc = doorway(2)
    sim = Simulation(sc)
    seen = []
    for ctl in sim.controllers.values():
        inner = ctl.act

        def spy(obs, inner=inner):
            seen.append(obs)
            return inner(obs)

        ctl.act = spy
    sim.run()
    assert seen
    for obs in seen:
        assert type(obs) is Observation and type(obs.own) is RobotState
        assert all(type(n) is NeighborInfo for n in obs.neighbors)
        for n in obs.neighbors:
            assert not any("zeta" in f for f in vars(n))
    # private values live only in the owning controller
    assert not any("zeta" in k for k in vars(sim))
    for ctl in sim.controllers.values():
        assert "_BilevelController__zeta" in vars(ctl)
    # and the published bids are the truthful ones
    (auc,) = [r for r in sim.records if r["type"] == "auction"]
    for rid, b in auc["bids"].items():
        assert b == vars(sim.controllers[int(rid)])["_BilevelController__zeta"]


def test_telemetry_follows_unicycle_dynamics():
    res = run_episode(doorway(1))
    header = records(res, "header")[0]
    pose = {r["id"]: tuple(r["start"]) for r in header["robots"]}
    dt = header["dt"]
    for r in records(res, "state"):
        x, y, th = unicycle_closed_form(*pose[r["robot"]], r["v"], r["omega"], dt)
        assert r["x"] == pytest.approx(x, abs=1e-9)
        assert r["y"] == pytest.approx(y, abs=1e-9)
        assert angle_diff(r["theta"], th) < 1e-9
        pose[r["robot"]] = (r["x"], r["y"], r["theta"])


def test_waiting_robot_accumulates_stop_time():
    # robot 1 starts beside the gap while the high-value robot 0 passes first
    sc = with_robots(doorway(), [((0.0, -0.6, math.pi / 2), (0.0, 1.0), 9.0), ((0.6, 0.7, -2.5), (-0.6, -1.0), 1.0)])
    for seed in range(2):
        res = run_episode(sc.with_overrides(seed=seed))
        m = res.metrics
        assert m.success
        assert m.turns == {0: 1, 1: 2}
        assert m.stop_ticks[1] > 0
        assert m.zone_entries["gap"][0] < m.zone_entries["gap"][1]


def test_turn_two_robot_in_free_space_stays_below_half_speed():
    # the far robot gets turn 2 while still in open space and then cruises
    sc = with_robots(doorway(), [((-0.9, -1.2, 0.9273), (-0.9, 0.9), 9.0), ((0.9, -1.2, 2.2143), (0.9, 0.9), 1.0)])
    res = run_episode(sc)
    assert res.metrics.success
    v = [r["v"] for r in records(res, "state") if r["robot"] == 1 and r["turn"] == 2]
    assert v and max(v) <= 0.75 + 1e-9


def test_collision_tagging(open_scenario):
    sc = open_scenario.with_overrides(
        robots=(
            replace(open_scenario.robots[0], id=0, start=(0.0, 0.0, 0.0), goal=(0.1, 0.0)),
            replace(open_scenario.robots[0], id=1, start=(1.0, 0.0, math.pi), goal=(0.3, 0.0)),
        )
    )
    sim = Simulation(sc)
    a, b = sim.robots[0], sim.robots[1]
    a.v = b.v = 0.5
    a.x, b.x = 0.1, 0.3  # both at their goals and overlapping
    sim._check_collisions(1)
    assert sim.collisions == 1 and sim.goal_adjacent == 1
    assert a.v == 0.0 and b.v == 0.0
    # an ongoing contact is a single event
    sim._check_collisions(2)
    assert sim.collisions == 1
    b.x = 0.8
    sim._check_collisions(3)
    b.x = 0.35
    sim.robots[1].goal = (1.0, 0.0)
    sim._check_collisions(4)
    assert sim.collisions == 2 and sim.goal_adjacent == 1
    coll = [r for r in sim.records if r["type"] == "collision"]
    assert [c["goal_adjacent"] for c in coll] == [True, False]


def test_wall_contact_is_counted(open_scenario):
    sim = Simulation(open_scenario)
    sim.robots[0].y = -1.9
    sim._check_collisions(1)
    assert sim.wall_collisions == 1
    assert np.isclose(sim.robots[0].v, 0.0)
