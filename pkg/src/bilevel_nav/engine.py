"""Fixed-rate episode loop.

Every tick all controllers read the same pre-tick snapshot, so the update
order of robots cannot change the outcome. The engine owns the world and
the auction bookkeeping; controllers only ever see :class:`Observation`
values and keep their priority constant to themselves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import auction
from .baselines import social_force_step
from .geometry import Disc, VectorMap, disc_collides_map, discs_collide, in_conflict_zone, polyline_intersects_zone
from .global_planner import GlobalPath, NavGraph, PlanningError, astar, build_nav_graph, needs_replan
from .local_planner import (
    Kinodynamics,
    VelocityCommand,
    alt_scale_kinodynamics,
    integrate_unicycle,
    plan_step,
    pure_pursuit_target,
    scale_kinodynamics,
)
from .metrics import EpisodeMetrics, count_delta_v, count_stop_time, detect_deadlock
from .scenario import Scenario
from .state import NeighborInfo, Observation, RobotState

RNG_NAME = "numpy.random.PCG64"
TELEMETRY_VERSION = 1
_FEAS_TOL = 1e-9


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class EpisodeOver(RuntimeError):
    pass


def effective_kinodynamics(base: Kinodynamics, obs: Observation, scaling: str) -> Kinodynamics:
    """Limits for this tick given the robot's turn.

    The scaling reference is the observed base top speed of the turn-1
    robot; an unscheduled robot keeps its own limits.
    """
    if obs.turn is None or scaling == "none":
        return base
    ref = base.v_max
    if obs.leader is not None and obs.leader != obs.own.id:
        nb = obs.neighbor(obs.leader)
        if nb is not None:
            ref = nb.v_max
    ref_kin = replace(base, v_max=ref)
    if scaling == "alt":
        return alt_scale_kinodynamics(ref_kin, obs.turn)
    return scale_kinodynamics(ref_kin, obs.turn)


class BilevelController:
    """One robot's navigation stack: A* path, priority bid, arc planner."""

    def __init__(self, robot_id, zeta, kin, graph: NavGraph, m: VectorMap, start, goal, scenario: Scenario, scaling):
        self.id = robot_id
        self.__zeta = float(zeta)
        self.kin = kin
        self.graph = graph
        self.map = m
        self.goal = tuple(goal)
        self.sc = scenario
        self.scaling = scaling
        self.path = astar(graph, start, goal)
        self.replans = 0

    def bid(self) -> auction.Bid:
        return auction.optimal_bid(self.id, self.__zeta)

    def _maybe_replan(self, pos):
        if needs_replan(pos, self.path, self.graph.resolution):
            try:
                self.path = astar(self.graph, pos, self.goal)
                self.replans += 1
            except PlanningError:
                pass

    def act(self, obs: Observation) -> tuple[VelocityCommand, Kinodynamics]:
        me = obs.own
        self._maybe_replan((me.x, me.y))
        kin = effective_kinodynamics(self.kin, obs, self.scaling)
        res = plan_step(obs, self.path, kin, self.sc.weights, self.sc.planner, self.map)
        return res.command, kin


class SocialForceController:
    """Social-forces robot steering toward a pure-pursuit point on its A* path."""

    def __init__(self, robot_id, kin, graph: NavGraph, m: VectorMap, start, goal, scenario: Scenario):
        self.id = robot_id
        self.kin = kin
        self.graph = graph
        self.map = m
        self.goal = tuple(goal)
        self.sc = scenario
        self.path = astar(graph, start, goal)

    def bid(self):
        return None

    def act(self, obs: Observation) -> tuple[VelocityCommand, Kinodynamics]:
        me = obs.own
        pos = np.array([me.x, me.y])
        if needs_replan(pos, self.path, self.graph.resolution):
            try:
                self.path = astar(self.graph, pos, self.goal)
            except PlanningError:
                pass
        target = pure_pursuit_target(pos, self.path, self.sc.planner.lookahead)
        if math.hypot(*(np.asarray(self.goal) - pos)) <= self.sc.planner.lookahead:
            target = np.asarray(self.goal, dtype=float)
        cmd = social_force_step(obs, target, self.sc.social_forces, self.kin, self.sc.dt, self.map)
        return cmd, self.kin


@dataclass
class _ActiveConflict:
    zone_id: str
    ordering: auction.PriorityOrdering
    entered: set


def _remaining_path(pos: np.ndarray, path: GlobalPath) -> np.ndarray:
    wp = path.waypoints
    i = int(np.argmin(np.hypot(*(wp - pos).T)))
    return wp[i + 1 :]


class Simulation:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.sc = scenario
        self.map = scenario.load_map()
        self.dt = scenario.dt
        self.rng = make_rng(scenario.seed)
        self.tick = 0
        self.finished = False
        self.records: list[dict] = []
        self._graphs: dict[float, NavGraph] = {}

        scaling = {"auction": "inverse", "enforced-alt-scaling": "alt", "none": "none"}[scenario.scheduling]
        self.scaling = scaling
        self.scheduled = scenario.scheduling != "none" and scenario.baseline == "bilevel"

        specs = sorted(scenario.robots, key=lambda r: r.id)
        zetas = {}
        for r in specs:
            zetas[r.id] = r.zeta if r.zeta is not None else float(auction.sample_proxy_bids(self.rng, 1, scenario.zeta_max)[0])
        self.robots: dict[int, RobotState] = {}
        self.base_kin: dict[int, Kinodynamics] = {}
        self.controllers = {}
        for r in specs:
            x, y, th = r.start
            if scenario.start_jitter > 0:
                dx, dy = self.rng.uniform(-scenario.start_jitter, scenario.start_jitter, 2)
                x, y = x + float(dx), y + float(dy)
            kin = r.kinodynamics
            st = RobotState(r.id, x, y, th, (x, y), tuple(r.goal), kin.robot_radius, kin.v_max)
            self.robots[r.id] = st
            self.base_kin[r.id] = kin
            graph = self._graph(kin.robot_radius)
            if scenario.baseline == "social-forces":
                ctl = SocialForceController(r.id, kin, graph, self.map, (x, y), r.goal, scenario)
            else:
                ctl = BilevelController(r.id, zetas[r.id], kin, graph, self.map, (x, y), r.goal, scenario, scaling)
            self.controllers[r.id] = ctl
        del zetas  # private values live only inside the controllers from here on

        self.conflicts: dict[str, _ActiveConflict] = {}
        self.turns: dict[int, int] = {}
        self.zone_entries: dict[str, dict[int, int]] = {z.id: {} for z in self.map.zones}
        self.zone_exits: dict[str, dict[int, int]] = {z.id: {} for z in self.map.zones}
        self._inside: dict[str, set[int]] = {z.id: set() for z in self.map.zones}
        self.goal_times: dict[int, float | None] = {rid: None for rid in self.robots}
        self.v_log: dict[int, list[float]] = {rid: [] for rid in self.robots}
        self.progress: list[float] = []
        self.colliding_pairs: set = set()
        self.colliding_walls: set = set()
        self.collisions = 0
        self.goal_adjacent = 0
        self.wall_collisions = 0
        self.deadlock = False
        self.timeout = False
        self.violations = 0
        self._header()

    def _graph(self, radius: float) -> NavGraph:
        if radius not in self._graphs:
            self._graphs[radius] = build_nav_graph(self.map, self.sc.resolution, radius)
        return self._graphs[radius]

    # -- telemetry ---------------------------------------------------------

    def _header(self):
        self.records.append(
            {
                "type": "header",
                "version": TELEMETRY_VERSION,
                "scenario": self.sc.name,
                "seed": self.sc.seed,
                "rng": RNG_NAME,
                "scheduling": self.sc.scheduling,
                "baseline": self.sc.baseline,
                "dt": self.dt,
                "bounds": list(self.map.bounds),
                "segments": self.map.segments.reshape(-1, 4).tolist(),
                "zones": {z.id: z.region.tolist() for z in self.map.zones},
                "robots": [
                    {"id": r.id, "start": [r.x, r.y, r.theta], "goal": list(r.goal), "radius": r.radius}
                    for r in self.robots.values()
                ],
            }
        )

    def telemetry_lines(self) -> list[str]:
        return [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in self.records]

    # -- observation -------------------------------------------------------

    def observe(self, rid: int) -> Observation:
        me = self.robots[rid]
        rad = self.sc.sensing_radius
        nbs = []
        for o in self.robots.values():
            if o.id == rid:
                continue
            if rad is not None and math.hypot(o.x - me.x, o.y - me.y) > rad:
                continue
            nbs.append(NeighborInfo(o.id, o.x, o.y, o.theta, o.v, o.omega, o.radius, o.v_max, o.done))
        leader = None
        ahead: list[int] = []
        for c in self.conflicts.values():
            if rid in c.ordering:
                leader = c.ordering.order[0]
                ahead += [o for o in c.ordering.order[: c.ordering.turn(rid) - 1] if o not in ahead]
        return Observation(replace(me), tuple(nbs), me.turn, leader, tuple(sorted(ahead)))

    # -- auctions ----------------------------------------------------------

    def _update_conflicts(self):
        for zid, c in list(self.conflicts.items()):
            zone = self.map.zone(zid)
            for rid in c.ordering.order:
                st = self.robots[rid]
                inside = in_conflict_zone(st.position, zone)
                if inside:
                    c.entered.add(rid)
                gone = st.done or (rid in c.entered and not inside)
                if not gone and rid not in c.entered:
                    rem = _remaining_path(st.position, self.controllers[rid].path)
                    gone = not polyline_intersects_zone(np.vstack([st.position, rem]), zone)
                if gone:
                    c.ordering = c.ordering.without(rid)
                    st.turn = None
                    self.records.append({"type": "clear", "t": self.tick, "zone": zid, "robot": rid})
            for rid in c.ordering.order:
                self.robots[rid].turn = c.ordering.turn(rid)
            if not c.ordering.order:
                del self.conflicts[zid]

        busy = {rid for c in self.conflicts.values() for rid in c.ordering.order}
        for zone in self.map.zones:
            if zone.id in self.conflicts:
                continue
            approaches = [
                auction.Approach(st.id, st.position, _remaining_path(st.position, self.controllers[st.id].path))
                for st in self.robots.values()
                if not st.done and st.id not in busy
            ]
            conflict = auction.detect_conflict(approaches, zone, self.tick, self.sc.engagement_radius)
            if conflict is None:
                continue
            self._run_auction(conflict)
            busy.update(conflict.robots)

    def _run_auction(self, conflict: auction.Conflict):
        bids = [self.controllers[rid].bid() for rid in conflict.robots]
        ordering = auction.allocate(bids)
        k = ordering.k
        alpha = auction.default_alpha(k)
        payments, proxies = {}, {}
        for rid in ordering.order:
            q = ordering.turn(rid)
            # each robot prices its externality with its own proxy draws
            proxy = auction.sample_proxy_bids(self.rng, k - q, self.sc.zeta_max)
            proxies[rid] = proxy
            payments[rid] = auction.payment(q, proxy, alpha)
        entered = {rid for rid in ordering.order if in_conflict_zone(self.robots[rid].position, conflict.zone)}
        self.conflicts[conflict.zone.id] = _ActiveConflict(conflict.zone.id, ordering, entered)
        for rid in ordering.order:
            self.robots[rid].turn = ordering.turn(rid)
            self.turns.setdefault(rid, ordering.turn(rid))
        self.records.append(
            {
                "type": "auction",
                "t": self.tick,
                "zone": conflict.zone.id,
                "robots": list(conflict.robots),
                "bids": {str(b.robot): b.value for b in bids},
                "alpha": list(alpha),
                "sigma": {str(r): j for r, j in ordering.sigma.items()},
                "proxy_bids": {str(r): p for r, p in proxies.items()},
                "payments": {str(r): p for r, p in payments.items()},
            }
        )

    # -- main loop ---------------------------------------------------------

    def step(self):
        if self.finished:
            raise EpisodeOver("episode already terminated")
        if self.scheduled:
            self._update_conflicts()

        active = [rid for rid, st in self.robots.items() if not st.done]
        obs = {rid: self.observe(rid) for rid in active}
        commands = {}
        for rid in active:
            cmd, kin = self.controllers[rid].act(obs[rid])
            commands[rid] = (cmd, kin)

        moved = 0.0
        for rid in active:
            st = self.robots[rid]
            cmd, kin = commands[rid]
            if (
                cmd.v > kin.v_max + _FEAS_TOL and cmd.v > st.v - kin.a_max * self.dt + _FEAS_TOL
            ) or abs(cmd.v - st.v) > kin.a_max * self.dt + _FEAS_TOL or abs(cmd.omega) > kin.omega_max + _FEAS_TOL or cmd.v < 0:
                self.violations += 1
            x, y, th = integrate_unicycle(st.pose, cmd.v, cmd.omega, self.dt)
            moved += math.hypot(x - st.x, y - st.y)
            st.x, st.y, st.theta = x, y, th
            st.v, st.omega = cmd.v, cmd.omega
        self.tick += 1
        t = self.tick

        for rid in active:
            st = self.robots[rid]
            self.records.append(
                {
                    "type": "state",
                    "t": t,
                    "robot": rid,
                    "x": st.x,
                    "y": st.y,
                    "theta": st.theta,
                    "v": st.v,
                    "omega": st.omega,
                    "turn": st.turn,
                }
            )
            at_goal = math.hypot(st.x - st.goal[0], st.y - st.goal[1]) <= self.sc.goal_tolerance
            for z in self.map.zones:
                inside = in_conflict_zone(st.position, z)
                if inside and rid not in self.zone_entries[z.id]:
                    self.zone_entries[z.id][rid] = t
                if inside and not at_goal:
                    self._inside[z.id].add(rid)
                elif rid in self._inside[z.id] or (inside and at_goal):
                    self._inside[z.id].discard(rid)
                    self.zone_exits[z.id][rid] = t
            if at_goal:
                st.done = True
                st.v = st.omega = 0.0
                self.goal_times[rid] = t * self.dt
                self.records.append({"type": "goal", "t": t, "robot": rid, "time": t * self.dt})

        self._check_collisions(t)
        for rid in active:
            # arrival parks the robot; that is not a velocity change
            st = self.robots[rid]
            self.v_log[rid].append(commands[rid][0].v if st.done and rid not in self._contact_stopped else st.v)
        self.progress.append(moved)

        mc = self.sc.metrics
        if all(st.done for st in self.robots.values()):
            self._finish("all_done")
        elif detect_deadlock(self.progress, mc.deadlock_window, mc.deadlock_distance):
            self.deadlock = True
            self._finish("deadlock")
        elif self.tick >= self.sc.episode_cap:
            self.timeout = True
            self._finish("timeout")

    def _check_collisions(self, t):
        ids = sorted(self.robots)
        discs = {rid: Disc((self.robots[rid].x, self.robots[rid].y), self.robots[rid].radius) for rid in ids}
        now = set()
        tol2 = 2 * self.sc.goal_tolerance
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                if discs_collide(discs[a], discs[b]):
                    now.add((a, b))
                    if (a, b) not in self.colliding_pairs:
                        ra, rb = self.robots[a], self.robots[b]
                        near_goal = all(
                            math.hypot(r.x - r.goal[0], r.y - r.goal[1]) <= tol2 for r in (ra, rb)
                        )
                        self.collisions += 1
                        self.goal_adjacent += near_goal
                        self.records.append(
                            {"type": "collision", "t": t, "robots": [a, b], "goal_adjacent": near_goal,
                             "x": (ra.x + rb.x) / 2, "y": (ra.y + rb.y) / 2}
                        )
        walls = {rid for rid in ids if disc_collides_map(discs[rid], self.map)}
        for rid in walls - self.colliding_walls:
            self.wall_collisions += 1
            st = self.robots[rid]
            self.records.append({"type": "collision", "t": t, "robots": [rid], "wall": True, "x": st.x, "y": st.y})
        # contact stops the bodies involved
        self._contact_stopped = {r for pair in now - self.colliding_pairs for r in pair} | (walls - self.colliding_walls)
        for rid in self._contact_stopped:
            self.robots[rid].v = self.robots[rid].omega = 0.0
        self.colliding_pairs = now
        self.colliding_walls = walls

    def _finish(self, reason):
        self.finished = True
        m = self.metrics()
        self.records.append({"type": "end", "t": self.tick, "reason": reason, "outcome": m.outcome})

    def run(self) -> EpisodeMetrics:
        while not self.finished:
            self.step()
        return self.metrics()

    def metrics(self) -> EpisodeMetrics:
        mc = self.sc.metrics
        return EpisodeMetrics(
            robot_ids=sorted(self.robots),
            reached={rid: st.done for rid, st in sorted(self.robots.items())},
            goal_times=dict(sorted(self.goal_times.items())),
            collisions=self.collisions,
            goal_adjacent_collisions=self.goal_adjacent,
            wall_collisions=self.wall_collisions,
            deadlock=self.deadlock,
            timeout=self.timeout,
            ticks=self.tick,
            stop_ticks={rid: count_stop_time(v, mc.stop_v_eps) for rid, v in sorted(self.v_log.items())},
            delta_v={rid: count_delta_v([0.0] + v, mc.delta_v_threshold) for rid, v in sorted(self.v_log.items())},
            gap_width=self.sc.gap_width,
            turns=dict(sorted(self.turns.items())),
            zone_entries={z: dict(sorted(e.items())) for z, e in self.zone_entries.items()},
            zone_exits={z: dict(sorted(e.items())) for z, e in self.zone_exits.items()},
            dt=self.dt,
            feasibility_violations=self.violations,
        )


@dataclass
class EpisodeResult:
    metrics: EpisodeMetrics
    telemetry: list[str]

    def write(self, directory, stem: str = "episode"):
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        tpath = out / f"{stem}.telemetry.jsonl"
        tpath.write_text("\n".join(self.telemetry) + "\n")
        mpath = out / f"{stem}.metrics.json"
        mpath.write_text(json.dumps(self.metrics.summary(), indent=2, sort_keys=True) + "\n")
        return tpath, mpath


def run_episode(scenario: Scenario) -> EpisodeResult:
    sim = Simulation(scenario)
    metrics = sim.run()
    return EpisodeResult(metrics, sim.telemetry_lines())
