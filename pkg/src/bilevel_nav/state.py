"""Per-robot state and the observation a controller is allowed to see."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RobotState:
    id: int
    x: float
    y: float
    theta: float
    start: tuple[float, float]
    goal: tuple[float, float]
    radius: float
    v_max: float
    v: float = 0.0
    omega: float = 0.0
    turn: int | None = None
    done: bool = False

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True)
class NeighborInfo:
    """Publicly observable facts about another robot."""

    id: int
    x: float
    y: float
    theta: float
    v: float
    omega: float
    radius: float
    v_max: float
    done: bool


@dataclass(frozen=True)
class Observation:
    """``own`` is a snapshot copy; ``neighbors`` carry no private fields.

    ``turn`` is this robot's slot in the active priority ordering (None when
    unscheduled) and ``leader`` the id of the robot holding turn 1, whose
    base top speed sets the scaling reference. ``ahead`` lists the robots
    holding earlier turns; the announced ordering is public.
    """

    own: RobotState
    neighbors: tuple[NeighborInfo, ...] = field(default_factory=tuple)
    turn: int | None = None
    leader: int | None = None
    ahead: tuple[int, ...] = ()

    def neighbor(self, robot_id: int) -> NeighborInfo | None:
        for n in self.neighbors:
            if n.id == robot_id:
                return n
        return None
