"""Priority auction deciding who passes a conflict zone first.

Each robot bids from its own private priority constant ``zeta``; the
auction sorts bids in decreasing order (ties to the lower robot id) and
charges every robot the externality it imposes on the robots behind it.
With that payment, bidding ``zeta`` truthfully is a dominant strategy and
the allocation maximises ``sum(zeta_i * alpha[turn_i])``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .geometry import ConflictZone, distance_to_zone, polyline_intersects_zone


class AuctionError(ValueError):
    pass


@dataclass(frozen=True)
class Bid:
    robot: int
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise AuctionError(f"bid must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class PriorityOrdering:
    """``order[j - 1]`` is the robot moving on turn ``j``."""

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(r) for r in self.order))
        if len(set(self.order)) != len(self.order):
            raise AuctionError("priority ordering must not repeat a robot")

    @classmethod
    def from_sigma(cls, sigma: Mapping[int, int]) -> "PriorityOrdering":
        k = len(sigma)
        if sorted(sigma.values()) != list(range(1, k + 1)):
            raise AuctionError("sigma must be a bijection onto 1..k")
        return cls(tuple(r for r, _ in sorted(sigma.items(), key=lambda kv: kv[1])))

    @property
    def k(self) -> int:
        return len(self.order)

    @property
    def sigma(self) -> dict[int, int]:
        return {r: j for j, r in enumerate(self.order, start=1)}

    def turn(self, robot: int) -> int:
        return self.order.index(robot) + 1

    def inverse(self, turn: int) -> int:
        if not 1 <= turn <= self.k:
            raise AuctionError(f"turn {turn} out of range 1..{self.k}")
        return self.order[turn - 1]

    def without(self, robot: int) -> "PriorityOrdering":
        """Drop a robot; everyone behind it moves up one turn."""
        return PriorityOrdering(tuple(r for r in self.order if r != robot))

    def __contains__(self, robot):
        return robot in self.order


@dataclass(frozen=True)
class PriorityProfile:
    zeta: Mapping[int, float]
    alpha: tuple[float, ...]

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if any(a <= 0 for a in alpha) or any(a <= b for a, b in zip(alpha, alpha[1:])):
            raise AuctionError("alpha must be strictly decreasing and positive")
        if any(not z > 0 for z in self.zeta.values()):
            raise AuctionError("zeta values must be positive")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True, eq=False)
class Conflict:
    robots: tuple[int, ...]
    zone: ConflictZone
    tick: int

    def __post_init__(self):
        if len(self.robots) < 2 or len(set(self.robots)) != len(self.robots):
            raise AuctionError("a conflict needs at least two distinct robots")


class Approach(NamedTuple):
    """What conflict detection needs to know about one robot."""

    robot: int
    position: np.ndarray
    remaining_path: np.ndarray  # (P, 2) polyline from the robot onward


def default_alpha(k: int) -> tuple[float, ...]:
    return tuple(float(k - q + 1) for q in range(1, k + 1))


def detect_conflict(
    approaches: Iterable[Approach], zone: ConflictZone, tick: int, engagement_radius: float = 3.0
) -> Conflict | None:
    members = []
    for a in approaches:
        if distance_to_zone(a.position, zone) >= engagement_radius:
            continue
        pts = np.vstack([np.asarray(a.position, dtype=float).reshape(1, 2), np.asarray(a.remaining_path).reshape(-1, 2)])
        if polyline_intersects_zone(pts, zone):
            members.append(int(a.robot))
    if len(members) < 2:
        return None
    return Conflict(tuple(sorted(members)), zone, tick)


def allocate(bids: Sequence[Bid]) -> PriorityOrdering:
    if not bids:
        raise AuctionError("empty auction")
    ranked = sorted(bids, key=lambda b: (-b.value, b.robot))
    return PriorityOrdering(tuple(b.robot for b in ranked))


def payment(turn: int, successor_bids: Sequence[float], alpha: Sequence[float]) -> float:
    """Externality charged to the robot moving on ``turn``.

    ``successor_bids[0]`` is the (proxy) bid of the robot on ``turn + 1``,
    and so on. Rewards past the last turn and missing bids count as zero.
    """
    k = len(alpha)
    if not 1 <= turn <= k:
        raise AuctionError(f"turn {turn} out of range 1..{k}")
    a = list(alpha) + [0.0]
    total = 0.0
    for j in range(turn, k + 1):
        idx = j - turn  # bid of the robot on turn j + 1
        b = successor_bids[idx] if idx < len(successor_bids) else 0.0
        total += b * (a[j - 1] - a[j])
    return total


def optimal_bid(robot: int, zeta: float) -> Bid:
    """Truthful bidding is dominant, so the best bid is the private constant itself."""
    if not zeta > 0:
        raise AuctionError(f"priority constant must be positive, got {zeta}")
    return Bid(robot, float(zeta))


def welfare(ordering: PriorityOrdering, zeta: Mapping[int, float], alpha: Sequence[float]) -> float:
    if set(zeta) != set(ordering.order) or len(alpha) < ordering.k:
        raise AuctionError("size mismatch between ordering, zeta and alpha")
    return float(sum(zeta[r] * alpha[j - 1] for r, j in ordering.sigma.items()))


def sample_proxy_bids(rng: np.random.Generator, n: int, zeta_max: float) -> list[float]:
    """Uniform draws on ``(0, zeta_max]`` standing in for unseen rival bids."""
    return (zeta_max * (1.0 - rng.random(n))).tolist()


def realized_payments(ordering: PriorityOrdering, bids: Mapping[int, float], alpha: Sequence[float]) -> dict[int, float]:
    """Payments when the successors' actual bids are known."""
    out = {}
    for r, q in ordering.sigma.items():
        succ = [bids[ordering.inverse(j)] for j in range(q + 1, ordering.k + 1)]
        out[r] = payment(q, succ, alpha)
    return out


def quasi_linear_utility(
    robot: int,
    zeta_i: float,
    bids: Mapping[int, float],
    alpha: Sequence[float],
    allocator: Callable[[Sequence[Bid]], PriorityOrdering] = allocate,
) -> float:
    ordering = allocator([Bid(r, b) for r, b in sorted(bids.items())])
    q = ordering.turn(robot)
    return zeta_i * alpha[q - 1] - realized_payments(ordering, bids, alpha)[robot]


def verify_dsic(
    k: int,
    grid: Sequence[float],
    alpha: Sequence[float] | None = None,
    allocator: Callable[[Sequence[Bid]], PriorityOrdering] = allocate,
    tol: float = 1e-12,
) -> bool:
    """Exhaustively check that no robot gains by misreporting.

    Every zeta profile drawn from ``grid`` is tried; each robot deviates to
    every other grid value, every midpoint between grid values, zero and
    twice the grid maximum while the others bid truthfully.
    """
    if not 2 <= k <= 4:
        raise AuctionError("verify_dsic supports 2 <= k <= 4")
    alpha = tuple(alpha) if alpha is not None else default_alpha(k)
    g = sorted(set(float(v) for v in grid))
    deviations = sorted(set(g) | {(a + b) / 2 for a, b in zip(g, g[1:])} | {0.0, 2 * g[-1]})
    for profile in itertools.product(g, repeat=k):
        truthful = dict(enumerate(profile))
        for i in range(k):
            honest = quasi_linear_utility(i, profile[i], truthful, alpha, allocator)
            for b in deviations:
                if b == profile[i]:
                    continue
                lie = quasi_linear_utility(i, profile[i], {**truthful, i: b}, alpha, allocator)
                if lie > honest + tol:
                    return False
    return True

