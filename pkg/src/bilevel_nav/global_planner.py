"""Lattice navigation graph and A* search over it."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import VectorMap, point_segment_distances

_NEIGHBOR_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1))


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NavGraph:
    vertices: np.ndarray  # (V, 2)
    edges: np.ndarray  # (E, 2) vertex indices, each undirected edge once
    weights: np.ndarray  # (E,)
    resolution: float
    robot_radius: float

    def __post_init__(self):
        adj = [[] for _ in range(len(self.vertices))]
        for (a, b), w in zip(self.edges.tolist(), self.weights.tolist()):
            adj[a].append((b, w))
            adj[b].append((a, w))
        object.__setattr__(self, "_adjacency", adj)
        object.__setattr__(self, "_coords", self.vertices.tolist())

    def neighbors(self, v: int):
        return self._adjacency[v]

    def nearest_vertex(self, p) -> tuple[int, float]:
        d = np.hypot(*(self.vertices - np.asarray(p, dtype=float)).T)
        i = int(np.argmin(d))
        return i, float(d[i])

    def dump(self) -> str:
        """Plain-text debug listing: ``v i x y`` then ``e a b w`` lines."""
        lines = [f"# resolution {self.resolution:g} robot_radius {self.robot_radius:g}"]
        lines += [f"v {i} {x:.6f} {y:.6f}" for i, (x, y) in enumerate(self.vertices)]
        lines += [f"e {a} {b} {w:.9f}" for (a, b), w in zip(self.edges.tolist(), self.weights.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class GlobalPath:
    waypoints: np.ndarray  # (P, 2)
    vertex_ids: tuple[int, ...]
    total_length: float

    def __len__(self):
        return len(self.waypoints)

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]


def segment_segment_distances(segs_a, segs_b) -> np.ndarray:
    """Pairwise minimum distances between two segment sets, ``(A, B)``."""
    A = np.asarray(segs_a, dtype=float).reshape(-1, 2, 2)
    B = np.asarray(segs_b, dtype=float).reshape(-1, 2, 2)
    d = np.minimum.reduce(
        [
            point_segment_distances(A[:, 0], B),
            point_segment_distances(A[:, 1], B),
            point_segment_distances(B[:, 0], A).T,
            point_segment_distances(B[:, 1], A).T,
        ]
    )
    # proper crossings have distance zero
    p, r = A[:, None, 0], A[:, None, 1] - A[:, None, 0]
    q, s = B[None, :, 0], B[None, :, 1] - B[None, :, 0]
    rxs = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    qp = q - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]) / rxs
        u = (qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]) / rxs
    crossing = (np.abs(rxs) > 1e-15) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    d[crossing] = 0.0
    return d


def lattice_points(m: VectorMap, resolution: float) -> tuple[np.ndarray, int, int]:
    xmin, ymin, xmax, ymax = m.bounds
    nx = int(math.floor((xmax - xmin) / resolution + 1e-9)) + 1
    ny = int(math.floor((ymax - ymin) / resolution + 1e-9)) + 1
    xs = np.round(xmin + resolution * np.arange(nx), 9)
    ys = np.round(ymin + resolution * np.arange(ny), 9)
    gx, gy = np.meshgrid(xs, ys)  # row = y index
    return np.stack([gx.ravel(), gy.ravel()], axis=1), nx, ny


def build_nav_graph(m: VectorMap, resolution: float = 0.1, robot_radius: float = 0.2) -> NavGraph:
    """8-connected lattice over the map bounds, keeping only vertices and
    edges whose clearance from every wall is at least ``robot_radius``."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if not robot_radius > 0:
        raise ValueError("robot_radius must be positive")
    pts, nx, ny = lattice_points(m, resolution)
    free = m.clearance(pts) >= robot_radius
    if not free.any():
        raise PlanningError("map fully blocked")

    new_index = np.full(len(pts), -1)
    new_index[free] = np.arange(free.sum())
    grid = np.arange(nx * ny).reshape(ny, nx)

    cand = []
    for dx, dy in _NEIGHBOR_OFFSETS:
        if dy >= 0:
            src = grid[0 : ny - dy, 0 : nx - dx]
            dst = grid[dy:ny, dx:nx]
        else:
            src = grid[-dy:ny, 0 : nx - dx]
            dst = grid[0 : ny + dy, dx:nx]
        cand.append(np.stack([src.ravel(), dst.ravel()], axis=1))
    cand = np.concatenate(cand)
    cand = cand[free[cand[:, 0]] & free[cand[:, 1]]]

    if len(m.segments) and len(cand):
        edge_segs = pts[cand]
        clear = segment_segment_distances(edge_segs, m.segments).min(axis=1) >= robot_radius
        cand = cand[clear]

    edges = new_index[cand]
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    verts = pts[free]
    weights = np.hypot(*(verts[edges[:, 1]] - verts[edges[:, 0]]).T)
    return NavGraph(verts, edges.astype(int), weights, float(resolution), float(robot_radius))


def snap(g: NavGraph, p) -> int:
    i, d = g.nearest_vertex(p)
    if d > g.resolution * math.sqrt(2) + 1e-9:
        raise PlanningError(f"endpoint blocked: no free vertex within one cell of {tuple(np.round(p, 3))}")
    return i


def astar(g: NavGraph, start, goal) -> GlobalPath:
    """Shortest lattice path between the vertices nearest ``start`` and ``goal``.

    Ties on f are broken toward larger g, then lower vertex index, so the
    returned path is reproducible.
    """
    s, t = snap(g, start), snap(g, goal)
    verts = g.vertices
    xy = g._coords
    gx, gy = xy[t]

    def h(v):
        return math.hypot(xy[v][0] - gx, xy[v][1] - gy)

    best = {s: 0.0}
    parent = {s: -1}
    heap = [(h(s), -0.0, s)]
    closed = set()
    found = False
    while heap:
        f, neg_g, v = heapq.heappop(heap)
        if v in closed:
            continue
        if v == t:
            found = True
            break
        closed.add(v)
        gv = -neg_g
        for w, weight in g.neighbors(v):
            if w in closed:
                continue
            gw = gv + weight
            if gw < best.get(w, math.inf) - 1e-12:
                best[w] = gw
                parent[w] = v
                heapq.heappush(heap, (gw + h(w), -gw, w))
    if not found:
        raise PlanningError("no path")

    ids = [t]
    while parent[ids[-1]] != -1:
        ids.append(parent[ids[-1]])
    ids.reverse()
    wp = verts[ids]
    length = float(np.hypot(*np.diff(wp, axis=0).T).sum()) if len(ids) > 1 else 0.0
    return GlobalPath(wp, tuple(ids), length)


def distance_to_path(p, path: GlobalPath) -> float:
    wp = path.waypoints
    if len(wp) == 1:
        return float(np.hypot(*(np.asarray(p) - wp[0])))
    segs = np.stack([wp[:-1], wp[1:]], axis=1)
    keep = np.hypot(*(segs[:, 1] - segs[:, 0]).T) > 0
    return float(point_segment_distances(p, segs[keep]).min())


def needs_replan(p, path: GlobalPath, resolution: float) -> bool:
    """Replan once the robot strays more than two cells from its path corridor."""
    return distance_to_path(p, path) > 2.0 * resolution
