"""Static 2-D world: wall segments, robot discs, conflict zones.

All values here are immutable once built. Points are ``(x, y)`` in meters.
A map file is plain text, one record per line::

    # comment
    bounds  XMIN YMIN XMAX YMAX
    X1 Y1 X2 Y2                     # a wall segment, four floats
    zone NAME X1 Y1 X2 Y2 X3 Y3 ... # convex polygon, >= 3 vertices

Exactly one ``bounds`` line is required. Blank lines and ``#`` comments are
ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_SEGMENT_LENGTH = 1e-9


class GeometryError(ValueError):
    pass


class MapFormatError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


def _as_segment(s) -> np.ndarray:
    seg = np.asarray(s, dtype=float).reshape(2, 2)
    if np.hypot(*(seg[1] - seg[0])) <= MIN_SEGMENT_LENGTH:
        raise GeometryError("degenerate geometry: zero-length segment")
    return seg


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"disc radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True, eq=False)
class ConflictZone:
    """Convex polygon that several robots must pass through in turn."""

    id: str
    region: np.ndarray

    def __post_init__(self):
        poly = np.asarray(self.region, dtype=float).reshape(-1, 2)
        if len(poly) < 3:
            raise GeometryError(f"zone {self.id!r}: need at least 3 vertices")
        area = polygon_signed_area(poly)
        if abs(area) <= 1e-12:
            raise GeometryError(f"zone {self.id!r}: degenerate polygon (zero area)")
        if area < 0:
            poly = poly[::-1].copy()
        edges = np.roll(poly, -1, axis=0) - poly
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross < -1e-12):
            raise GeometryError(f"zone {self.id!r}: polygon is not convex")
        poly.setflags(write=False)
        object.__setattr__(self, "region", poly)

    @property
    def area(self) -> float:
        return polygon_signed_area(self.region)

    @property
    def centroid(self) -> np.ndarray:
        return self.region.mean(axis=0)


@dataclass(frozen=True, eq=False)
class VectorMap:
    segments: np.ndarray
    bounds: tuple[float, float, float, float]
    zones: tuple[ConflictZone, ...] = field(default_factory=tuple)

    def __post_init__(self):
        segs = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        if len(segs):
            lengths = np.hypot(*(segs[:, 1] - segs[:, 0]).T)
            if np.any(lengths <= MIN_SEGMENT_LENGTH):
                raise GeometryError("degenerate geometry: zero-length segment")
        xmin, ymin, xmax, ymax = map(float, self.bounds)
        if not (xmax > xmin and ymax > ymin):
            raise GeometryError(f"empty bounds {self.bounds}")
        pts = segs.reshape(-1, 2)
        tol = 1e-9
        if len(pts) and (
            pts[:, 0].min() < xmin - tol
            or pts[:, 0].max() > xmax + tol
            or pts[:, 1].min() < ymin - tol
            or pts[:, 1].max() > ymax + tol
        ):
            raise GeometryError("segment endpoint outside map bounds")
        segs.setflags(write=False)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        object.__setattr__(self, "zones", tuple(self.zones))

    def zone(self, zone_id: str) -> ConflictZone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(zone_id)

    def contains(self, p) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax

    def translated(self, offset) -> "VectorMap":
        off = np.asarray(offset, dtype=float)
        xmin, ymin, xmax, ymax = self.bounds
        return VectorMap(
            self.segments + off,
            (xmin + off[0], ymin + off[1], xmax + off[0], ymax + off[1]),
            tuple(ConflictZone(z.id, z.region + off) for z in self.zones),
        )

    def clearance(self, points) -> np.ndarray:
        """Distance from each point to the nearest wall (inf for a wall-free map)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self.segments) == 0:
            return np.full(len(pts), np.inf)
        return point_segment_distances(pts, self.segments).min(axis=1)


def polygon_signed_area(poly) -> float:
    x, y = np.asarray(poly, dtype=float).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def point_segment_distances(points, segments) -> np.ndarray:
    """Pairwise distances, shape ``(len(points), len(segments))``.

    A zero-length segment measures distance to its single point.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    segs = np.asarray(segments, dtype=float).reshape(-1, 2, 2)
    ax, ay = segs[:, 0, 0], segs[:, 0, 1]
    dx, dy = segs[:, 1, 0] - ax, segs[:, 1, 1] - ay
    denom = dx * dx + dy * dy
    safe = np.where(denom > 0, denom, 1.0)
    px = p[:, 0:1] - ax
    py = p[:, 1:2] - ay
    t = np.clip((px * dx + py * dy) / safe, 0.0, 1.0)
    ex = px - t * dx
    ey = py - t * dy
    return np.sqrt(ex * ex + ey * ey)


def distance_point_segment(p, s) -> float:
    seg = _as_segment(s)
    return float(point_segment_distances(np.asarray(p, dtype=float), seg)[0, 0])


def disc_collides_map(d: Disc, m: VectorMap) -> bool:
    return bool(m.clearance(d.center)[0] < d.radius)


def discs_collide(a: Disc, b: Disc) -> bool:
    gap = np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
    return bool(gap < a.radius + b.radius)


def in_conflict_zone(p, z: ConflictZone, tol: float = 1e-12) -> bool:
    """Boundary-inclusive point-in-convex-polygon test."""
    return bool(points_in_zone(np.asarray(p, dtype=float)[None, :], z.region, tol)[0])


def points_in_zone(points, region, tol: float = 1e-12) -> np.ndarray:
    """Vectorized :func:`in_conflict_zone` for a CCW convex ``region``."""
    pts = np.asarray(points, dtype=float)
    poly = np.asarray(region, dtype=float)
    edges = np.roll(poly, -1, axis=0) - poly
    rel = pts[..., None, :] - poly
    cross = edges[:, 0] * rel[..., 1] - edges[:, 1] * rel[..., 0]
    return np.all(cross >= -tol, axis=-1)


def distance_to_zone(p, z: ConflictZone) -> float:
    if in_conflict_zone(p, z):
        return 0.0
    edges = np.stack([z.region, np.roll(z.region, -1, axis=0)], axis=1)
    return float(point_segment_distances(p, edges).min())


def segment_intersects_zone(a, b, z: ConflictZone) -> bool:
    """Cyrus-Beck clip of segment ``ab`` against the convex zone."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    poly = z.region
    edges = np.roll(poly, -1, axis=0) - poly
    # inward normals for a CCW polygon
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    t0, t1 = 0.0, 1.0
    for n, v in zip(normals, poly):
        num = float(np.dot(n, a - v))
        den = float(np.dot(n, d))
        if abs(den) < 1e-15:
            if num < -1e-12:
                return False
            continue
        t = -num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1 + 1e-12:
            return False
    return True


def polyline_intersects_zone(points, z: ConflictZone) -> bool:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 1:
        return in_conflict_zone(pts[0], z)
    return any(segment_intersects_zone(pts[i], pts[i + 1], z) for i in range(len(pts) - 1))


def load_map(path) -> VectorMap:
    path = Path(path)
    return parse_map(path.read_text(), source=str(path))


def parse_map(text: str, source: str = "<map>") -> VectorMap:
    bounds = None
    segments = []
    zones = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].lower()
        try:
            if head == "bounds":
                if bounds is not None:
                    raise MapFormatError(source, lineno, "duplicate bounds line")
                if len(tokens) != 5:
                    raise MapFormatError(source, lineno, "bounds needs 4 numbers")
                bounds = tuple(float(t) for t in tokens[1:])
            elif head == "zone":
                coords = [float(t) for t in tokens[2:]]
                if len(tokens) < 2 or len(coords) < 6 or len(coords) % 2:
                    raise MapFormatError(source, lineno, "zone needs a name and >= 3 x y pairs")
                zones.append(ConflictZone(tokens[1], np.reshape(coords, (-1, 2))))
            else:
                if len(tokens) != 4:
                    raise MapFormatError(source, lineno, f"expected 4 numbers for a segment, got {len(tokens)}")
                segments.append(_as_segment([float(t) for t in tokens]))
        except MapFormatError:
            raise
        except (ValueError, GeometryError) as exc:
            raise MapFormatError(source, lineno, str(exc)) from exc
    if bounds is None:
        raise MapFormatError(source, 0, "missing bounds line")
    try:
        return VectorMap(np.reshape(segments, (-1, 2, 2)), bounds, tuple(zones))
    except GeometryError as exc:
        raise MapFormatError(source, 0, str(exc)) from exc


def format_map(m: VectorMap) -> str:
    lines = ["bounds " + " ".join(f"{v:g}" for v in m.bounds)]
    lines += [" ".join(f"{v:g}" for v in seg.ravel()) for seg in m.segments]
    for z in m.zones:
        lines.append(f"zone {z.id} " + " ".join(f"{v:g}" for v in z.region.ravel()))
    return "\n".join(lines) + "\n"
