"""Static SVG trajectory plots from telemetry files.

The output is byte-stable for a given telemetry file: matplotlib's SVG
ids are salted with a fixed string and the date stamp is dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown", "tab:pink", "tab:olive")


class TelemetryError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


@dataclass
class Telemetry:
    header: dict
    tracks: dict[int, list[tuple[float, float]]] = field(default_factory=dict)
    collisions: list[tuple[float, float]] = field(default_factory=list)
    end: dict | None = None


def read_telemetry(path) -> Telemetry:
    """Parse a line-delimited telemetry file; errors carry the line number."""
    path = Path(path)
    header = None
    tracks: dict[int, list[tuple[float, float]]] = {}
    collisions = []
    end = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TelemetryError(path, lineno, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(rec, dict) or "type" not in rec:
                raise TelemetryError(path, lineno, "record without a type")
            kind = rec["type"]
            try:
                if kind == "header":
                    if header is not None:
                        raise TelemetryError(path, lineno, "duplicate header")
                    header = rec
                    for r in rec["robots"]:
                        tracks[int(r["id"])] = [(float(r["start"][0]), float(r["start"][1]))]
                elif header is None:
                    raise TelemetryError(path, lineno, "record before header")
                elif kind == "state":
                    tracks.setdefault(int(rec["robot"]), []).append((float(rec["x"]), float(rec["y"])))
                elif kind == "collision":
                    collisions.append((float(rec["x"]), float(rec["y"])))
                elif kind == "end":
                    end = rec
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                if isinstance(exc, TelemetryError):
                    raise
                raise TelemetryError(path, lineno, f"malformed {kind} record: {exc!r}") from exc
    if header is None:
        raise TelemetryError(path, 0, "missing header record")
    return Telemetry(header, tracks, collisions, end)


def plot_telemetry(tel: Telemetry, out) -> Path:
    """Walls, zones, per-robot paths, start (o) and goal (x) markers, collisions (*)."""
    plt.rcParams["svg.hashsalt"] = "bilevel-nav"
    h = tel.header
    xmin, ymin, xmax, ymax = h["bounds"]
    fig, ax = plt.subplots(figsize=(5, 5 * (ymax - ymin) / (xmax - xmin)))
    for name, region in sorted(h.get("zones", {}).items()):
        ax.add_patch(Polygon(region, closed=True, facecolor="0.9", edgecolor="0.7", lw=0.5, zorder=0))
    for x1, y1, x2, y2 in h["segments"]:
        ax.plot([x1, x2], [y1, y2], color="black", lw=2, solid_capstyle="round", zorder=1)
    for i, r in enumerate(sorted(h["robots"], key=lambda r: r["id"])):
        color = _COLORS[i % len(_COLORS)]
        track = tel.tracks.get(int(r["id"]), [])
        if len(track) > 1:
            xs, ys = zip(*track)
            ax.plot(xs, ys, color=color, lw=1.2, label=f"robot {r['id']}", zorder=2)
        sx, sy = r["start"][:2]
        ax.add_patch(Circle((sx, sy), r["radius"], fill=False, edgecolor=color, lw=0.8, zorder=3))
        ax.plot([r["goal"][0]], [r["goal"][1]], marker="x", color=color, ms=8, zorder=3)
    if tel.collisions:
        cx, cy = zip(*tel.collisions)
        ax.plot(cx, cy, linestyle="none", marker="*", color="red", ms=12, label="collision", zorder=4)
    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    title = f"{h.get('scenario', '')} seed {h.get('seed', '')} ({h.get('scheduling', '')}, {h.get('baseline', '')})"
    if tel.end:
        title += f": {tel.end.get('outcome')}"
    ax.set_title(title, fontsize=9)
    if tel.tracks and any(len(t) > 1 for t in tel.tracks.values()) or tel.collisions:
        ax.legend(loc="upper right", fontsize=7)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out
