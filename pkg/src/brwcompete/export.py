"""Writers for event logs (NDJSON), tables (CSV) and d=2 snapshots (PPM)."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import BLUE_CODE, RED_CODE, GenerationStats, LatticeState

WHITE = (255, 255, 255)
RED_RGB = (220, 30, 30)
BLUE_RGB = (30, 60, 220)
BLACK = (0, 0, 0)


def event_line(stats: GenerationStats, replication: Optional[int] = None) -> str:
    rec = {"generation": stats.generation}
    if replication is not None:
        rec["replication"] = replication
    rec.update(
        new_red=stats.new_red,
        new_blue=stats.new_blue,
        total_particles=stats.total_particles,
        red_particles=stats.red_particles,
        blue_particles=stats.blue_particles,
        max_radius_red=stats.max_radius_red,
        max_radius_blue=stats.max_radius_blue,
    )
    return json.dumps(rec, sort_keys=False, separators=(",", ":"))


def ndjson(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, separators=(",", ":"), default=str) + "\n" for r in records)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _canvas(half: int) -> np.ndarray:
    side = 2 * half + 1
    return np.full((side, side, 3), 255, dtype=np.uint8)


def ppm_bytes(pixels: np.ndarray) -> bytes:
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode() + pixels.tobytes()


def snapshot_pixels(state: LatticeState, half: Optional[int] = None) -> np.ndarray:
    """RGB array of a d=2 state; row 0 is the top (largest second coordinate)."""
    if state.dimension != 2:
        raise ValueError("pixmap snapshots need d=2")
    coords = state.codec.decode(state.keys)
    if half is None:
        half = int(np.abs(coords).max()) + 1 if coords.size else 1
    img = _canvas(half)
    inside = (np.abs(coords) <= half).all(axis=1)
    cols = coords[inside, 0] + half
    rows = half - coords[inside, 1]
    color = state.color[inside]
    img[rows[color == RED_CODE], cols[color == RED_CODE]] = RED_RGB
    img[rows[color == BLUE_CODE], cols[color == BLUE_CODE]] = BLUE_RGB
    return img


def snapshot_ppm(state: LatticeState, half: Optional[int] = None) -> bytes:
    return ppm_bytes(snapshot_pixels(state, half))


def _line(img: np.ndarray, x0: float, y0: float, x1: float, y1: float, rgb) -> None:
    n = int(max(abs(x1 - x0), abs(y1 - y0))) + 1
    for t in np.linspace(0.0, 1.0, n + 1):
        x = int(round(x0 + t * (x1 - x0)))
        y = int(round(y0 + t * (y1 - y0)))
        if 0 <= y < img.shape[0] and 0 <= x < img.shape[1]:
            img[y, x] = rgb


def shape_overlay(radial: dict, scale: float, half: int, base: Optional[np.ndarray] = None,
                  rgb=BLACK) -> np.ndarray:
    """Polygon through ``scale * radial[x] * x/|x|`` for each 2-d direction, by angle."""
    img = _canvas(half) if base is None else base.copy()
    pts = []
    for x, r in radial.items():
        norm = math.hypot(*x)
        pts.append((math.atan2(x[1], x[0]), scale * r * x[0] / norm, scale * r * x[1] / norm))
    pts.sort()
    for (_, ax, ay), (_, bx, by) in zip(pts, pts[1:] + pts[:1]):
        _line(img, ax + half, half - ay, bx + half, half - by, rgb)
    return img


def shape_overlay_ppm(profiles: dict, half: int = 60, base: Optional[np.ndarray] = None) -> bytes:
    """Overlay of named radial profiles (``"red"``/``"blue"``/other) on one canvas."""
    top = max((max(p.values(), default=0.0) for p in profiles.values()), default=0.0)
    scale = 0.95 * half / top if top > 0 else 1.0
    img = _canvas(half) if base is None else base
    palette = {"red": RED_RGB, "blue": BLUE_RGB}
    for name, radial in profiles.items():
        img = shape_overlay(radial, scale, half, img, palette.get(name, BLACK))
    return ppm_bytes(img)
