"""Planar primitives on convex polygonal regions.

Points are plain ``(x, y)`` pairs (tuples or length-2 arrays). Regions are
convex polygons with counter-clockwise vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

EPS_GEOM = 1e-9


class Point(NamedTuple):
    x: float
    y: float


class Segment(NamedTuple):
    a: Point
    b: Point


class Circle(NamedTuple):
    center: Point
    radius: float


class GeometryError(ValueError):
    pass


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@dataclass(frozen=True)
class ConvexRegion:
    """A convex polygon with non-empty interior."""

    vertices: tuple[Point, ...]
    _arr: np.ndarray = field(init=False, repr=False, compare=False)
    _hp: tuple = field(init=False, repr=False, compare=False)

    def __init__(self, vertices: Sequence[Sequence[float]]):
        pts = tuple(Point(float(v[0]), float(v[1])) for v in vertices)
        if len(pts) < 3:
            raise GeometryError("a region needs at least 3 vertices")
        if not all(math.isfinite(c) for p in pts for c in p):
            raise GeometryError("vertex coordinates must be finite")
        n = len(pts)
        for i in range(n):
            o, a, b = pts[i - 1], pts[i], pts[(i + 1) % n]
            if _cross(o.x, o.y, a.x, a.y, b.x, b.y) < -EPS_GEOM:
                raise GeometryError(
                    "vertices must describe a convex polygon in counter-clockwise order"
                )
        object.__setattr__(self, "vertices", pts)
        object.__setattr__(self, "_arr", np.array(pts, dtype=float))
        if self.area <= EPS_GEOM**2:
            raise GeometryError("region has empty interior")
        object.__setattr__(self, "_hp", self._compute_halfplanes())

    @property
    def array(self) -> np.ndarray:
        return self._arr.copy()

    @property
    def edges(self) -> list[Segment]:
        v = self.vertices
        return [Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    @property
    def area(self) -> float:
        x, y = self._arr[:, 0], self._arr[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self._arr.min(axis=0)
        hi = self._arr.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit inward normals ``n`` and offsets ``c`` with ``n @ p - c >= 0`` inside.

        ``n @ p - c`` is the signed distance from ``p`` to each edge's line.
        Degenerate (zero-length) edges are skipped.
        """
        return self._hp

    def _compute_halfplanes(self):
        a = self._arr
        b = np.roll(a, -1, axis=0)
        d = b - a
        length = np.hypot(d[:, 0], d[:, 1])
        keep = length > EPS_GEOM
        normals = np.stack([-d[keep, 1], d[keep, 0]], axis=1) / length[keep, None]
        offsets = np.einsum("ij,ij->i", normals, a[keep])
        normals.setflags(write=False)
        offsets.setflags(write=False)
        return normals, offsets

    def scaled(self, factor: float) -> "ConvexRegion":
        return ConvexRegion(self._arr * factor)

    def transformed(self, rotation: np.ndarray, shift: Sequence[float] = (0.0, 0.0)) -> "ConvexRegion":
        pts = self._arr @ np.asarray(rotation, dtype=float).T + np.asarray(shift, dtype=float)
        if np.linalg.det(rotation) < 0:
            pts = pts[::-1]
        return ConvexRegion(pts)


def unit_square() -> ConvexRegion:
    return ConvexRegion([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def rectangle(x0: float, y0: float, x1: float, y1: float) -> ConvexRegion:
    return ConvexRegion([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def load_region(spec: str | Path) -> ConvexRegion:
    """Resolve a region name (``unit-square``) or read a vertex file.

    The file format is one ``x y`` pair per line, counter-clockwise; blank
    lines and lines starting with ``#`` are ignored.
    """
    if str(spec) == "unit-square":
        return unit_square()
    verts = []
    for line in Path(spec).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GeometryError(f"malformed vertex line: {line!r}")
        verts.append((float(parts[0]), float(parts[1])))
    return ConvexRegion(verts)


def format_points(points) -> str:
    return "".join(f"{p[0]:.17g} {p[1]:.17g}\n" for p in points)


def point_segment_distance(p, s) -> float:
    """Distance from ``p`` to the closed segment ``s``."""
    (ax, ay), (bx, by) = s
    px, py = p
    dx, dy = bx - ax, by - ay
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / len2
    if t < 0.0:
        return math.hypot(px - ax, py - ay)
    if t > 1.0:
        return math.hypot(px - bx, py - by)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def boundary_distance(p, q: ConvexRegion) -> float:
    return min(point_segment_distance(p, e) for e in q.edges)


def boundary_distances(points: np.ndarray, q: ConvexRegion) -> np.ndarray:
    """Vectorized :func:`boundary_distance` over an ``(n, 2)`` array."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a = q._arr
    b = np.roll(a, -1, axis=0)
    d = b - a
    len2 = np.einsum("ij,ij->i", d, d)
    rel = pts[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("nij,ij->ni", rel, d) / len2
    t = np.where(len2 > 0, np.clip(t, 0.0, 1.0), 0.0)
    foot = a[None] + t[..., None] * d[None]
    diff = pts[:, None, :] - foot
    return np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)


def interior_margins(points: np.ndarray, q: ConvexRegion, eps: float = EPS_GEOM) -> np.ndarray:
    """Boundary distance of points inside ``q``; ``-inf`` for points outside.

    Inside a convex polygon the distance to the boundary equals the smallest
    distance to an edge's supporting line.
    """
    normals, offsets = q._hp
    s = np.asarray(points, dtype=float).reshape(-1, 2) @ normals.T - offsets
    m = s.min(axis=1)
    return np.where(m >= -eps, np.maximum(m, 0.0), -np.inf)


def contains(q: ConvexRegion, p, eps: float = EPS_GEOM) -> bool:
    normals, offsets = q.halfplanes()
    return bool(np.all(normals @ np.asarray(p, dtype=float) - offsets >= -eps))


def contains_many(q: ConvexRegion, points: np.ndarray, eps: float = EPS_GEOM) -> np.ndarray:
    normals, offsets = q.halfplanes()
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.all(pts @ normals.T - offsets >= -eps, axis=1)


def _dedupe(points: list[tuple[float, float]], eps: float) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if out and math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) < eps:
            continue
        out.append(p)
    while len(out) > 1 and math.hypot(out[0][0] - out[-1][0], out[0][1] - out[-1][1]) < eps:
        out.pop()
    return out


def clip_halfplane(q: ConvexRegion, boundary_point, normal, eps: float = EPS_GEOM) -> ConvexRegion | None:
    """Keep the part of ``q`` where ``(p - boundary_point) . normal <= 0``.

    Returns ``None`` when nothing with positive area remains.
    """
    nx, ny = float(normal[0]), float(normal[1])
    norm = math.hypot(nx, ny)
    if norm == 0.0:
        raise GeometryError("clip normal must be non-zero")
    nx, ny = nx / norm, ny / norm
    bx, by = float(boundary_point[0]), float(boundary_point[1])

    verts = q.vertices
    side = [(v.x - bx) * nx + (v.y - by) * ny for v in verts]
    if all(s <= eps for s in side):
        return q
    if all(s >= -eps for s in side):
        return None

    out: list[tuple[float, float]] = []
    n = len(verts)
    for i in range(n):
        cur, nxt = verts[i], verts[(i + 1) % n]
        sc, sn = side[i], side[(i + 1) % n]
        if sc <= 0.0:
            out.append((cur.x, cur.y))
        if (sc < 0.0 < sn) or (sn < 0.0 < sc):
            t = sc / (sc - sn)
            out.append((cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)))
    out = _dedupe(out, eps)
    if len(out) < 3:
        return None
    try:
        return ConvexRegion(out)
    except GeometryError:
        return None


def voronoi_cell(positions, u: int, q: ConvexRegion) -> ConvexRegion:
    """Clipped Voronoi cell of generator ``u`` (0-based) inside ``q``."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    xu = pts[u]
    cell: ConvexRegion | None = q
    for v, xv in enumerate(pts):
        if v == u:
            continue
        d = xv - xu
        if math.hypot(d[0], d[1]) == 0.0:
            raise GeometryError(f"cars {u} and {v} coincide; bisector undefined")
        cell = clip_halfplane(cell, 0.5 * (xu + xv), d)
        if cell is None:
            raise GeometryError(f"Voronoi cell of car {u} is empty; is it inside the region?")
    return cell


def voronoi_cells(positions, q: ConvexRegion) -> list[ConvexRegion]:
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    return [voronoi_cell(pts, u, q) for u in range(len(pts))]


def chebyshev_center(q: ConvexRegion) -> Circle:
    """Largest inscribed circle, from the LP max r s.t. n_i.p - c_i >= r."""
    normals, offsets = q.halfplanes()
    if len(normals) < 3:
        raise GeometryError("degenerate region")
    a_ub = np.hstack([-normals, np.ones((len(normals), 1))])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=-offsets,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    if res.status != 0:
        raise GeometryError(f"Chebyshev LP failed: {res.message}")
    cx, cy, r = res.x
    if r <= EPS_GEOM:
        raise GeometryError("region is too thin to hold a circle")
    # the LP's radius is re-measured against the true boundary
    center = Point(float(cx), float(cy))
    return Circle(center, boundary_distance(center, q))
