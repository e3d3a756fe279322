"""Planar convex geometry: half-planes, convex polygons, clipping.

Polygons are stored counterclockwise.  A polygon may degenerate to a
segment (two vertices) or a single point; the empty set is the empty
vertex list.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EPS = 1e-12


@dataclass(frozen=True)
class HalfPlane:
    """The closed set ``{p : normal . p <= offset}``."""

    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        nx, ny = (float(c) for c in self.normal)
        if nx == 0.0 and ny == 0.0:
            raise ValueError("half-plane normal must be nonzero")
        object.__setattr__(self, "normal", (nx, ny))
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2).copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def box(cls, xmin: float, xmax: float, ymin: float, ymax: float) -> "ConvexPolygon":
        return cls([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])

    @classmethod
    def regular(cls, n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> "ConvexPolygon":
        t = phase + 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    def __len__(self):
        return len(self.vertices)

    def area(self) -> float:
        return polygon_area(self)

    def centroid(self) -> np.ndarray:
        v = self.vertices
        if len(v) < 3 or polygon_area(self) == 0.0:
            return v.mean(axis=0) if len(v) else np.full(2, np.nan)
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a = cr.sum() / 2
        return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6 * a)


def polygon_area(poly: ConvexPolygon) -> float:
    """Shoelace area; zero for empty and degenerate polygons."""
    v = poly.vertices if isinstance(poly, ConvexPolygon) else np.asarray(poly, float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    a = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    return max(a, 0.0)


def contains(poly: ConvexPolygon, point, tol: float = 0.0) -> bool:
    """True iff ``point`` lies within ``tol`` of the closed polygon."""
    return bool(contains_points(poly, np.asarray(point, float).reshape(1, 2), tol)[0])


def contains_points(poly: ConvexPolygon, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Vectorized membership: boolean array, one entry per row of ``points``."""
    pts = np.asarray(points, float).reshape(-1, 2)
    v = poly.vertices
    if len(v) == 0:
        return np.zeros(len(pts), bool)
    if len(v) == 1:
        return np.hypot(*(pts - v[0]).T) <= tol
    if len(v) == 2:
        return _segment_distance(pts, v[0], v[1]) <= tol
    a = v
    b = np.roll(v, -1, axis=0)
    e = b - a
    elen = np.hypot(e[:, 0], e[:, 1])
    # signed distance to the left of each edge; inside means >= 0 for all edges
    rel = pts[:, None, :] - a[None, :, :]
    side = (e[None, :, 0] * rel[:, :, 1] - e[None, :, 1] * rel[:, :, 0]) / elen[None, :]
    inside = (side >= -tol).all(axis=1)
    if tol > 0 and not inside.all():
        # near a vertex the half-plane test is a slight over-approximation of
        # the tol-neighbourhood; refine with exact edge distances
        out = ~inside
        cand = out & (side >= -tol).sum(axis=1).astype(bool)
        if cand.any():
            d = np.min(np.stack([_segment_distance(pts[cand], a[k], b[k]) for k in range(len(a))]), axis=0)
            inside[np.flatnonzero(cand)[d <= tol]] = True
    return inside


def _segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(pts - a).T)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(pts - proj).T)


def clip_labeled(verts: list, labels: list, nx: float, ny: float, c: float, label, eps: float = EPS):
    """Clip a CCW polygon by ``nx*x + ny*y <= c``.

    ``labels[k]`` names the constraint that produced the edge from vertex k to
    vertex k+1.  Works on plain lists of (x, y) tuples; returns new lists.
    """
    n = len(verts)
    if n == 0:
        return verts, labels
    norm = (nx * nx + ny * ny) ** 0.5
    nx, ny, c = nx / norm, ny / norm, c / norm
    d = [nx * x + ny * y - c for x, y in verts]
    if max(d) <= eps:
        return verts, labels
    if min(d) > eps:
        return [], []
    if n == 1:
        return verts, labels
    out_v, out_l = [], []
    for k in range(n):
        a = verts[k]
        k1 = k + 1 if k + 1 < n else 0
        b = verts[k1]
        da, db = d[k], d[k1]
        ina, inb = da <= eps, db <= eps
        if ina:
            out_v.append(a)
            out_l.append(labels[k])
        if ina != inb:
            t = da / (da - db)
            p = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
            out_v.append(p)
            out_l.append(label if ina else labels[k])
    return _cleanup(out_v, out_l, eps)


def _cleanup(verts: list, labels: list, eps: float = EPS):
    """Drop duplicate and collinear vertices so the result is strictly convex."""
    changed = True
    while changed and len(verts) > 1:
        changed = False
        n = len(verts)
        keep_v, keep_l = [], []
        for k in range(n):
            a = verts[k]
            b = verts[(k + 1) % n]
            if abs(a[0] - b[0]) <= eps and abs(a[1] - b[1]) <= eps:
                changed = True
                continue
            keep_v.append(a)
            keep_l.append(labels[k])
        if not keep_v:
            keep_v, keep_l = [verts[0]], [labels[0]]
        verts, labels = keep_v, keep_l
        if len(verts) >= 3:
            # drop one vertex at a time: removing two neighbours of a tiny
            # edge together would cut off the corner they jointly represent
            n = len(verts)
            k, best = -1, eps
            for m in range(n):
                p, a, b = verts[m - 1], verts[m], verts[(m + 1) % n]
                cx, cy = b[0] - p[0], b[1] - p[1]
                cr = abs(cx * (a[1] - p[1]) - cy * (a[0] - p[0]))
                if cr <= best * max((cx * cx + cy * cy) ** 0.5, eps):
                    k, best = m, cr / max((cx * cx + cy * cy) ** 0.5, eps)
            if k >= 0:
                changed = True
                # merged edge p->b keeps the label of the longer of p->a, a->b
                p, a, b = verts[k - 1], verts[k], verts[(k + 1) % n]
                if abs(b[0] - a[0]) + abs(b[1] - a[1]) > abs(a[0] - p[0]) + abs(a[1] - p[1]):
                    labels = list(labels)
                    labels[k - 1] = labels[k]
                verts = verts[:k] + verts[k + 1:]
                labels = labels[:k] + labels[k + 1:]
            if len(verts) < 3:
                # flat polygon: collapse to the segment between extreme points
                verts, labels = _extreme_segment(verts, labels)
    if len(verts) == 2 and abs(verts[0][0] - verts[1][0]) <= eps and abs(verts[0][1] - verts[1][1]) <= eps:
        verts, labels = verts[:1], labels[:1]
    return verts, labels


def _extreme_segment(verts, labels):
    arr = np.asarray(verts)
    span = arr.max(axis=0) - arr.min(axis=0)
    ax = int(np.argmax(span))
    i, j = int(np.argmin(arr[:, ax])), int(np.argmax(arr[:, ax]))
    if i == j:
        return [verts[i]], [labels[i]]
    return [verts[i], verts[j]], [labels[i], labels[j]]


def halfplane_intersect(planes: Sequence[HalfPlane], bounding_box: ConvexPolygon) -> ConvexPolygon:
    """Intersection of ``planes`` clipped to ``bounding_box`` (possibly empty)."""
    verts = [tuple(p) for p in bounding_box.vertices.tolist()]
    labels = [None] * len(verts)
    verts, labels = _cleanup(verts, labels)
    for hp in planes:
        verts, labels = clip_labeled(verts, labels, hp.normal[0], hp.normal[1], hp.offset, hp)
        if not verts:
            break
    return ConvexPolygon(verts)


def minkowski_sum(p: ConvexPolygon, q: ConvexPolygon) -> ConvexPolygon:
    """Minkowski sum via the convex hull of pairwise vertex sums."""
    if p.is_empty or q.is_empty:
        return ConvexPolygon()
    pts = (p.vertices[:, None, :] + q.vertices[None, :, :]).reshape(-1, 2)
    return convex_hull(pts)


def convex_hull(points: np.ndarray) -> ConvexPolygon:
    """Andrew's monotone chain; returns a strictly convex CCW polygon."""
    pts = sorted(set(map(tuple, np.asarray(points, float).reshape(-1, 2).tolist())))
    if len(pts) <= 2:
        v, _ = _cleanup(list(pts), [None] * len(pts))
        return ConvexPolygon(v)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    v, _ = _cleanup(hull, [None] * len(hull))
    return ConvexPolygon(v)


def signed_area(vertices) -> float:
    v = np.asarray(vertices, float).reshape(-1, 2)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def is_strictly_convex(vertices, angle_tol: float = 1e-9) -> bool:
    """CCW polygon with every interior angle below ``pi - angle_tol``."""
    v = np.asarray(vertices, float).reshape(-1, 2)
    if len(v) < 3 or signed_area(v) <= 0:
        return False
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    cr = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = (e_in * e_out).sum(axis=1)
    turn = np.arctan2(cr, dot)  # exterior angle; interior = pi - turn
    return bool((turn > angle_tol).all())


def boundary_distance(vertices, points) -> np.ndarray:
    """Distance from each point to the closed polyline boundary of a polygon."""
    v = np.asarray(vertices, float).reshape(-1, 2)
    pts = np.asarray(points, float).reshape(-1, 2)
    d = np.full(len(pts), np.inf)
    for k in range(len(v)):
        d = np.minimum(d, _segment_distance(pts, v[k], v[(k + 1) % len(v)]))
    return d


def point_in_polygon(vertices, points) -> np.ndarray:
    """Even-odd test for simple (possibly nonconvex) polygons; boundary ambiguous."""
    v = np.asarray(vertices, float).reshape(-1, 2)
    pts = np.asarray(points, float).reshape(-1, 2)
    inside = np.zeros(len(pts), bool)
    x, y = pts[:, 0], pts[:, 1]
    for k in range(len(v)):
        (x1, y1), (x2, y2) = v[k], v[(k + 1) % len(v)]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xi)
    return inside
