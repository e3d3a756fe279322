"""Piecewise-linear functions on planar node sets and their Monge-Ampere measures.

A :class:`PLFunction` is a cloud of nodal values.  Used as a convex function
it stands for the lower convex envelope of the lifted points
``(x_i, phi_i)``; its subdifferential at a node is the set of slopes ``m``
with ``phi_j >= phi_i + m . (x_j - x_i)`` for every other node ``j``.  The
Monge-Ampere measure is atomic, with the area of that slope polygon sitting
on each interior node.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from .errors import BoundaryNode, InvalidNodeSet
from .geometry import (
    ConvexPolygon,
    boundary_distance,
    clip_labeled,
    contains_points,
    is_strictly_convex,
    point_in_polygon,
    polygon_area,
    signed_area,
)

DISTINCT_TOL = 1e-10
ON_BOUNDARY_TOL = 1e-9
CLIP_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Planar nodes with boundary flags and the polygonal domain they discretize.

    ``domain`` holds the CCW vertices of a simple polygon; it need not be
    convex.
    """

    points: np.ndarray
    boundary: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        bnd = np.array(self.boundary, dtype=bool).reshape(-1)
        dom = np.array(self.domain, dtype=float).reshape(-1, 2)
        if len(bnd) != len(pts):
            raise InvalidNodeSet("boundary flags and points differ in length")
        if not np.isfinite(pts).all():
            raise InvalidNodeSet("node coordinates must be finite")
        if len(dom) < 3:
            raise InvalidNodeSet("domain polygon needs at least three vertices")
        if signed_area(dom) < 0:
            dom = dom[::-1].copy()
        if bnd.sum() < 3:
            raise InvalidNodeSet("at least three boundary nodes are required")
        d = boundary_distance(dom, pts[bnd])
        if (d >= ON_BOUNDARY_TOL).any():
            k = int(np.flatnonzero(bnd)[np.argmax(d)])
            raise InvalidNodeSet(f"boundary node {k} is {d.max():.3g} away from the domain boundary")
        if len(pts) > 1:
            dist, _ = cKDTree(pts).query(pts, k=2)
            if dist[:, 1].min() <= DISTINCT_TOL:
                raise InvalidNodeSet("nodes are not pairwise distinct")
        for name, arr in (("points", pts), ("boundary", bnd), ("domain", dom)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.points)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @property
    def domain_is_strictly_convex(self) -> bool:
        return is_strictly_convex(self.domain)

    @cached_property
    def _normalization(self) -> tuple[np.ndarray, float]:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        center = 0.5 * (lo + hi)
        scale = max(0.5 * float((hi - lo).max()), 1e-300)
        return center, scale

    @cached_property
    def normalized(self) -> np.ndarray:
        """Coordinates mapped affinely into [-1, 1]^2 (uniform scaling)."""
        c, s = self._normalization
        out = (self.points - c) / s
        out.setflags(write=False)
        return out

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Delaunay neighbours, used as the first batch of clipping constraints."""
        n = len(self.points)
        try:
            tri = Delaunay(self.normalized)
        except QhullError:
            return [np.delete(np.arange(n), i) for i in range(n)]
        indptr, indices = tri.vertex_neighbor_vertices
        return [indices[indptr[i]:indptr[i + 1]] for i in range(n)]

    # ---- constructors -------------------------------------------------
    @classmethod
    def grid(cls, n: int, xlim=(0.0, 1.0), ylim=None, ny: int | None = None) -> "NodeSet":
        """Uniform ``n x ny`` lattice over a rectangle, edge nodes flagged."""
        ylim = xlim if ylim is None else ylim
        ny = n if ny is None else ny
        xs = np.linspace(xlim[0], xlim[1], n)
        ys = np.linspace(ylim[0], ylim[1], ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        I, J = np.meshgrid(np.arange(n), np.arange(ny), indexing="ij")
        bnd = ((I == 0) | (I == n - 1) | (J == 0) | (J == ny - 1)).ravel()
        dom = [(xlim[0], ylim[0]), (xlim[1], ylim[0]), (xlim[1], ylim[1]), (xlim[0], ylim[1])]
        return cls(pts, bnd, dom)

    @classmethod
    def disk(cls, n_sides: int = 16, n_rings: int = 1, radius: float = 1.0, center=(0.0, 0.0)) -> "NodeSet":
        """Center node plus ``n_rings`` concentric regular ``n_sides``-gons; outer ring is boundary."""
        c = np.asarray(center, float)
        t = 2 * np.pi * np.arange(n_sides) / n_sides
        ring = np.column_stack([np.cos(t), np.sin(t)])
        pts = [c[None, :]]
        for k in range(1, n_rings + 1):
            pts.append(c + radius * k / n_rings * ring)
        pts = np.vstack(pts)
        bnd = np.zeros(len(pts), bool)
        bnd[-n_sides:] = True
        return cls(pts, bnd, c + radius * ring)

    @classmethod
    def inscribed(cls, vertices, n: int, xlim=(0.0, 1.0), ylim=None) -> "NodeSet":
        """Polygon vertices as boundary nodes plus the lattice points well inside.

        Lattice points closer than a quarter spacing to the boundary are
        dropped, so a strictly convex polygon yields a domain on which any
        boundary data is admissible.
        """
        ylim = xlim if ylim is None else ylim
        dom = np.asarray(vertices, float).reshape(-1, 2)
        xs = np.linspace(xlim[0], xlim[1], n)
        ys = np.linspace(ylim[0], ylim[1], n)
        h = min(xs[1] - xs[0], ys[1] - ys[0])
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        lat = np.column_stack([X.ravel(), Y.ravel()])
        keep = point_in_polygon(dom, lat) & (boundary_distance(dom, lat) > 0.25 * h)
        pts = np.vstack([dom, lat[keep]])
        bnd = np.zeros(len(pts), bool)
        bnd[: len(dom)] = True
        return cls(pts, bnd, dom)

    @classmethod
    def lshape(cls, n: int, xlim=(0.0, 1.0)) -> "NodeSet":
        """Lattice on the square minus its upper-right quadrant (``n`` odd)."""
        if n % 2 == 0:
            raise ValueError("L-shaped lattice needs an odd node count per side")
        a, b = xlim
        m = 0.5 * (a + b)
        xs = np.linspace(a, b, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        keep = ~((pts[:, 0] > m + 1e-12) & (pts[:, 1] > m + 1e-12))
        pts = pts[keep]
        dom = np.array([(a, a), (b, a), (b, m), (m, m), (m, b), (a, b)])
        bnd = boundary_distance(dom, pts) < ON_BOUNDARY_TOL
        return cls(pts, bnd, dom)


@dataclass(frozen=True, eq=False)
class PLFunction:
    nodes: NodeSet
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if len(v) != len(self.nodes):
            raise ValueError("one value per node required")
        if not np.isfinite(v).all():
            raise ValueError("nodal values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, nodes: NodeSet, func: Callable) -> "PLFunction":
        x, y = nodes.points.T
        return cls(nodes, np.broadcast_to(np.asarray(func(x, y), float), x.shape))

    def with_values(self, values) -> "PLFunction":
        return PLFunction(self.nodes, values)

    def __add__(self, other):
        if isinstance(other, PLFunction):
            if other.nodes is not self.nodes:
                raise ValueError("functions live on different node sets")
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + float(other))

    __radd__ = __add__

    def __neg__(self):
        return self.with_values(-self.values)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def envelope(self, query=None) -> np.ndarray:
        """Lower convex envelope of the nodal cloud at ``query`` (default: the nodes)."""
        q = self.nodes.points if query is None else query
        return lower_envelope(self.nodes.points, self.values, q)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Nonnegative masses on the nodes of a node set; boundary nodes carry none."""

    nodes: NodeSet
    masses: np.ndarray

    def __post_init__(self):
        m = np.array(self.masses, dtype=float).reshape(-1)
        if len(m) != len(self.nodes):
            raise ValueError("one mass per node required")
        if not np.isfinite(m).all() or (m < 0).any():
            raise ValueError("masses must be finite and nonnegative")
        if (m[self.nodes.boundary] != 0).any():
            raise ValueError("boundary nodes carry no mass")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @classmethod
    def zeros(cls, nodes: NodeSet) -> "AtomicMeasure":
        return cls(nodes, np.zeros(len(nodes)))

    @classmethod
    def from_interior(cls, nodes: NodeSet, interior_masses) -> "AtomicMeasure":
        m = np.zeros(len(nodes))
        m[nodes.interior] = interior_masses
        return cls(nodes, m)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(self.nodes, self.masses + other.masses)


# ---------------------------------------------------------------------------
# lower convex envelope of a lifted point cloud


def lower_envelope(points, values, query) -> np.ndarray:
    """Evaluate the lower convex envelope of ``{(points_i, values_i)}`` at ``query``.

    Computed as the maximum over the lower facets of the 3-D convex hull.  A
    high apex above the centroid keeps the hull full-dimensional when the
    cloud is coplanar.  Queries outside the planar hull get the extrapolated
    maximum of facet planes.
    """
    pts = np.asarray(points, float).reshape(-1, 2)
    vals = np.asarray(values, float).reshape(-1)
    q = np.asarray(query, float).reshape(-1, 2)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    c, s = 0.5 * (lo + hi), max(0.5 * float((hi - lo).max()), 1e-300)
    vmin, vmax = float(vals.min()), float(vals.max())
    vs = max(vmax - vmin, 1.0)
    lifted = np.column_stack([(pts - c) / s, (vals - vmin) / vs])
    apex = np.array([[lifted[:, 0].mean(), lifted[:, 1].mean(), 10.0 + lifted[:, 2].max()]])
    hull = ConvexHull(np.vstack([lifted, apex]))
    eq = hull.equations
    low = eq[eq[:, 2] < -1e-12]
    qn = (q - c) / s
    z = -(qn @ low[:, :2].T + low[:, 3]) / low[:, 2]
    return z.max(axis=1) * vs + vmin


# ---------------------------------------------------------------------------
# subdifferentials


def _local_subdifferential(xs: np.ndarray, vals: np.ndarray, i: int, candidates, max_doublings: int = 60):
    """Slope polygon at node ``i`` in normalized coordinates.

    Returns ``(vertices, labels)`` as lists; ``labels[k]`` is the index of the
    node whose constraint produced edge ``k`` (``None`` for the bounding box).
    The box starts at a difference-quotient estimate, which skinny envelope
    facets can exceed, so it is doubled until no edge comes from it.  Nodes
    on the hull of the cloud have unbounded slope sets and keep the last box.
    """
    L = _half_width(xs, vals, i)
    for _ in range(max_doublings):
        verts, labels = _clip_subdifferential(xs, vals, i, candidates, L)
        if all(lab is not None for lab in labels):
            break
        L *= 2
    return verts, labels


def _clip_subdifferential(xs: np.ndarray, vals: np.ndarray, i: int, candidates, half_width: float):
    """Clip the box ``[-half_width, half_width]^2`` by every node's constraint.

    Clips first by ``candidates`` and then by every other constraint violated
    at a vertex of the current polygon, so the result is the exact
    intersection over all nodes within the box.
    """
    xi, vi = xs[i], vals[i]
    L = half_width
    verts = [(-L, -L), (L, -L), (L, L), (-L, L)]
    labels = [None] * 4
    D = xs - xi
    b = vals - vi
    for j in candidates:
        if j == i:
            continue
        verts, labels = clip_labeled(verts, labels, D[j, 0], D[j, 1], b[j], int(j), CLIP_EPS)
        if not verts:
            return verts, labels
    norms = np.hypot(D[:, 0], D[:, 1])
    norms[i] = 1.0
    Dn = D / norms[:, None]
    bn = b / norms
    bn[i] = np.inf
    seen = set(int(j) for j in candidates)
    while True:
        V = np.asarray(verts)
        viol = (V @ Dn.T - bn).max(axis=0)
        bad = np.flatnonzero(viol > CLIP_EPS)
        if len(bad) == 0:
            return verts, labels
        for j in bad[np.argsort(-viol[bad])]:
            j = int(j)
            seen.add(j)
            verts, labels = clip_labeled(verts, labels, D[j, 0], D[j, 1], b[j], j, CLIP_EPS)
            if not verts:
                return verts, labels


def _half_width(xs: np.ndarray, vals: np.ndarray, i: int) -> float:
    d = np.hypot(*(xs - xs[i]).T)
    d[i] = np.inf
    return float(np.abs(vals - vals[i]).max() / d.min() + 1.0)


def _check_interior(f: PLFunction, i: int):
    if f.nodes.boundary[i]:
        raise BoundaryNode(f"node {i} is a boundary node")


def subdifferential_at_node(f: PLFunction, node_index: int) -> ConvexPolygon:
    """Slopes of all supporting planes of the nodal envelope at an interior node."""
    i = int(node_index)
    _check_interior(f, i)
    nodes = f.nodes
    xs = nodes.normalized
    verts, _ = _local_subdifferential(xs, f.values, i, nodes.neighbors[i])
    _, s = nodes._normalization
    return ConvexPolygon(np.asarray(verts, float).reshape(-1, 2) / s)


def normal_mapping_image(f: PLFunction, node_subset: Sequence[int]) -> list[ConvexPolygon]:
    return [subdifferential_at_node(f, i) for i in node_subset]


def ma_measure(f: PLFunction) -> AtomicMeasure:
    """Monge-Ampere measure: the slope-polygon area on every interior node."""
    m = np.zeros(len(f.nodes))
    for i in f.nodes.interior:
        m[i] = polygon_area(subdifferential_at_node(f, i))
    return AtomicMeasure(f.nodes, m)


def area_and_gradient(nodes: NodeSet, vals: np.ndarray, i: int):
    """Atom at node ``i`` and its partial derivatives with respect to nodal values.

    Raising ``vals[j]`` pushes constraint ``j`` outward by ``1/|x_j - x_i|``
    per unit, so ``d area / d vals[j] = edge_length_j / |x_j - x_i|``; the
    derivative with respect to ``vals[i]`` is minus their sum.  Returned in
    physical gradient units: ``(area, {j: dA/dval_j})``.
    """
    xs = nodes.normalized
    _, s = nodes._normalization
    verts, labels = _local_subdifferential(xs, vals, i, nodes.neighbors[i])
    if len(verts) < 3:
        return 0.0, {}
    V = np.asarray(verts)
    area = polygon_area(V) / s**2
    grads = {}
    n = len(V)
    for k in range(n):
        j = labels[k]
        if j is None:
            continue
        a, b = V[k], V[(k + 1) % n]
        ell = float(np.hypot(*(b - a)))
        dist = float(np.hypot(*(xs[j] - xs[i])))
        grads[j] = grads.get(j, 0.0) + ell / dist / s**2
    return area, grads


def is_nodal_convex(f: PLFunction, tol: float = 1e-10) -> bool:
    """True iff no node floats more than ``tol`` above the envelope of the cloud."""
    env = f.envelope()
    return bool((f.values - env <= tol).all())


def convex_envelope_function(f: PLFunction) -> PLFunction:
    """The nodal-convex function obtained by dropping every node onto the envelope."""
    return f.with_values(np.minimum(f.values, f.envelope()))


def dual_cell_areas(nodes: NodeSet) -> np.ndarray:
    """Area of each node's Voronoi cell clipped to a convex domain."""
    if not is_strictly_convex(nodes.domain, 0.0):
        raise ValueError("dual cells are only defined here for convex domains")
    xs = nodes.points
    dom = [tuple(p) for p in nodes.domain.tolist()]
    out = np.zeros(len(xs))
    for i in range(len(xs)):
        verts, labels = dom, [None] * len(dom)
        # Voronoi cells are cut out by the bisectors with Delaunay neighbours
        for j in nodes.neighbors[i]:
            d = xs[j] - xs[i]
            c = float(d @ (0.5 * (xs[j] + xs[i])))
            verts, labels = clip_labeled(verts, labels, d[0], d[1], c, None, CLIP_EPS)
        out[i] = polygon_area(np.asarray(verts).reshape(-1, 2))
    return out


def union_contains(polys: Sequence[ConvexPolygon], points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    pts = np.asarray(points, float).reshape(-1, 2)
    hit = np.zeros(len(pts), bool)
    for P in polys:
        rest = ~hit
        if not rest.any():
            break
        hit[rest] = contains_points(P, pts[rest], tol)
    return hit


def sample_union(polys: Sequence[ConvexPolygon], n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from a union of interior-disjoint convex polygons."""
    tris = []
    for P in polys:
        v = P.vertices
        for k in range(1, len(v) - 1):
            tris.append((v[0], v[k], v[k + 1]))
    if not tris:
        return np.zeros((0, 2))
    T = np.asarray(tris)
    e1, e2 = T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]
    areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if areas.sum() <= 0:
        return np.zeros((0, 2))
    k = rng.choice(len(T), size=n, p=areas / areas.sum())
    r1, r2 = rng.random(n), rng.random(n)
    flip = r1 + r2 > 1
    r1[flip], r2[flip] = 1 - r1[flip], 1 - r2[flip]
    return T[k, 0] + r1[:, None] * e1[k] + r2[:, None] * e2[k]
