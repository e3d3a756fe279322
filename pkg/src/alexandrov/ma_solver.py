"""Dirichlet problems for convex and concave Alexandrov solutions on node sets.

The solver is a nodal-lifting (Oliker-Prussner) iteration.  It starts from a
convex subsolution whose atoms all exceed the target and only ever raises
nodal values: a Gauss-Seidel sweep lifts each interior node until its atom
matches the target, and each sweep is followed by a Newton step on the atom
map that keeps the iterate a subsolution.  Newton's corrections are
nonnegative because the Jacobian of the atom map is minus an M-matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import HypothesisViolated, InfeasibleDomain, NotConverged
from .comparison import positive_part_density
from .fields import GridField
from .geometry import boundary_distance, contains_points, convex_hull, polygon_area
from .ma_core import (
    AtomicMeasure,
    NodeSet,
    PLFunction,
    _local_subdifferential,
    area_and_gradient,
    dual_cell_areas,
    lower_envelope,
    ma_measure,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Target measure ``target`` and boundary data ``boundary_values`` on ``nodes``.

    ``boundary_values`` is indexed like ``nodes.boundary_indices``.
    """

    nodes: NodeSet
    target: AtomicMeasure
    boundary_values: np.ndarray

    def __post_init__(self):
        g = np.array(self.boundary_values, dtype=float).reshape(-1)
        if len(g) == len(self.nodes):
            g = g[self.nodes.boundary]
        if len(g) != len(self.nodes.boundary_indices):
            raise ValueError("one boundary value per boundary node required")
        if not np.isfinite(g).all():
            raise ValueError("boundary values must be finite")
        if self.target.nodes is not self.nodes:
            raise ValueError("target measure lives on a different node set")
        g.setflags(write=False)
        object.__setattr__(self, "boundary_values", g)

    @classmethod
    def from_functions(cls, nodes: NodeSet, target, g) -> "DirichletProblem":
        """Build from a measure (or interior masses) and a boundary function ``g(x, y)``."""
        if not isinstance(target, AtomicMeasure):
            target = AtomicMeasure.from_interior(nodes, target)
        xb = nodes.points[nodes.boundary]
        return cls(nodes, target, np.broadcast_to(np.asarray(g(xb[:, 0], xb[:, 1]), float), len(xb)))

    def check_domain(self):
        if not self.nodes.domain_is_strictly_convex:
            raise InfeasibleDomain("Dirichlet solves need a strictly convex polygonal domain")

    def check_boundary_data(self, tol: float = 1e-9):
        """Boundary values must be the trace of a convex function.

        Nodes in the middle of a straight boundary edge can violate this even
        on a convex domain, e.g. a concave profile along one side of a square.
        """
        xb = self.nodes.points[self.nodes.boundary]
        g = self.boundary_values
        excess = g - lower_envelope(xb, g, xb)
        k = int(np.argmax(excess))
        if excess[k] > tol * max(1.0, float(np.abs(g).max())):
            node = int(self.nodes.boundary_indices[k])
            raise HypothesisViolated(
                f"boundary value at node {node} lies {excess[k]:.3g} above the convex envelope of the boundary data"
            )


@dataclass
class SolverReport:
    iterations: int = 0
    max_residual: float = np.inf
    converged: bool = False
    max_update: float = np.inf
    newton_steps: int = 0
    history: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "max_residual": self.max_residual,
            "converged": self.converged,
        }


class _AtomMap:
    """Atoms of a nodal cloud with one value varied at a time."""

    def __init__(self, nodes: NodeSet, vals: np.ndarray):
        self.nodes = nodes
        self.xs = nodes.normalized
        self.scale2 = nodes._normalization[1] ** 2
        self.vals = vals

    def atom(self, i: int, t: float | None = None) -> float:
        vals = self.vals
        old = vals[i]
        if t is not None:
            vals[i] = t
        try:
            verts, _ = _local_subdifferential(self.xs, vals, i, self.nodes.neighbors[i])
        finally:
            vals[i] = old
        if len(verts) < 3:
            return 0.0
        return polygon_area(np.asarray(verts)) / self.scale2

    def atoms(self, idx) -> np.ndarray:
        return np.array([self.atom(i) for i in idx])


def _initial_subsolution(nodes: NodeSet, mu: np.ndarray, g: np.ndarray):
    """Boundary-data envelope plus the flattest paraboloid dominating every target atom.

    The lower envelope of the boundary data is the zero-target solution and an
    upper bound for every convex function with those boundary values.  Adding
    ``K(|x - c|^2 - R^2)`` (nonpositive on the nodes) lowers interior nodes and
    adds at least the paraboloid's own atoms, so doubling ``K`` until those
    dominate ``mu`` yields a subsolution.
    """
    bidx, iidx = nodes.boundary_indices, nodes.interior
    upper = np.empty(len(nodes))
    upper[bidx] = g
    upper[iidx] = lower_envelope(nodes.points[bidx], g, nodes.points[iidx])
    if not (mu[iidx] > 0).any():
        return upper.copy(), upper, 0.0
    center = nodes.points.mean(axis=0)
    r2 = ((nodes.points - center) ** 2).sum(axis=1)
    bump = r2 - r2.max()
    K = 0.5 * np.sqrt(mu[iidx].max() / max(_min_cell_area(nodes), 1e-300))
    for _ in range(200):
        vals = upper.copy()
        vals[iidx] += K * bump[iidx]
        atoms = _AtomMap(nodes, vals).atoms(iidx)
        if (atoms >= mu[iidx]).all():
            return vals, upper, K
        K *= 2.0
    raise RuntimeError("could not construct an initial subsolution")


def _min_cell_area(nodes: NodeSet) -> float:
    # the paraboloid K|x|^2 has atoms of at least (2K)^2 times the smallest dual cell
    d, _ = cKDTree(nodes.points).query(nodes.points, k=2)
    return float(d[:, 1].min() ** 2 / 4)


def _lift_node(amap: _AtomMap, i: int, target: float, tol: float) -> float:
    """Smallest value >= the current one at which atom ``i`` drops to ``target``."""
    t0 = float(amap.vals[i])
    a0 = amap.atom(i)
    if a0 <= target:
        return t0
    step = max(np.sqrt(a0) * 0.25, 1e-12)
    hi = t0 + step
    while amap.atom(i, hi) > target:
        step *= 2.0
        hi = t0 + step
    if target > 0:
        # sqrt of the atom is close to affine in the lifted value
        f = lambda t: np.sqrt(amap.atom(i, t)) - np.sqrt(target)
        return brentq(f, t0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    lo = t0
    while hi - lo > tol / 10:
        mid = 0.5 * (lo + hi)
        if amap.atom(i, mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def _newton_direction(nodes: NodeSet, vals: np.ndarray, mu: np.ndarray, cushion: float = 0.0):
    iidx = nodes.interior
    pos = {int(i): k for k, i in enumerate(iidx)}
    rows, cols, data = [], [], []
    resid = np.zeros(len(iidx))
    diag = np.zeros(len(iidx))
    for k, i in enumerate(iidx):
        a, grads = area_and_gradient(nodes, vals, int(i))
        resid[k] = a - mu[i]
        for j, gj in grads.items():
            diag[k] -= gj
            if j in pos:
                rows.append(k)
                cols.append(pos[j])
                data.append(gj)
    active = diag < -1e-14
    if not active.any():
        return None, resid
    J = sp.csr_matrix((data, (rows, cols)), shape=(len(iidx), len(iidx))) + sp.diags(diag)
    ia = np.flatnonzero(active)
    Ja = J[ia][:, ia].tocsc()
    delta = np.zeros(len(iidx))
    try:
        delta[ia] = spla.spsolve(Ja, cushion - resid[ia])
    except RuntimeError:
        return None, resid
    if not np.isfinite(delta).all():
        return None, resid
    return np.maximum(delta, 0.0), resid


def solve_convex(p: DirichletProblem, tol: float = 1e-8, max_iters: int = 5000, raise_on_failure: bool = True):
    """Convex solution of ``M u = target`` with ``u = g`` on boundary nodes.

    Returns ``(PLFunction, SolverReport)``.  Raises :class:`NotConverged` after
    ``max_iters`` outer iterations unless ``raise_on_failure`` is false.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p.check_domain()
    p.check_boundary_data()
    nodes = p.nodes
    iidx = nodes.interior
    mu = p.target.masses
    vals, upper, K = _initial_subsolution(nodes, mu, p.boundary_values)
    log.debug("initial paraboloid steepness %g", K)
    amap = _AtomMap(nodes, vals)
    report = SolverReport()
    resid = amap.atoms(iidx) - mu[iidx]
    report.max_residual = float(np.abs(resid).max()) if len(iidx) else 0.0
    if report.max_residual < tol:
        report.converged, report.max_update = True, 0.0
        return PLFunction(nodes, vals), report
    slack = 1e-12 * max(1.0, float(np.abs(upper).max()))
    theta = 0.25
    for it in range(1, max_iters + 1):
        before = vals.copy()
        # Newton aims slightly above the target so that second-order losses
        # keep the iterate a subsolution; the cushion shrinks with the residual
        rmax = float(resid.max())
        cushion = theta * rmax if rmax >= tol else 0.0
        delta, _ = _newton_direction(nodes, vals, mu, cushion=cushion)
        accepted = False
        if delta is not None:
            lam = 1.0
            while lam >= 1.0 / 64:
                trial = vals.copy()
                trial[iidx] += lam * delta
                r = _AtomMap(nodes, trial).atoms(iidx) - mu[iidx]
                if r.min() >= -tol / 10:
                    vals[:] = trial
                    resid = r
                    accepted = True
                    report.newton_steps += 1
                    break
                lam *= 0.5
            log.debug("newton step lambda=%g accepted=%s theta=%g", lam, accepted, theta)
        if accepted and lam == 1.0:
            theta = max(theta * 0.5, 1e-4)
        elif accepted:
            theta = min(0.5, theta * 2)
        else:
            theta = min(0.5, theta * 4)
            for i in iidx:
                vals[i] = max(vals[i], _lift_node(amap, int(i), float(mu[i]), tol))
            resid = amap.atoms(iidx) - mu[iidx]
        # a zero-target node pushed above the envelope of the others keeps a
        # zero atom; pull it back so the iterate stays nodal-convex.  The
        # envelope only rises with the values, so this never undoes a lift.
        env = lower_envelope(nodes.points, vals, nodes.points[iidx])
        vals[iidx] = np.minimum(vals[iidx], env)
        update = vals - before
        if update.min() < -slack:
            raise AssertionError("nodal lifting decreased a value")
        if (vals[iidx] > upper[iidx] + slack + tol).any():
            raise AssertionError("iterate exceeded the boundary-data envelope")
        report.iterations = it
        report.max_update = float(update.max())
        report.max_residual = float(np.abs(resid).max())
        report.history.append((report.max_update, report.max_residual))
        log.debug("iter %d: update %.3e residual %.3e", it, report.max_update, report.max_residual)
        if report.max_update < tol / 10 and report.max_residual < tol:
            report.converged = True
            break
    if not report.converged and raise_on_failure:
        raise NotConverged(report)
    return PLFunction(nodes, vals), report


def solve_concave(p: DirichletProblem, tol: float = 1e-8, max_iters: int = 5000, raise_on_failure: bool = True):
    """Concave solution ``u`` with ``M(-u) = target``, by negating the convex problem."""
    neg = DirichletProblem(p.nodes, p.target, -p.boundary_values)
    f, report = solve_convex(neg, tol, max_iters, raise_on_failure)
    return -f, report


@dataclass
class EnvelopePair:
    conv: PLFunction
    conc: PLFunction
    conv_report: SolverReport
    conc_report: SolverReport
    phi: PLFunction

    def __iter__(self):
        yield self.conv
        yield self.conc

    def sandwich_violation(self) -> float:
        """Largest amount by which ``conv <= phi <= conc`` fails at a node (<= 0 if it holds)."""
        a = self.conv.values - self.phi.values
        b = self.phi.values - self.conc.values
        return float(max(a.max(), b.max()))


def grid_nodeset(field: GridField) -> NodeSet:
    """Node set on the in-domain grid points of a field with a convex mask."""
    pts = field.points[field.mask]
    hull = convex_hull(pts)
    # every lattice point of the hull must be in the mask, else the domain is not convex
    X, Y = field.coords()
    in_hull = contains_points(hull, np.column_stack([X.ravel(), Y.ravel()]), 1e-9 * field.h).reshape(X.shape)
    if (in_hull & ~field.mask).any():
        raise InfeasibleDomain("field mask is not convex")
    bnd = boundary_distance(hull.vertices, pts) < 1e-9 * max(1.0, field.h)
    return NodeSet(pts, bnd, hull.vertices)


def _grid_targets(field: GridField, nodes: NodeSet):
    dens_pos, dens_neg = positive_part_density(field)
    areas = dual_cell_areas(nodes)
    pos = np.where(nodes.boundary, 0.0, dens_pos.sample(nodes.points) * areas)
    neg = np.where(nodes.boundary, 0.0, dens_neg.sample(nodes.points) * areas)
    return AtomicMeasure(nodes, np.maximum(pos, 0)), AtomicMeasure(nodes, np.maximum(neg, 0))


def envelopes(phi, tol: float = 1e-8, max_iters: int = 5000, nodes: NodeSet | None = None) -> EnvelopePair:
    """Convex and concave solutions sandwiching ``phi``.

    ``conv`` solves ``M u = [M phi]^+`` and ``conc`` solves ``M(-u) = [M phi]^-``,
    both with the boundary values of ``phi``.  ``phi`` is a :class:`PLFunction`
    (its measures are the nodal atoms of ``phi`` and ``-phi``) or a
    :class:`GridField` sampled bilinearly onto ``nodes`` (default: the grid
    points themselves).
    """
    if isinstance(phi, GridField):
        nodes = grid_nodeset(phi) if nodes is None else nodes
        pos, neg = _grid_targets(phi, nodes)
        phi = PLFunction(nodes, phi.sample(nodes.points))
    else:
        pos, neg = ma_measure(phi), ma_measure(-phi)
        nodes = phi.nodes
    g = phi.values[nodes.boundary]
    conv, r1 = solve_convex(DirichletProblem(nodes, pos, g), tol, max_iters)
    conc, r2 = solve_concave(DirichletProblem(nodes, neg, g), tol, max_iters)
    return EnvelopePair(conv, conc, r1, r2, phi)


@dataclass
class CertificateReport:
    boundary_constant: float
    conv_max_deviation: float
    conc_max_deviation: float
    contradiction_mass: float
    domain_area: float
    certified: bool
    conv_report: SolverReport = field(repr=False, default=None)
    conc_report: SolverReport = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "boundary_constant": self.boundary_constant,
            "conv_max_deviation": self.conv_max_deviation,
            "conc_max_deviation": self.conc_max_deviation,
            "contradiction_mass": self.contradiction_mass,
            "domain_area": self.domain_area,
            "certified": self.certified,
        }


def nonexistence_certificate(f_rhs: GridField, C: float, tol: float = 1e-8, max_iters: int = 5000) -> CertificateReport:
    """Certify that ``det D^2 phi = f_rhs``, ``phi = C`` on the boundary has no H^2 solution.

    With ``f_rhs <= 0`` both envelopes solve a zero-target problem with
    constant data, so they coincide with ``C``; a solution would be squeezed
    to the constant ``C`` and have zero Hessian determinant, contradicting
    ``f_rhs != 0``.  The size of that contradiction is the mass of the
    negative part of ``f_rhs``.
    """
    vals = f_rhs.values[f_rhs.mask]
    if (vals > 1e-12).any():
        raise HypothesisViolated("right-hand side has a positive part")
    if not (vals < -1e-12).any():
        raise HypothesisViolated("right-hand side vanishes identically")
    nodes = grid_nodeset(f_rhs)
    zero = AtomicMeasure.zeros(nodes)
    g = np.full(len(nodes.boundary_indices), float(C))
    conv, r1 = solve_convex(DirichletProblem(nodes, zero, g), tol, max_iters)
    conc, r2 = solve_concave(DirichletProblem(nodes, zero, g), tol, max_iters)
    dev1 = float(np.abs(conv.values - C).max())
    dev2 = float(np.abs(conc.values - C).max())
    w = f_rhs.weights()
    mass = float((np.maximum(-f_rhs.values, 0.0) * w)[f_rhs.mask].sum())
    area = float(w[f_rhs.mask].sum())
    return CertificateReport(
        float(C), dev1, dev2, mass, area, bool(dev1 < 1e-12 and dev2 < 1e-12 and mass > 0), r1, r2
    )
