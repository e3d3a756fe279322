"""Hessian determinants on grids, positive/negative Monge-Ampere parts and
checks of the comparison principles.

A verdict compares the minimum of a difference over interior points with
its minimum over boundary points.  For the concave variants the difference
is negated first, so the reported numbers always describe a minimum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import PreconditionFailed, TooCoarse
from .fields import GridField
from .ma_core import PLFunction, is_nodal_convex, lower_envelope, ma_measure

DEFINITE_TOL = 1e-12


@dataclass(frozen=True)
class ComparisonVerdict:
    holds: bool
    interior_min: float
    boundary_min: float
    margin: float
    tolerance: float
    interior_min_location: tuple[float, float] | None = None

    def row(self, case_id) -> dict:
        return {
            "case_id": case_id,
            "holds": int(self.holds),
            "margin": self.margin,
            "interior_min": self.interior_min,
            "boundary_min": self.boundary_min,
        }


def _verdict(diff_int, diff_bnd, points_int, tol) -> ComparisonVerdict:
    k = int(np.argmin(diff_int))
    imin, bmin = float(diff_int[k]), float(diff_bnd.min())
    holds = imin >= bmin - tol
    loc = None if holds else tuple(float(c) for c in points_int[k])
    return ComparisonVerdict(holds, imin, bmin, imin - bmin, tol, loc)


# ---------------------------------------------------------------------------
# finite differences on masked grids


def _shift(a: np.ndarray, k: int, axis: int, fill):
    """``out[i] = a[i + k]`` along ``axis``; out-of-range entries get ``fill``."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _first(f: np.ndarray, m: np.ndarray, h: float, axis: int):
    fp1, fm1 = _shift(f, 1, axis, 0.0), _shift(f, -1, axis, 0.0)
    fp2, fm2 = _shift(f, 2, axis, 0.0), _shift(f, -2, axis, 0.0)
    mp1, mm1 = _shift(m, 1, axis, False), _shift(m, -1, axis, False)
    mp2, mm2 = _shift(m, 2, axis, False), _shift(m, -2, axis, False)
    out = np.full(f.shape, np.nan)
    central = m & mp1 & mm1
    fwd = m & ~central & mp1 & mp2
    bwd = m & ~central & ~fwd & mm1 & mm2
    out[central] = ((fp1 - fm1) / (2 * h))[central]
    out[fwd] = ((-3 * f + 4 * fp1 - fp2) / (2 * h))[fwd]
    out[bwd] = ((3 * f - 4 * fm1 + fm2) / (2 * h))[bwd]
    return out


def _second(f: np.ndarray, m: np.ndarray, h: float, axis: int):
    s = {k: _shift(f, k, axis, 0.0) for k in (-3, -2, -1, 1, 2, 3)}
    t = {k: _shift(m, k, axis, False) for k in (-3, -2, -1, 1, 2, 3)}
    out = np.full(f.shape, np.nan)
    central = m & t[1] & t[-1]
    fwd = m & ~central & t[1] & t[2] & t[3]
    bwd = m & ~central & ~fwd & t[-1] & t[-2] & t[-3]
    out[central] = ((s[-1] - 2 * f + s[1]) / h**2)[central]
    out[fwd] = ((2 * f - 5 * s[1] + 4 * s[2] - s[3]) / h**2)[fwd]
    out[bwd] = ((2 * f - 5 * s[-1] + 4 * s[-2] - s[-3]) / h**2)[bwd]
    return out


def hessian_parts(f: GridField):
    """Second derivatives ``(f_xx, f_yy, f_xy)``; NaN where no stencil fits."""
    if f.nx < 5 or f.ny < 5:
        raise TooCoarse("hessian needs at least 5 x 5 points")
    v, m, h = f.values, f.mask, f.h
    fxx = _second(v, m, h, 0)
    fyy = _second(v, m, h, 1)
    fx = _first(v, m, h, 0)
    mx = m & np.isfinite(fx)
    fxy = _first(np.nan_to_num(fx), mx, h, 1)
    return fxx, fyy, fxy


def hessian_det(f: GridField) -> GridField:
    """``f_xx f_yy - f_xy^2`` with central stencils inside, one-sided near the mask edge."""
    fxx, fyy, fxy = hessian_parts(f)
    det = fxx * fyy - fxy**2
    ok = f.mask & np.isfinite(det)
    return f.with_values(np.where(ok, det, 0.0), mask=ok)


def positive_part_density(f: GridField):
    """Densities of ``[M f]^+`` and ``[M f]^-`` as grid fields.

    The positive part keeps ``det D^2 f`` where the Hessian is positive
    definite (``f_xx > 0`` and ``det > 0``), the negative part where it is
    negative definite.  Near-zero values count as neither.
    """
    fxx, fyy, fxy = hessian_parts(f)
    det = fxx * fyy - fxy**2
    ok = f.mask & np.isfinite(det)
    det = np.where(ok, det, 0.0)
    fxx = np.where(ok, fxx, 0.0)
    posdef = (fxx > DEFINITE_TOL) & (det > DEFINITE_TOL)
    negdef = (fxx < -DEFINITE_TOL) & (det > DEFINITE_TOL)
    pos = f.with_values(np.where(posdef, det, 0.0), mask=ok)
    neg = f.with_values(np.where(negdef, det, 0.0), mask=ok)
    return pos, neg


def positive_part_measure(f: GridField, part: str = "+") -> GridField:
    """Atoms of ``[M f]^+`` (or ``[M f]^-`` with ``part='-'``) on grid points.

    Each atom is the density times the point's dual-cell area (``h^2`` at
    interior points); the result is a :class:`GridField` of masses.
    """
    if part not in ("+", "-"):
        raise ValueError("part must be '+' or '-'")
    pos, neg = positive_part_density(f)
    dens = pos if part == "+" else neg
    w = f.weights()
    return dens.with_values(dens.values * np.where(dens.mask, w, 0.0))


def measure_total(m: GridField) -> float:
    return float(m.values[m.mask].sum())


# ---------------------------------------------------------------------------
# comparison principles on node sets


def _check_measures(phi: PLFunction, psi: PLFunction, tol: float):
    if phi.nodes is not psi.nodes:
        raise ValueError("phi and psi must share a node set")
    for name, f in (("phi", phi), ("psi", psi)):
        if not is_nodal_convex(f, max(tol, 1e-10)):
            raise PreconditionFailed(f"{name} is not nodal-convex")
    mphi, mpsi = ma_measure(phi).masses, ma_measure(psi).masses
    excess = mphi - mpsi
    k = int(np.argmax(excess))
    if excess[k] > tol:
        raise PreconditionFailed(
            f"measure ordering fails at node {k}: M phi = {mphi[k]:.6g} > M psi = {mpsi[k]:.6g}", index=k
        )


def check_comparison(phi: PLFunction, psi: PLFunction, tol: float = 1e-9) -> ComparisonVerdict:
    """Does ``min (phi - psi)`` over all nodes equal its minimum over boundary nodes?

    Requires both functions nodal-convex with ``M phi <= M psi`` atomwise
    (up to ``tol``); raises :class:`PreconditionFailed` otherwise.
    """
    _check_measures(phi, psi, tol)
    nodes = phi.nodes
    d = phi.values - psi.values
    return _verdict(d[nodes.interior], d[nodes.boundary], nodes.points[nodes.interior], tol)


def check_strong_comparison(phi: PLFunction, psi: PLFunction, delta: float, x0, tol: float = 1e-9) -> ComparisonVerdict:
    """``phi - (psi + delta |x - x0|^2)`` must not reach its minimum at an interior node."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    _check_measures(phi, psi, tol)
    nodes = phi.nodes
    bump = delta * ((nodes.points - np.asarray(x0, float)) ** 2).sum(axis=1)
    d = phi.values - psi.values - bump
    return _verdict(d[nodes.interior], d[nodes.boundary], nodes.points[nodes.interior], tol)


# ---------------------------------------------------------------------------
# generalised principle: phi sampled on a (possibly nonconvex) grid domain


def lump_to_nodes(masses: GridField, psi: PLFunction) -> np.ndarray:
    """Assign every grid atom to the nearest interior node of ``psi``."""
    nodes = psi.nodes
    iidx = nodes.interior
    pts = masses.points[masses.mask]
    _, k = cKDTree(nodes.points[iidx]).query(pts)
    out = np.zeros(len(nodes))
    np.add.at(out, iidx[k], masses.values[masses.mask])
    return out


def check_generalised(phi: GridField, psi: PLFunction, tol: float = 1e-9, concave: bool = False) -> ComparisonVerdict:
    """Boundary-minimum check for ``phi - psi`` with ``phi`` only assumed H^2.

    Convex case: ``psi`` nodal-convex and ``[M phi]^+ <= M psi`` (grid atoms
    lumped to the nearest interior node).  Concave case: ``psi`` concave,
    ``[M phi]^- <= M(-psi)``, and maxima replace minima.  ``psi`` is evaluated
    at grid points through its convex (resp. concave) envelope.  The grid mask
    may describe a nonconvex domain.
    """
    if concave:
        return check_generalised(phi.with_values(-phi.values), -psi, tol)
    if not is_nodal_convex(psi, max(tol, 1e-10)):
        raise PreconditionFailed("psi is not nodal-convex")
    lumped = lump_to_nodes(positive_part_measure(phi, "+"), psi)
    mpsi = ma_measure(psi).masses
    excess = lumped - mpsi
    k = int(np.argmax(excess))
    if excess[k] > tol:
        raise PreconditionFailed(
            f"[M phi]^+ exceeds M psi at node {k}: {lumped[k]:.6g} > {mpsi[k]:.6g}", index=k
        )
    P = phi.points
    psi_vals = lower_envelope(psi.nodes.points, psi.values, P.reshape(-1, 2)).reshape(phi.values.shape)
    d = phi.values - psi_vals
    im, bm = phi.interior_mask, phi.boundary_mask
    return _verdict(d[im], d[bm], P[im], tol)
