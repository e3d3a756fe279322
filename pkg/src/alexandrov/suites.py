"""Seeded random instance suites for the measure properties and comparison principles.

Each instance draws from its own generator, spawned from a master
``SeedSequence``, so results do not depend on execution order and the suites
can be fanned out over processes.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .comparison import (
    check_comparison,
    check_generalised,
    check_strong_comparison,
    lump_to_nodes,
    positive_part_measure,
)
from .fields import GridField, lshape_mask
from .ma_core import (
    AtomicMeasure,
    NodeSet,
    PLFunction,
    convex_envelope_function,
    ma_measure,
    normal_mapping_image,
    sample_union,
    union_contains,
)
from .ma_solver import DirichletProblem, solve_convex



def jittered_grid(rng, n: int = 9, amount: float = 0.25) -> NodeSet:
    """Unit-square lattice with interior nodes moved by up to ``amount * h``."""
    base = NodeSet.grid(n)
    pts = base.points.copy()
    h = 1.0 / (n - 1)
    inner = ~base.boundary
    pts[inner] += rng.uniform(-amount * h, amount * h, size=(inner.sum(), 2))
    return NodeSet(pts, base.boundary, base.domain)


def random_convex(nodes: NodeSet, rng, scale: float = 1.0) -> PLFunction:
    """Samples of a random convex function: quadratic + max of planes + affine."""
    x = nodes.points
    a = rng.normal(size=(2, 2))
    H = a @ a.T + 0.05 * np.eye(2)
    c = rng.uniform(0, 1, 2)
    d = x - c
    vals = 0.5 * np.einsum("ni,ij,nj->n", d, H, d)
    k = rng.integers(0, 4)
    if k:
        planes = rng.normal(size=(k, 2)) @ x.T + rng.normal(scale=0.2, size=(k, 1))
        vals = vals + np.maximum(0.0, planes.max(axis=0))
    vals = vals + x @ rng.normal(size=2) + rng.normal()
    return PLFunction(nodes, scale * vals)


# ---- measure properties ------------------------------------------------


def superadditivity_case(rng) -> dict:
    """Atomwise defect of ``M(f + g) >= M f + M g`` (negative = violation)."""
    nodes = jittered_grid(rng, 7)
    f, g = random_convex(nodes, rng), random_convex(nodes, rng)
    lhs = ma_measure(f + g).masses
    rhs = ma_measure(f).masses + ma_measure(g).masses
    return {"defect": float((lhs - rhs).min())}


def inclusion_case(rng, samples: int = 1000) -> dict:
    """Fraction of gradients of ``f`` outside the gradient image of ``g <= f``."""
    nodes = jittered_grid(rng, 7)
    f = random_convex(nodes, rng)
    lowered = f.values - np.where(nodes.boundary, 0.0, rng.uniform(0, 0.3, len(nodes)))
    g = convex_envelope_function(f.with_values(lowered))
    inner = nodes.interior
    pts = sample_union(normal_mapping_image(f, inner), samples, rng)
    inside = union_contains(normal_mapping_image(g, inner), pts, 1e-9)
    return {"outside": int((~inside).sum()), "samples": len(pts)}


# ---- comparison instances ----------------------------------------------


def comparison_pair(rng) -> tuple[PLFunction, PLFunction]:
    """Nodal-convex ``phi``, ``psi`` on a jittered grid with ``M phi <= M psi``.

    Three families: ``psi = phi + bump`` (superadditivity), ``phi`` a scaled
    copy of ``psi`` plus a plane, and ``phi`` the discrete solution for a
    fraction of ``M psi`` with the boundary trace of an unrelated convex
    function.
    """
    family = rng.integers(0, 3)
    if family == 0:
        nodes = jittered_grid(rng, 9)
        phi = random_convex(nodes, rng)
        psi = phi + random_convex(nodes, rng, rng.uniform(0.05, 1.0))
    elif family == 1:
        nodes = jittered_grid(rng, 9)
        psi = random_convex(nodes, rng)
        plane = nodes.points @ rng.normal(size=2) + rng.normal()
        phi = psi * rng.uniform(0.0, 1.0) + PLFunction(nodes, plane)
    else:
        nodes = jittered_grid(rng, 7)
        psi = random_convex(nodes, rng)
        mu = AtomicMeasure(nodes, ma_measure(psi).masses * rng.uniform(0.0, 1.0, len(nodes)) * ~nodes.boundary)
        g = random_convex(nodes, rng).values[nodes.boundary]
        phi, _ = solve_convex(DirichletProblem(nodes, mu, g), tol=1e-10)
    return phi, psi


def comparison_case(rng) -> dict:
    phi, psi = comparison_pair(rng)
    return check_comparison(phi, psi, tol=1e-9).row(None)


def strong_case(rng) -> dict:
    phi, psi = comparison_pair(rng)
    delta = rng.uniform(0.01, 1.0)
    x0 = rng.uniform(0.1, 0.9, 2)
    return check_strong_comparison(phi, psi, delta, x0, tol=1e-9).row(None)


def indefinite_field(rng, n: int = 33, lshape: bool = False) -> GridField:
    """A smooth field on the unit square (or L-shape) whose Hessian changes type.

    ``(k u + m) |x - x0|^2`` in rotated coordinates is positive definite on
    one side of the line ``u = -m/k`` (far enough out), negative definite on
    the other, and a saddle in between; a small trigonometric term breaks
    the symmetry.
    """
    k = rng.uniform(1.0, 3.0) * rng.choice([-1.0, 1.0])
    m = rng.uniform(-0.5, 0.5)
    th = rng.uniform(0, 2 * np.pi)
    x0 = rng.uniform(0.3, 0.7, 2)
    s = rng.uniform(0.0, 0.1)
    w = rng.uniform(1.0, 3.0, 2)
    ph = rng.uniform(0, 2 * np.pi, 2)

    def func(x, y):
        u = np.cos(th) * (x - x0[0]) + np.sin(th) * (y - x0[1])
        v = -np.sin(th) * (x - x0[0]) + np.cos(th) * (y - x0[1])
        return (k * u + m) * (u**2 + v**2) + s * np.sin(w[0] * x + ph[0]) * np.cos(w[1] * y + ph[1])

    mask = lshape_mask if lshape else None
    return GridField.box(func, n, mask=mask)


def generalised_pair(rng, lshape: bool = False):
    """``phi`` indefinite on a fine grid, ``psi`` a convex paraboloid on coarse nodes.

    The paraboloid's curvature is doubled until the lumped ``[M phi]^+`` sits
    below ``M psi`` with room to spare.
    """
    phi = indefinite_field(rng, 33, lshape)
    nodes = NodeSet.lshape(9) if lshape else NodeSet.grid(9)
    lumped = lump_to_nodes(positive_part_measure(phi), PLFunction(nodes, np.zeros(len(nodes))))
    c = rng.uniform(0.3, 0.7, 2)
    plane = nodes.points @ rng.normal(size=2) + rng.normal()
    base = ((nodes.points - c) ** 2).sum(axis=1)
    K = 0.5
    while True:
        psi = PLFunction(nodes, K * base + plane)
        if (ma_measure(psi).masses >= 2 * lumped).all():
            return phi, psi
        K *= 2


def generalised_case(rng, lshape: bool = False) -> dict:
    phi, psi = generalised_pair(rng, lshape)
    return check_generalised(phi, psi, tol=1e-9).row(None)


CASES = {
    "comparison": comparison_case,
    "strong": strong_case,
    "generalised": generalised_case,
    "generalised_lshape": partial(generalised_case, lshape=True),
    "superadditivity": superadditivity_case,
    "inclusion": inclusion_case,
}


def _run_one(args):
    name, seq = args
    return CASES[name](np.random.default_rng(seq))


def run_suite(name: str, instances: int, seed: int, workers: int = 1) -> list[dict]:
    """Run ``instances`` cases of suite ``name``; rows come back in case order."""
    if name not in CASES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(CASES)}")
    seqs = np.random.SeedSequence(seed).spawn(instances)
    jobs = [(name, s) for s in seqs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    for k, r in enumerate(rows):
        r["case_id"] = f"{name}-{seed}-{k:04d}"
    return rows
