import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial import ConvexHull, HalfspaceIntersection

from alexandrov.errors import BoundaryNode, InvalidNodeSet
from alexandrov.geometry import contains_points, polygon_area
from alexandrov.ma_core import (
    AtomicMeasure,
    NodeSet,
    PLFunction,
    convex_envelope_function,
    dual_cell_areas,
    is_nodal_convex,
    lower_envelope,
    ma_measure,
    normal_mapping_image,
    subdifferential_at_node,
)
from alexandrov.suites import jittered_grid, random_convex

seeds = st.integers(0, 2**32 - 1)


def qhull_subdifferential_area(f: PLFunction, i: int) -> float:
    """Independent oracle: intersect m.(x_j - x_i) <= f_j - f_i over all j with qhull."""
    x, v = f.nodes.points, f.values
    D = np.delete(x - x[i], i, axis=0)
    b = np.delete(v - v[i], i)
    halfspaces = np.column_stack([D, -b])
    # a strictly interior point: the Chebyshev centre by LP
    from scipy.optimize import linprog

    norm = np.hypot(D[:, 0], D[:, 1])
    res = linprog([0, 0, -1], A_ub=np.column_stack([D, norm]), b_ub=b, bounds=[(None, None)] * 2 + [(0, None)])
    if res.status != 0 or res.x[2] < 1e-9:
        return 0.0
    hs = HalfspaceIntersection(halfspaces, res.x[:2])
    return ConvexHull(hs.intersections).volume


def l1_cross():
    pts = np.array([(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)], float)
    nodes = NodeSet(pts, [False, True, True, True, True], pts[1:])
    return PLFunction(nodes, np.abs(pts).sum(axis=1))


def test_l1_cone_square():
    f = l1_cross()
    P = subdifferential_at_node(f, 0)
    assert polygon_area(P) == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(np.sort(np.abs(P.vertices), axis=0), 1.0)
    assert [polygon_area(p) for p in normal_mapping_image(f, [0])] == pytest.approx([4.0])


def test_affine_atoms_are_points():
    nodes = NodeSet.grid(6)
    f = PLFunction(nodes, nodes.points @ [0.7, -1.3] + 2)
    for P in normal_mapping_image(f, nodes.interior):
        assert polygon_area(P) == 0.0
        assert np.allclose(P.vertices, [0.7, -1.3], atol=1e-9)
    assert ma_measure(f).total == 0.0


def test_quadratic_center_atom():
    nodes = NodeSet.grid(9)
    f = PLFunction.from_function(nodes, lambda x, y: 0.5 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))
    centre = int(np.argmin(np.hypot(*(nodes.points - 0.5).T)))
    assert polygon_area(subdifferential_at_node(f, centre)) == pytest.approx(1 / 64, rel=1e-10)
    assert qhull_subdifferential_area(f, centre) == pytest.approx(1 / 64, rel=1e-10)


def test_cone_on_disk_mesh():
    nodes = NodeSet.disk(16, 1)
    f = PLFunction.from_function(nodes, lambda x, y: np.hypot(x, y))
    m = ma_measure(f)
    # the slope polygon is the 16-gon with unit apothem
    assert m.masses[0] == pytest.approx(16 * np.tan(np.pi / 16), rel=1e-12)
    assert m.masses[0] == pytest.approx(np.pi, rel=0.02)


def test_quadratic_tiling_by_monte_carlo():
    nodes = NodeSet.grid(9)
    f = PLFunction.from_function(nodes, lambda x, y: 0.5 * (x**2 + y**2))
    polys = normal_mapping_image(f, nodes.interior)
    assert len(polys) == 49
    rng = np.random.default_rng(1)
    h = 1 / 8
    g = rng.uniform(h / 2, 1 - h / 2, (10_000, 2))
    hits = np.array([contains_points(P, g, 0.0) for P in polys]).sum(axis=0)
    # every sampled gradient lands in exactly one polygon (ties have measure zero)
    assert (hits == 1).mean() > 0.999
    assert sum(polygon_area(P) for P in polys) == pytest.approx((1 - h) ** 2, rel=1e-12)


def test_nodal_convexity_examples():
    nodes = NodeSet.grid(9, (-1, 1))
    assert is_nodal_convex(PLFunction(nodes, nodes.points @ [1.0, 2.0]))
    assert is_nodal_convex(PLFunction.from_function(nodes, lambda x, y: 0.5 * (x**2 + y**2)))
    saddle = PLFunction.from_function(nodes, lambda x, y: x**2 - y**2)
    assert not is_nodal_convex(saddle)
    # the ridge nodes on the y axis float above the envelope
    ridge = np.flatnonzero(np.isclose(nodes.points[:, 0], 0) & ~nodes.boundary)
    assert (saddle.values[ridge] > saddle.envelope()[ridge] + 1e-6).all()


def test_nonconvex_nodes_have_empty_subdifferential():
    nodes = NodeSet.grid(7, (-1, 1))
    f = PLFunction.from_function(nodes, lambda x, y: -(x**2) - y**2)
    assert ma_measure(f).total == 0.0


def test_lower_envelope_matches_hull_oracle():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, (40, 2))
    vals = rng.normal(size=40)
    q = rng.uniform(0.2, 0.8, (25, 2))
    env = lower_envelope(pts, vals, q)
    # oracle: LP for the largest supporting plane value at q
    from scipy.optimize import linprog

    for k, x in enumerate(q):
        res = linprog(-np.r_[x, 1.0], A_ub=np.column_stack([pts, np.ones(len(pts))]), b_ub=vals, bounds=[(None, None)] * 3)
        assert env[k] == pytest.approx(-res.fun, abs=1e-9)


def test_dual_cells_partition_domain():
    rng = np.random.default_rng(5)
    nodes = jittered_grid(rng, 8)
    assert dual_cell_areas(nodes).sum() == pytest.approx(1.0, abs=1e-12)


def test_node_set_validation():
    with pytest.raises(InvalidNodeSet):
        NodeSet([(0, 0), (1, 0), (0, 1), (0, 1)], [True, True, True, False], [(0, 0), (1, 0), (0, 1)])
    with pytest.raises(InvalidNodeSet):
        NodeSet([(0, 0), (1, 0), (0.2, 0.2)], [True, True, True], [(0, 0), (1, 0), (0, 1)])
    with pytest.raises(ValueError):
        AtomicMeasure(NodeSet.grid(3), [1, 0, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(BoundaryNode):
        subdifferential_at_node(PLFunction(NodeSet.grid(3), np.zeros(9)), 0)


def test_inscribed_and_lshape_nodes():
    t = np.linspace(0, 2 * np.pi, 13)[:-1] + 0.1
    nodes = NodeSet.inscribed(np.column_stack([np.cos(t), np.sin(t)]), 11, (-1, 1))
    assert nodes.domain_is_strictly_convex
    assert nodes.boundary.sum() == 12
    L = NodeSet.lshape(9)
    assert len(L) == 81 - 16
    assert not L.domain_is_strictly_convex


@given(seeds)
def test_qhull_oracle_agrees(seed):
    rng = np.random.default_rng(seed)
    f = random_convex(jittered_grid(rng, 6), rng)
    i = int(rng.choice(f.nodes.interior))
    assert polygon_area(subdifferential_at_node(f, i)) == pytest.approx(qhull_subdifferential_area(f, i), abs=1e-9)


@given(seeds)
def test_qhull_oracle_agrees_on_envelopes(seed):
    # envelopes of perturbed data have coplanar facets and skinny triangles
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 7)
    f = random_convex(nodes, rng)
    g = convex_envelope_function(f.with_values(f.values - np.where(nodes.boundary, 0, rng.uniform(0, 0.3, len(nodes)))))
    for i in nodes.interior:
        assert polygon_area(subdifferential_at_node(g, i)) == pytest.approx(qhull_subdifferential_area(g, i), abs=1e-9)


def test_envelope_regression_instance():
    # an instance where a clip through a vertex used to drop a corner
    rng = np.random.default_rng(np.random.SeedSequence(20240517).spawn(200)[16])
    nodes = jittered_grid(rng, 7)
    f = random_convex(nodes, rng)
    g = convex_envelope_function(f.with_values(f.values - np.where(nodes.boundary, 0, rng.uniform(0, 0.3, len(nodes)))))
    assert polygon_area(subdifferential_at_node(g, 19)) == pytest.approx(qhull_subdifferential_area(g, 19), abs=1e-9)
    assert polygon_area(subdifferential_at_node(g, 19)) == pytest.approx(0.6246684693558976, rel=1e-9)


@given(seeds)
def test_measure_nonnegative_for_arbitrary_values(seed):
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 6)
    m = ma_measure(PLFunction(nodes, rng.normal(size=len(nodes))))
    assert (m.masses >= 0).all()


@given(seeds, st.floats(-1e3, 1e3))
def test_translation_invariance(seed, c):
    rng = np.random.default_rng(seed)
    f = random_convex(jittered_grid(rng, 6), rng)
    a = ma_measure(f).masses
    b = ma_measure(f.with_values(f.values + c)).masses
    assert np.abs(a - b).max() <= 1e-12 * max(1.0, abs(c))


@given(seeds)
def test_affine_annihilation(seed):
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 6)
    f = PLFunction(nodes, nodes.points @ rng.normal(size=2) + rng.normal())
    assert np.abs(ma_measure(f).masses).max() <= 1e-12


@given(seeds)
def test_superadditivity(seed):
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 6)
    f, g = random_convex(nodes, rng), random_convex(nodes, rng)
    assert (ma_measure(f + g).masses - ma_measure(f).masses - ma_measure(g).masses >= -1e-9).all()


@given(seeds, st.floats(0.05, 3.0))
def test_quadratic_bump_strictly_increases(seed, delta):
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 6)
    f = random_convex(nodes, rng)
    x0 = rng.uniform(0, 1, 2)
    q = PLFunction(nodes, delta * ((nodes.points - x0) ** 2).sum(axis=1))
    mf, mq = ma_measure(f).masses, ma_measure(q).masses
    gain = ma_measure(f + q).masses - mf
    assert (gain >= mq - 1e-9).all()
    assert (mq[nodes.interior] > 0).all()


@given(seeds)
def test_envelope_is_nodal_convex_and_below(seed):
    rng = np.random.default_rng(seed)
    nodes = jittered_grid(rng, 6)
    f = PLFunction(nodes, rng.normal(size=len(nodes)))
    g = convex_envelope_function(f)
    assert is_nodal_convex(g)
    assert (g.values <= f.values + 1e-12).all()
