import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alexandrov.geometry import (
    ConvexPolygon,
    HalfPlane,
    clip_labeled,
    contains,
    contains_points,
    convex_hull,
    halfplane_intersect,
    minkowski_sum,
    point_in_polygon,
    polygon_area,
)

BOX = ConvexPolygon.box(-2, 2, -2, 2)


def ge(nx, ny, c):
    """Half-plane ``nx*x + ny*y >= c``."""
    return HalfPlane((-nx, -ny), -c)


def test_unit_square_from_four_planes():
    sq = halfplane_intersect([ge(1, 0, 0), HalfPlane((1, 0), 1), ge(0, 1, 0), HalfPlane((0, 1), 1)], BOX)
    assert polygon_area(sq) == pytest.approx(1.0, abs=1e-14)
    assert sorted(map(tuple, sq.vertices.round(12))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_contradictory_planes_give_empty_polygon():
    p = halfplane_intersect([ge(1, 0, 1), HalfPlane((1, 0), 0)], BOX)
    assert p.is_empty
    assert polygon_area(p) == 0.0


def test_unit_simplex():
    tri = halfplane_intersect([ge(1, 0, 0), ge(0, 1, 0), HalfPlane((1, 1), 1)], BOX)
    assert polygon_area(tri) == pytest.approx(0.5, abs=1e-14)
    assert len(tri) == 3


def test_areas():
    assert polygon_area(ConvexPolygon.box(0, 1, 0, 1)) == 1.0
    assert polygon_area(ConvexPolygon([(0, 0), (1, 1)])) == 0.0
    # 3*sqrt(3)/2 worked by hand from six equilateral triangles of side 1
    assert polygon_area(ConvexPolygon.regular(6)) == pytest.approx(2.598076211353316, rel=1e-14)


def test_contains():
    sq = ConvexPolygon.box(0, 1, 0, 1)
    assert contains(sq, (0.5, 0.5), 0)
    assert not contains(sq, (1.5, 0.5), 0)
    assert contains(sq, (1 + 1e-13, 0.5), 1e-12)
    assert not contains(sq, (1 + 1e-11, 0.5), 1e-12)


def test_hull_and_minkowski():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (200, 2))
    hull = convex_hull(pts)
    assert contains_points(hull, pts, 1e-12).all()
    sq = ConvexPolygon.box(0, 1, 0, 1)
    assert polygon_area(minkowski_sum(sq, sq)) == pytest.approx(4.0)
    # square + unit-radius octagon: 1 + perimeter*apothem + octagon area
    octo = ConvexPolygon.regular(8, phase=np.pi / 8)
    apothem = np.cos(np.pi / 8)
    assert polygon_area(minkowski_sum(sq, octo)) == pytest.approx(1 + 4 * apothem + octo.area(), rel=1e-12)


def test_point_in_nonconvex_polygon():
    L = np.array([(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)], float)
    inside = point_in_polygon(L, np.array([[0.25, 0.75], [0.75, 0.75], [0.75, 0.25]]))
    assert inside.tolist() == [True, False, True]


coords = st.floats(-1.5, 1.5, allow_nan=False)
planes = st.builds(
    lambda a, c: HalfPlane((np.cos(a), np.sin(a)), c),
    st.floats(0, 2 * np.pi, allow_nan=False),
    coords,
)


@given(st.lists(planes, max_size=8), planes)
def test_area_monotone_under_extra_plane(L, h):
    assert polygon_area(halfplane_intersect(L + [h], BOX)) <= polygon_area(halfplane_intersect(L, BOX)) + 1e-12


@given(st.lists(planes, max_size=8))
def test_idempotent(L):
    once = halfplane_intersect(L, BOX)
    twice = halfplane_intersect(L + L, BOX)
    assert abs(polygon_area(once) - polygon_area(twice)) < 1e-12


@given(st.lists(planes, max_size=8))
def test_vertices_satisfy_every_plane(L):
    poly = halfplane_intersect(L, BOX)
    for hp in L:
        assert (poly.vertices @ np.asarray(hp.normal) <= hp.offset + 1e-9).all()


@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=30))
def test_hull_area_matches_scipy(pts):
    from scipy.spatial import ConvexHull, QhullError

    pts = np.asarray(pts)
    try:
        ref = ConvexHull(pts).volume
    except QhullError:
        ref = 0.0
    assert polygon_area(convex_hull(pts)) == pytest.approx(ref, abs=1e-9)


def test_clip_through_vertex_keeps_corner():
    # this clip passes within 5e-16 of the first vertex and leaves two copies
    # of it about 1e-12 apart; the corner they represent must survive
    poly = [
        (0.44269009987689234, -1.1263473473053303),
        (0.2892510554160199, -0.4233647691738174),
        (0.24289069113728184, -0.38320514010366585),
        (0.06210290828203499, -0.379332852502299),
        (0.05198997344737447, -0.3876599571036084),
        (0.0674940681140224, -0.7799513432266538),
    ]
    nx, ny, c = 0.6436923784536995, 0.14077243706950004, 0.1263975822407244
    out, labels = clip_labeled(poly, list(range(6)), nx, ny, c, "new")
    ref = halfplane_intersect([HalfPlane((nx, ny), c)], ConvexPolygon(poly))
    assert polygon_area(ConvexPolygon(out)) == pytest.approx(0.15616711733897443, rel=1e-9)
    assert polygon_area(ref) == pytest.approx(0.15616711733897443, rel=1e-9)
    assert "new" in labels
