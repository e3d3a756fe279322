import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from alexandrov import io
from alexandrov.fields import GridField, lshape_mask
from alexandrov.ma_core import NodeSet, PLFunction, ma_measure
from alexandrov.suites import jittered_grid


def test_nodes_round_trip(tmp_path):
    nodes = jittered_grid(np.random.default_rng(0), 6)
    f = PLFunction(nodes, np.random.default_rng(1).normal(size=len(nodes)))
    io.write_nodes(tmp_path / "f.csv", f)
    g = io.read_pl_function(tmp_path / "f.csv")
    assert np.array_equal(g.nodes.points, nodes.points)
    assert np.array_equal(g.nodes.boundary, nodes.boundary)
    assert np.array_equal(g.values, f.values)


def test_measure_round_trip(tmp_path):
    nodes = NodeSet.grid(5)
    m = ma_measure(PLFunction.from_function(nodes, lambda x, y: x**2 + y**2))
    io.write_measure(tmp_path / "m.csv", m)
    assert np.array_equal(io.read_measure(tmp_path / "m.csv", nodes).masses, m.masses)
    with pytest.raises(io.MalformedInput):
        io.read_measure(tmp_path / "m.csv", NodeSet.grid(4))


def test_grid_round_trip(tmp_path):
    f = GridField.box(lambda x, y: np.sin(3 * x) * y, 9, mask=lshape_mask)
    io.write_grid(tmp_path / "g.csv", f)
    g = io.read_grid(tmp_path / "g.csv")
    assert np.array_equal(g.values, f.values) and np.array_equal(g.mask, f.mask)
    assert g.h == f.h and g.origin == f.origin


def test_bad_rows_are_reported(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y,boundary_flag,value\n0,0,1,1\n1,0,2,1\n0,1,1,nan\n1,1,1,\n")
    with pytest.raises(io.MalformedInput) as exc:
        io.read_pl_function(p)
    errs = [(e.row, e.field) for e in exc.value.errors]
    assert errs == [(3, "boundary_flag"), (4, "value"), (5, "value")]
    p.write_text("x,y,value\n0,0,1\n")
    with pytest.raises(io.MalformedInput) as exc:
        io.read_pl_function(p)
    assert exc.value.errors[0].field == "boundary_flag"


def test_nonuniform_grid_rejected(tmp_path):
    p = tmp_path / "g.csv"
    rows = [(i, j, 0.1 * i * (1 + 0.1 * i), 0.1 * j, 0.0, 1) for i in range(3) for j in range(3)]
    io.write_csv(p, io.GRID_FIELDS, rows)
    with pytest.raises(io.MalformedInput):
        io.read_grid(p)


def test_pgm_header_and_range(tmp_path):
    f = GridField.box(lambda x, y: x + 2 * y, 5, mask=lshape_mask)
    io.write_pgm(tmp_path / "f.pgm", f)
    raw = (tmp_path / "f.pgm").read_bytes()
    header = b"P5\n5 5\n65535\n"
    assert raw.startswith(header)
    img = np.frombuffer(raw[len(header):], dtype=">u2").reshape(5, 5)
    assert img.max() == 65535 and img[img > 0].min() == 1
    # +y is up: the top row is y = 1, where the L-shape lacks its right half
    assert (img[0, 3:] == 0).all() and (img[-1] > 0).all()


def test_kv_round_trip(tmp_path):
    io.write_kv(tmp_path / "a.txt", {"a": 1.5, "b": True, "c": "x"})
    assert io.read_kv(tmp_path / "a.txt") == {"a": "1.5", "b": "1", "c": "x"}
    (tmp_path / "b.txt").write_text("# comment\nnx = 16\noops\n")
    with pytest.raises(io.MalformedInput):
        io.read_kv(tmp_path / "b.txt")


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_float_format_round_trips(xs):
    assert [float(io._fmt(x)) for x in xs] == xs
