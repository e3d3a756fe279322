"""Flat-file formats: node/measure/grid CSVs, 16-bit PGM heatmaps and key=value files.

Floats are written with ``repr`` so that a write/read round trip is exact and
reruns are byte-identical.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import GridField
from .geometry import convex_hull
from .ma_core import AtomicMeasure, NodeSet, PLFunction

NODE_FIELDS = ("x", "y", "boundary_flag", "value")
MEASURE_FIELDS = ("x", "y", "mass")
GRID_FIELDS = ("i", "j", "x", "y", "value", "mask")
VERDICT_FIELDS = ("case_id", "holds", "margin", "interior_min", "boundary_min")


@dataclass
class RowError:
    row: int
    field: str
    reason: str

    def __str__(self):
        return f"row {self.row}: field {self.field!r}: {self.reason}"


class MalformedInput(ValueError):
    def __init__(self, path, errors: list[RowError]):
        self.path = str(path)
        self.errors = errors
        super().__init__(f"{path}: " + "; ".join(map(str, errors[:5])))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            vals = [r[k] for k in fields] if isinstance(r, dict) else r
            w.writerow([_fmt(v) for v in vals])


def read_table(path, required, optional=(), types=None):
    """Parse a headed CSV into column arrays, collecting one error per bad field.

    ``types`` maps a column to ``float`` (finite), ``int`` or ``flag`` (0/1).
    Data rows are numbered from 2 so they match line numbers.
    """
    types = types or {}
    errors: list[RowError] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MalformedInput(path, [RowError(1, c, "missing column") for c in missing])
        cols = {c: [] for c in (*required, *[o for o in optional if o in header])}
        for rowno, row in enumerate(reader, start=2):
            for c in cols:
                raw = (row.get(c) or "").strip()
                kind = types.get(c, float)
                try:
                    if kind == "flag":
                        if raw not in ("0", "1"):
                            raise ValueError("expected 0 or 1")
                        val = raw == "1"
                    elif kind is int:
                        val = int(raw)
                    else:
                        val = float(raw)
                        if not np.isfinite(val):
                            raise ValueError("not finite")
                except ValueError as exc:
                    errors.append(RowError(rowno, c, str(exc) if raw else "empty"))
                    val = 0
                cols[c].append(val)
    if errors:
        raise MalformedInput(path, errors)
    if not cols[required[0]]:
        raise MalformedInput(path, [RowError(2, required[0], "no data rows")])
    return {c: np.asarray(v) for c, v in cols.items()}


# ---- nodes and measures ------------------------------------------------


def nodeset_from_columns(x, y, flags) -> NodeSet:
    """Node set whose domain is the convex hull of the points."""
    pts = np.column_stack([x, y]).astype(float)
    return NodeSet(pts, np.asarray(flags, bool), convex_hull(pts).vertices)


def read_nodes(path, extra=(), optional=("value",)):
    t = read_table(path, ("x", "y", "boundary_flag", *extra), optional, {"boundary_flag": "flag"})
    nodes = nodeset_from_columns(t["x"], t["y"], t["boundary_flag"])
    return nodes, t


def read_pl_function(path) -> PLFunction:
    nodes, t = read_nodes(path, extra=("value",))
    return PLFunction(nodes, t["value"])


def write_nodes(path, f: PLFunction):
    pts = f.nodes.points
    rows = zip(pts[:, 0], pts[:, 1], f.nodes.boundary, f.values)
    write_csv(path, NODE_FIELDS, rows)


def write_measure(path, m: AtomicMeasure):
    pts = m.nodes.points
    write_csv(path, MEASURE_FIELDS, zip(pts[:, 0], pts[:, 1], m.masses))


def read_measure(path, nodes: NodeSet) -> AtomicMeasure:
    t = read_table(path, MEASURE_FIELDS)
    pts = np.column_stack([t["x"], t["y"]])
    if len(pts) != len(nodes) or not np.allclose(pts, nodes.points, rtol=0, atol=1e-12):
        raise MalformedInput(path, [RowError(2, "x", "measure rows must list the nodes in node-file order")])
    bad = np.flatnonzero((t["mass"] < 0) | (nodes.boundary & (t["mass"] != 0)))
    if len(bad):
        raise MalformedInput(path, [RowError(int(k) + 2, "mass", "negative, or nonzero on a boundary node") for k in bad])
    return AtomicMeasure(nodes, t["mass"])


# ---- grid fields -------------------------------------------------------


def write_grid(path, f: GridField):
    X, Y = f.coords()
    I, J = np.meshgrid(np.arange(f.nx), np.arange(f.ny), indexing="ij")
    rows = zip(I.ravel(), J.ravel(), X.ravel(), Y.ravel(), f.values.ravel(), f.mask.ravel())
    write_csv(path, GRID_FIELDS, rows)


def read_grid(path) -> GridField:
    t = read_table(path, GRID_FIELDS, types={"i": int, "j": int, "mask": "flag"})
    i, j = t["i"], t["j"]
    if i.min() < 0 or j.min() < 0:
        raise MalformedInput(path, [RowError(2, "i", "negative grid index")])
    nx, ny = i.max() + 1, j.max() + 1
    if len(i) != nx * ny or len(set(zip(i.tolist(), j.tolist()))) != len(i):
        raise MalformedInput(path, [RowError(2, "i", f"expected each of the {nx} x {ny} grid points exactly once")])
    vals = np.zeros((nx, ny))
    mask = np.zeros((nx, ny), bool)
    vals[i, j] = t["value"]
    mask[i, j] = t["mask"]
    x, y = np.zeros((nx, ny)), np.zeros((nx, ny))
    x[i, j], y[i, j] = t["x"], t["y"]
    h = x[1, 0] - x[0, 0]
    origin = (x[0, 0], y[0, 0])
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    if not (np.allclose(x, origin[0] + h * I, atol=1e-9 * max(1, abs(h))) and np.allclose(y, origin[1] + h * J, atol=1e-9 * max(1, abs(h)))):
        raise MalformedInput(path, [RowError(2, "x", "coordinates are not a uniform square grid")])
    return GridField(vals, h, origin, mask)


def write_pgm(path, f: GridField):
    """16-bit binary PGM; in-domain values scaled to 1..65535, outside 0, +y up."""
    v = f.values
    m = f.mask
    lo, hi = v[m].min(), v[m].max()
    scale = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    img = np.where(m, 1 + np.round(scale * 65534), 0).astype(">u2")
    img = img.T[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(img.tobytes())


# ---- key=value files ---------------------------------------------------


def write_kv(path, data: dict):
    with open(path, "w", newline="") as fh:
        for k, v in data.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_kv(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedInput(path, [RowError(n, line, "expected key=value")])
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
