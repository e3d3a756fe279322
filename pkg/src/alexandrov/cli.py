"""Batch command line: measures, Dirichlet solves, envelopes, comparison suites,
nonexistence certificates and fluid runs.

Exit codes: 0 success, 1 verdict violation or nonconvergence, 2 malformed input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .comparison import check_comparison, check_strong_comparison
from .errors import (
    AlexandrovError,
    CFLViolation,
    HypothesisViolated,
    InfeasibleDomain,
    InvalidNodeSet,
    NotConverged,
    PreconditionFailed,
    TooCoarse,
)
from .ma_core import AtomicMeasure, PLFunction, ma_measure
from .ma_solver import DirichletProblem, envelopes, nonexistence_certificate, solve_concave, solve_convex
from .ns_fluids import (
    TIME_SERIES_FIELDS,
    FluidConfig,
    SignOutcome,
    sign_diagnostic,
    simulate,
)
from .suites import run_suite

OK, VIOLATION, MALFORMED = 0, 1, 2


class InputError(Exception):
    """Bad user input; the message is printed as one diagnostic line per record."""


def _echo_manifest(args, out: Path):
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    io.write_kv(out / "manifest.txt", {k: (" ".join(map(str, v)) if isinstance(v, list) else v) for k, v in params.items()})


# ---- subcommands -------------------------------------------------------


def cmd_measure(args, out: Path) -> int:
    f = io.read_pl_function(args.nodes)
    m = ma_measure(f)
    io.write_measure(out / "measure.csv", m)
    print(f"total mass {m.total!r} over {len(m.nodes.interior)} interior nodes")
    return OK


def _read_problem(args) -> DirichletProblem:
    nodes, t = io.read_nodes(args.problem, extra=("boundary_value",), optional=("mass",))
    if args.measure:
        target = io.read_measure(args.measure, nodes)
    elif "mass" in t:
        masses = t["mass"]
        bad = np.flatnonzero((masses < 0) | (nodes.boundary & (masses != 0)))
        if len(bad):
            raise io.MalformedInput(args.problem, [io.RowError(int(k) + 2, "mass", "negative, or nonzero on a boundary node") for k in bad])
        target = AtomicMeasure(nodes, masses)
    else:
        target = AtomicMeasure.zeros(nodes)
    return DirichletProblem(nodes, target, t["boundary_value"][nodes.boundary])


def cmd_solve(args, out: Path) -> int:
    p = _read_problem(args)
    solver = solve_concave if args.concave else solve_convex
    f, report = solver(p, args.tol, args.max_iters, raise_on_failure=False)
    io.write_nodes(out / "solution.csv", f)
    io.write_kv(out / "report.txt", report.as_dict())
    print(f"converged={report.converged} iterations={report.iterations} max_residual={report.max_residual!r}")
    return OK if report.converged else VIOLATION


def cmd_envelope(args, out: Path) -> int:
    field = io.read_grid(args.field)
    nodes = io.read_nodes(args.nodes)[0] if args.nodes else None
    try:
        pair = envelopes(field, args.tol, args.max_iters, nodes=nodes)
    except NotConverged as exc:
        io.write_kv(out / "report.txt", exc.report.as_dict())
        print(f"[error] {exc}")
        return VIOLATION
    io.write_nodes(out / "phi.csv", pair.phi)
    io.write_nodes(out / "conv.csv", pair.conv)
    io.write_nodes(out / "conc.csv", pair.conc)
    io.write_pgm(out / "field.pgm", field)
    report = {
        "conv_iterations": pair.conv_report.iterations,
        "conc_iterations": pair.conc_report.iterations,
        "conv_max_residual": pair.conv_report.max_residual,
        "conc_max_residual": pair.conc_report.max_residual,
        "sandwich_violation": pair.sandwich_violation(),
    }
    io.write_kv(out / "report.txt", report)
    print(f"sandwich violation {report['sandwich_violation']!r}")
    return OK


def _verify_pair(args, out: Path) -> int:
    phi = io.read_pl_function(args.phi)
    psi_raw = io.read_pl_function(args.psi)
    if len(psi_raw.nodes) != len(phi.nodes) or not np.array_equal(psi_raw.nodes.points, phi.nodes.points):
        raise InputError(f"{args.psi}: nodes differ from {args.phi}")
    psi = PLFunction(phi.nodes, psi_raw.values)
    try:
        if args.suite == "strong":
            x0 = phi.nodes.points.mean(axis=0) if args.x0 is None else np.asarray(args.x0)
            verdict = check_strong_comparison(phi, psi, args.delta, x0, args.tol)
        else:
            verdict = check_comparison(phi, psi, args.tol)
    except PreconditionFailed as exc:
        where = f"row {exc.index + 2}: " if exc.index is not None else ""
        print(f"[error] {args.phi}: {where}PreconditionFailed: {exc}")
        return MALFORMED
    io.write_csv(out / "verdicts.csv", io.VERDICT_FIELDS, [verdict.row("pair")])
    print(f"holds={verdict.holds} margin={verdict.margin!r}")
    return OK if verdict.holds else VIOLATION


def cmd_verify(args, out: Path) -> int:
    if args.phi or args.psi:
        if not (args.phi and args.psi):
            raise InputError("--phi and --psi must be given together")
        return _verify_pair(args, out)
    names = ["generalised", "generalised_lshape"] if args.suite == "generalised" else [args.suite]
    rows = []
    for name in names:
        rows += run_suite(name, args.instances, args.seed, args.workers)
    if "holds" in rows[0]:
        fields = io.VERDICT_FIELDS
        failures = [r for r in rows if not r["holds"]]
    else:
        fields = ("case_id", *[k for k in rows[0] if k != "case_id"])
        failures = [r for r in rows if r.get("defect", 0.0) < -1e-9 or r.get("outside", 0) > 0]
    io.write_csv(out / "verdicts.csv", fields, rows)
    print(f"{len(rows)} instances, {len(failures)} violations")
    for r in failures:
        print(f"  violation in {r['case_id']}")
    return VIOLATION if failures else OK


def cmd_certify(args, out: Path) -> int:
    rhs = io.read_grid(args.rhs)
    rep = nonexistence_certificate(rhs, args.boundary_constant, args.tol, args.max_iters)
    io.write_kv(out / "certificate.txt", rep.as_dict())
    print(f"certified={rep.certified} contradiction_mass={rep.contradiction_mass!r} domain_area={rep.domain_area!r}")
    return OK if rep.certified else VIOLATION


def _fluid_config(path) -> FluidConfig:
    kv = io.read_kv(path)
    known = {"nx", "ny", "Lx", "Ly", "dt", "boundary_kind", "initial_condition", "origin_x", "origin_y"}
    try:
        params = {k: float(v) for k, v in kv.items() if k not in known}
        return FluidConfig(
            nx=int(kv["nx"]),
            ny=int(kv["ny"]),
            Lx=float(kv.get("Lx", 1.0)),
            Ly=float(kv.get("Ly", 1.0)),
            dt=float(kv["dt"]),
            boundary_kind=kv.get("boundary_kind", "no_slip_box"),
            initial_condition=kv.get("initial_condition", "rest"),
            params=params,
            origin=(float(kv.get("origin_x", 0.0)), float(kv.get("origin_y", 0.0))),
        )
    except KeyError as exc:
        raise InputError(f"{path}: missing key {exc.args[0]}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_ns_run(args, out: Path) -> int:
    cfg = _fluid_config(args.config)
    state, rows, snaps = simulate(cfg, args.steps, args.diag_every)
    io.write_csv(out / "timeseries.csv", TIME_SERIES_FIELDS, rows)
    status = OK
    verdicts = []
    for k, (st, diag) in enumerate(snaps):
        v = sign_diagnostic(diag, args.tol)
        verdicts.append({"snapshot": k, "t": st.t, "outcome": v.outcome.value, "min_abs_delta_p": v.min_abs_delta_p,
                         "zero_x": v.zero_location[0], "zero_y": v.zero_location[1]})
        if v.outcome is not SignOutcome.SIGN_CHANGE and np.abs(diag.delta_p.values).max() > args.tol:
            status = VIOLATION
    io.write_csv(out / "sign_verdicts.csv", ("snapshot", "t", "outcome", "min_abs_delta_p", "zero_x", "zero_y"), verdicts)
    if snaps:
        _, diag = snaps[-1]
        for name, f in (("stream", diag.stream), ("delta_p", diag.delta_p), ("det_hess_stream", diag.det_hess_stream)):
            io.write_grid(out / f"{name}.csv", f)
            io.write_pgm(out / f"{name}.pgm", f)
    print(f"t={state.t!r} steps={args.steps} snapshots={len(snaps)}")
    return status


# ---- parser ------------------------------------------------------------


def _positive(kind):
    def parse(text):
        val = kind(text)
        if val <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val

    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="alexandrov", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="master seed, recorded in the manifest")
        p.set_defaults(func=func)
        return p

    p = add("measure", cmd_measure, "Monge-Ampere atoms of a nodal function")
    p.add_argument("--nodes", required=True, type=Path, help="CSV x,y,boundary_flag,value")

    p = add("solve", cmd_solve, "Dirichlet problem for a convex (or concave) generalised solution")
    p.add_argument("--problem", required=True, type=Path, help="CSV x,y,boundary_flag,boundary_value[,mass]")
    p.add_argument("--measure", type=Path, help="CSV x,y,mass in node order (overrides a mass column)")
    p.add_argument("--tol", type=_positive(float), default=1e-8)
    p.add_argument("--max-iters", type=_positive(int), default=5000)
    p.add_argument("--concave", action="store_true")

    p = add("envelope", cmd_envelope, "convex/concave envelopes of a grid field")
    p.add_argument("--field", required=True, type=Path, help="CSV i,j,x,y,value,mask")
    p.add_argument("--nodes", type=Path, help="node CSV to solve on (default: the grid points)")
    p.add_argument("--tol", type=_positive(float), default=1e-8)
    p.add_argument("--max-iters", type=_positive(int), default=5000)

    p = add("verify", cmd_verify, "comparison-principle suites or a single user instance")
    p.add_argument("--suite", choices=["comparison", "strong", "generalised", "superadditivity", "inclusion"], default="comparison")
    p.add_argument("--instances", type=_positive(int), default=100)
    p.add_argument("--workers", type=_positive(int), default=1)
    p.add_argument("--phi", type=Path, help="node CSV of phi (single-instance mode)")
    p.add_argument("--psi", type=Path, help="node CSV of psi on the same nodes")
    p.add_argument("--delta", type=_positive(float), default=0.1)
    p.add_argument("--x0", type=float, nargs=2)
    p.add_argument("--tol", type=_positive(float), default=1e-9)

    p = add("certify", cmd_certify, "nonexistence certificate for a nonpositive right-hand side")
    p.add_argument("--rhs", required=True, type=Path, help="CSV i,j,x,y,value,mask")
    p.add_argument("--boundary-constant", type=float, required=True)
    p.add_argument("--tol", type=_positive(float), default=1e-8)
    p.add_argument("--max-iters", type=_positive(int), default=5000)

    p = add("ns-run", cmd_ns_run, "Navier-Stokes run with pressure diagnostics")
    p.add_argument("--config", required=True, type=Path, help="key=value file")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--diag-every", type=int, default=0)
    p.add_argument("--tol", type=_positive(float), default=1e-10)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"[error] cannot create output directory {out}: {exc}")
        return MALFORMED
    _echo_manifest(args, out)
    try:
        return args.func(args, out)
    except io.MalformedInput as exc:
        for e in exc.errors:
            print(f"[error] {exc.path}: {e}")
        return MALFORMED
    except FileNotFoundError as exc:
        print(f"[error] {exc}")
        return MALFORMED
    except (InputError, InvalidNodeSet, HypothesisViolated, InfeasibleDomain, TooCoarse, CFLViolation, PreconditionFailed) as exc:
        print(f"[error] {type(exc).__name__}: {exc}")
        return MALFORMED
    except NotConverged as exc:
        print(f"[error] {exc}")
        return VIOLATION
    except AlexandrovError as exc:
        print(f"[error] {type(exc).__name__}: {exc}")
        return VIOLATION


if __name__ == "__main__":
    sys.exit(main())
