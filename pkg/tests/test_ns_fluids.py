import numpy as np
import pytest

from alexandrov.errors import CFLViolation
from alexandrov.ns_fluids import (
    CHANNEL,
    NO_SLIP,
    FluidConfig,
    FluidState,
    PressureDiagnostics,
    SignOutcome,
    corner_coords,
    divergence,
    find_zero_of_laplacian,
    initial_state,
    kinetic_energy,
    ma_identity_residual,
    pressure_gradient_norm,
    pressure_laplacian,
    shear_flow_reference,
    sign_diagnostic,
    simulate,
    step,
    stream_function,
)


def shear_cfg(dt=1e-4):
    return FluidConfig(64, 32, 2.0, 1.0, dt, CHANNEL, "shear", {"mode": 1, "amplitude": 1.0})


def tg_cfg(n):
    return FluidConfig(n, n, 2.0, 2.0, 1e-5, NO_SLIP, "taylor_green", origin=(-1.0, -1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        FluidConfig(8, 16)
    with pytest.raises(ValueError):
        FluidConfig(16, 16, 1.0, 2.0)
    with pytest.raises(ValueError):
        FluidConfig(16, 16, boundary_kind="slip")
    with pytest.raises(CFLViolation):
        step(initial_state(FluidConfig(32, 32, dt=1e-3)), FluidConfig(32, 32, dt=1e-3))


def test_rest_state_stays_at_rest():
    cfg = FluidConfig(16, 16)
    s = step(initial_state(cfg), cfg)
    assert np.abs(s.u).max() == 0 and np.abs(s.v).max() == 0
    assert np.ptp(s.p) == 0
    assert np.abs(stream_function(s, cfg).values).max() == 0
    assert np.abs(pressure_laplacian(s, cfg).values).max() == 0
    assert ma_identity_residual(s, cfg).identity_residual_inf == 0


def test_shear_single_step_decay():
    cfg = shear_cfg()
    s0 = initial_state(cfg)
    s1 = step(s0, cfg)
    h = cfg.h
    # discrete heat-equation eigenvalue of sin(pi y) under the ghost-reflected stencil
    lam = 4 / h**2 * np.sin(np.pi * h / 2) ** 2
    assert s1.u.max() / s0.u.max() == pytest.approx(1 - lam * cfg.dt, rel=1e-10)
    assert s1.u.max() / s0.u.max() == pytest.approx(1 - np.pi**2 * cfg.dt, abs=1e-6)
    assert pressure_gradient_norm(s1, cfg) < 1e-10


def test_shear_reference():
    assert shear_flow_reference(0.5, 0.0) == 1.0
    assert shear_flow_reference(0.0, 0.3) == 0.0
    assert shear_flow_reference(0.5, 0.1) == pytest.approx(0.372708, abs=1e-6)
    assert shear_flow_reference(0.5, 0.1) == pytest.approx(np.exp(-np.pi**2 / 10), rel=1e-15)
    with pytest.raises(ValueError):
        shear_flow_reference(0.5, 0.0, mode_n=0)


def test_shear_stream_and_pressure():
    cfg = shear_cfg()
    s = initial_state(cfg)
    phi = stream_function(s, cfg)
    X, Y = corner_coords(cfg)
    # exact integration of the cell-centred samples: second order to 1 - cos(pi y) / pi
    assert np.abs(phi.values - (1 - np.cos(np.pi * Y)) / np.pi).max() < 5 * cfg.h**2
    d = ma_identity_residual(s, cfg)
    assert np.abs(d.delta_p.values).max() <= 1e-8
    assert d.identity_residual_inf <= 1e-8
    _, m = find_zero_of_laplacian(d)
    assert m <= 1e-8


def test_taylor_green_stream_and_laplacian():
    cfg = tg_cfg(64)
    s = initial_state(cfg)
    X, Y = corner_coords(cfg)
    phi = stream_function(s, cfg)
    assert np.abs(phi.values - np.sin(np.pi * X) * np.sin(np.pi * Y) / np.pi).max() <= 5 * cfg.h**2
    # reconstruction is exact on the staggered faces
    assert np.abs(np.diff(phi.values, axis=1) / cfg.h - s.u).max() < 1e-12
    assert np.abs(-np.diff(phi.values, axis=0) / cfg.h - s.v).max() < 1e-12
    d = ma_identity_residual(s, cfg)
    i, j = d.delta_p.nearest_index((0, 0))
    # error constants measured at h = 1/32 and 1/64 are 210 and 57 (times h^2)
    assert d.delta_p.values[i, j] == pytest.approx(-2 * np.pi**2, abs=250 * cfg.h**2)
    assert d.det_hess_stream.values[i, j] == pytest.approx(-np.pi**2, abs=70 * cfg.h**2)
    i, j = d.delta_p.nearest_index((0.25, 0.25))
    assert abs(d.delta_p.values[i, j]) <= 250 * cfg.h**2
    assert sign_diagnostic(d).outcome is SignOutcome.SIGN_CHANGE


def test_identity_second_order():
    r = [ma_identity_residual(initial_state(tg_cfg(n)), tg_cfg(n)).identity_residual_inf for n in (32, 64)]
    assert 3.4 <= r[0] / r[1] <= 4.6


def test_no_slip_energy_decays_and_divergence_free():
    cfg = FluidConfig(32, 32, dt=1e-4, initial_condition="stream_bump")
    s = initial_state(cfg)
    energies = [kinetic_energy(s, cfg)]
    for _ in range(20):
        s = step(s, cfg)
        assert np.abs(divergence(s.u, s.v, cfg)).max() <= 1e-8
        energies.append(kinetic_energy(s, cfg))
    assert all(b < a for a, b in zip(energies, energies[1:]))
    tg = tg_cfg(32)
    s1 = step(initial_state(tg), tg)
    assert kinetic_energy(s1, tg) < kinetic_energy(initial_state(tg), tg)


def test_simulate_records_rows_and_snapshots():
    cfg = FluidConfig(32, 32, dt=1e-4, initial_condition="stream_bump")
    s, rows, snaps = simulate(cfg, 10, diag_every=5)
    assert len(rows) == len(snaps) == 3
    assert s.t == pytest.approx(10 * cfg.dt)
    assert [r["t"] for r in rows] == pytest.approx([0, 5e-4, 1e-3])


def no_slip_stream(n=32):
    cfg = FluidConfig(n, n, initial_condition="stream_bump")
    return stream_function(initial_state(cfg), cfg)


def injected(value):
    stream = no_slip_stream()
    dp = stream.with_values(np.full(stream.values.shape, float(value)), mask=stream.interior_mask)
    return PressureDiagnostics.from_fields(dp, stream)


def test_injected_negative_laplacian():
    d = injected(-1.0)
    loc, m = find_zero_of_laplacian(d)
    assert m == 1.0
    v = sign_diagnostic(d)
    assert v.outcome is SignOutcome.IMPOSSIBLE_NEGATIVE and not v.consistent


def test_injected_positive_laplacian():
    v = sign_diagnostic(injected(1.0))
    assert v.outcome is SignOutcome.IMPOSSIBLE_POSITIVE
    assert abs(v.stream_laplacian_integral) <= 1e-8
    assert not v.stream_laplacian_one_signed


def test_stream_requires_divergence_free():
    cfg = FluidConfig(16, 16)
    s = initial_state(cfg)
    u = s.u.copy()
    u[5, 5] = 1.0
    from alexandrov.errors import PoissonNotConverged

    with pytest.raises(PoissonNotConverged):
        stream_function(FluidState(u, s.v, s.p), cfg)
