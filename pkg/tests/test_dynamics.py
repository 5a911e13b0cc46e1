import math
from dataclasses import replace

import numpy as np
import pytest

from plab.errors import AdmissibilityError, CFLViolation, HistoryMismatchError
from plab.models import DIAGNOSTIC_CHANNELS, INF, BesovParams, SolverConfig, SpectralField, VectorField
from plab.profiles import random_band_limited, random_solenoidal, ring_vortex
from plab.services import axisym
from plab.services import dynamics as dyn


def _gaussian_alpha(grid, amplitude=1.0):
    x1, x2, x3 = grid.mesh
    return SpectralField.from_samples(grid, amplitude * np.exp(-2.0 * (x1 ** 2 + x2 ** 2 + x3 ** 2)))


def _zero_flow(grid):
    return VectorField(tuple(SpectralField.zeros(grid) for _ in range(3)), divergence_free=True)


def _gap(a: VectorField, b: VectorField) -> float:
    return (a - b).max_abs() / max(a.max_abs(), b.max_abs(), 1e-300)


def test_zero_data_is_a_fixed_point(grid16, pu):
    cfg = SolverConfig(dt=0.01, t_end=0.03)
    run = dyn.evolve_alpha(SpectralField.zeros(grid16), cfg, pu)
    assert len(run.diagnostics) == 4
    assert run.final.alpha.max_abs() == 0
    assert run.final.u.max_abs() == 0


def test_short_run_records_every_channel(grid16, pu):
    cfg = SolverConfig(dt=0.01, t_end=0.02)
    run = dyn.evolve_alpha(_gaussian_alpha(grid16), cfg, pu)
    frame = run.diagnostics.to_frame()
    assert list(frame.columns)[0] == "t"
    assert set(frame.columns[1:]) == set(DIAGNOSTIC_CHANNELS)
    assert run.times[-1] == pytest.approx(0.02)
    assert len(run.alphas) == 3
    assert run.flags == {"alpha_L31_nonincreasing": True}


def test_history_can_be_dropped(grid16, pu):
    cfg = SolverConfig(dt=0.01, t_end=0.03, snapshot_every=2)
    run = dyn.evolve_alpha(_gaussian_alpha(grid16), cfg, pu, keep_history=False)
    assert len(run.alphas) == 1
    assert [s.step for s in run.states] == [0, 3]


def test_step_count_lands_on_t_end(grid16, pu):
    cfg = SolverConfig(dt=0.03, t_end=0.1)
    run = dyn.evolve_alpha(_gaussian_alpha(grid16), cfg, pu)
    assert run.dt == pytest.approx(0.025)
    assert run.times[-1] == pytest.approx(0.1)


def test_cfl_violation_keeps_partial_trajectory(grid16, pu):
    cfg = SolverConfig(dt=5.0, t_end=10.0)
    with pytest.raises(CFLViolation) as info:
        dyn.evolve_alpha(_gaussian_alpha(grid16, 10.0), cfg, pu)
    assert info.value.step == 1
    assert info.value.trajectory is not None
    assert len(info.value.trajectory.diagnostics) == 1


def test_profile_run_on_fine_grid(grid64, pu):
    cfg = SolverConfig(dt=0.01, t_end=0.01)
    run = dyn.evolve(ring_vortex(), cfg, grid64, pu)
    assert run.profile["name"] == "ring_vortex"
    assert np.all(np.isfinite(run.diagnostics.channel("energy")))


def test_velocity_history_interpolates(grid16, rng):
    u0 = random_solenoidal(grid16, rng)
    u1 = random_solenoidal(grid16, rng)
    hist = dyn.VelocityHistory.from_fields([0.0, 1.0], [u0, u1])
    mid = hist.at(0.25)
    expected = VectorField(tuple(a * 0.75 + b * 0.25 for a, b in zip(u0, u1)))
    assert _gap(mid, expected) <= 1e-14
    assert hist.at(1.0) is u1
    with pytest.raises(HistoryMismatchError):
        hist.at(1.5)
    with pytest.raises(HistoryMismatchError):
        dyn.VelocityHistory.from_fields([0.0, 0.0], [u0, u1])


def test_vorticity_model_without_flow_is_identity(grid16):
    w0 = axisym.omega_from_alpha(_gaussian_alpha(grid16))
    cfg = SolverConfig(t_end=0.1)
    hist = dyn.VelocityHistory.constant(_zero_flow(grid16), 0.1, steps=4)
    ws = dyn.evolve_vorticity_model(hist, w0, cfg)
    assert len(ws) == 5
    assert _gap(ws[-1], w0) <= 1e-14


def test_vorticity_model_is_linear(grid16, rng):
    u = random_solenoidal(grid16, rng)
    hist = dyn.VelocityHistory.constant(u, 0.02, steps=2)
    cfg = SolverConfig(t_end=0.02)
    w1 = random_solenoidal(grid16, rng)
    w2 = random_solenoidal(grid16, rng)
    a, b = 0.7, -1.3
    combo = VectorField(tuple(x * a + y * b for x, y in zip(w1, w2)))
    out = dyn.evolve_vorticity_model(hist, combo, cfg)[-1]
    r1 = dyn.evolve_vorticity_model(hist, w1, cfg)[-1]
    r2 = dyn.evolve_vorticity_model(hist, w2, cfg)[-1]
    expected = VectorField(tuple(x * a + y * b for x, y in zip(r1, r2)))
    assert _gap(out, expected) <= 1e-10


def test_model_rejects_foreign_grid(grid16, grid32, rng):
    hist = dyn.VelocityHistory.constant(_zero_flow(grid16), 0.1, steps=2)
    with pytest.raises(HistoryMismatchError):
        dyn.evolve_vorticity_model(hist, random_solenoidal(grid32, rng), SolverConfig(t_end=0.1))


def test_transport_without_flow_has_unit_constant(grid16, pu, rng):
    f0 = random_band_limited(grid16, rng)
    hist = dyn.VelocityHistory.constant(_zero_flow(grid16), 0.05, steps=2)
    audit = dyn.transport_estimate_audit(hist, f0, BesovParams(0.5, 2.0, 2.0), SolverConfig(t_end=0.05), pu)
    assert audit.variable == "U1"
    assert audit.constant == pytest.approx(1.0, abs=1e-12)
    assert list(audit.frame().columns) == ["t", "ratio", "U1"]


@pytest.mark.parametrize("bp,variable", [
    (BesovParams(0.0, INF, INF), "U1"),
    (BesovParams(-1.0, 2.0, INF), "U"),
    (BesovParams(1.0, INF, 1.0), "U"),
])
def test_exponent_variable(bp, variable):
    assert dyn.exponent_variable(bp) == variable


@pytest.mark.parametrize("bp", [BesovParams(1.0, 2.0, 2.0), BesovParams(-1.5, 2.0, INF), BesovParams(-1.0, 2.0, 1.0)])
def test_inadmissible_transport_indices(bp):
    with pytest.raises(AdmissibilityError):
        dyn.exponent_variable(bp)


def test_gronwall_constant():
    assert dyn.gronwall_constant(math.e, 1.0) == pytest.approx(1.0)
    assert dyn.gronwall_constant(1.7, 0.0) == 1.7


def test_time_integral():
    out = dyn.time_integral([0.0, 1.0, 2.0], [1.0, 1.0, 3.0])
    np.testing.assert_allclose(out, [0.0, 1.0, 3.0])


def test_frozen_family_decay_report(grid16, pu):
    omega0 = axisym.omega_from_alpha(_gaussian_alpha(grid16))
    family = dyn.frozen_family(omega0, pu, times=(0.0, 1.0))
    report = dyn.block_decay_report(family)
    assert list(report.entries.columns) == ["t", "j", "q", "m"]
    assert report.entries["m"].min() >= dyn.MATRIX_FLOOR
    assert all(math.isfinite(b) for b in report.offsets.values())
    assert report.slope == 0.0
    assert dyn.growth_constant(family, 1.0) == 0.0
    assert list(report.offsets_frame().columns) == ["t", "b", "U"]


def test_tilde_family_reassembles_vorticity_at_start(grid32, pu):
    cfg = SolverConfig(dt=0.01, t_end=0.02)
    run = dyn.evolve_alpha(_gaussian_alpha(grid32), cfg, pu)
    family = dyn.evolve_tilde_family(run, pu, report_times=(0.01,))
    assert family.times[0] == 0.0
    assert len(family.times) == len(run.times)
    assert family.residuals[0] <= 1e-8
    assert len(family.matrices) == 3
    assert len(family.snapshots) == 3


def test_solver_config_validation_survives_replace():
    cfg = SolverConfig(dt=0.1, t_end=1.0)
    assert replace(cfg, t_end=0.3).t_end == 0.3
    with pytest.raises(ValueError):
        replace(cfg, snapshot_every=0)
