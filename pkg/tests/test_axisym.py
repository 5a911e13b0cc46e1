import inspect

import numpy as np
import pytest

from plab.errors import AxisymmetryError, DivergenceError, GridError, SupportError
from plab.models import Grid, SpectralField, VectorField
from plab.profiles import dipole, ring_vortex
from plab.services import axisym, dynamics, norms
from plab.services import spectral_core as sc


def _gaussian_alpha(grid):
    x1, x2, x3 = grid.mesh
    return SpectralField.from_samples(grid, np.exp(-2.0 * (x1 ** 2 + x2 ** 2 + x3 ** 2)))


def test_realized_ring_has_no_swirl(grid32):
    u = axisym.realize(ring_vortex(), grid32)
    assert np.max(np.abs(axisym.angular_component(u))) <= 1e-12 * u.max_abs()


def test_realized_flow_is_divergence_free(grid64):
    u = axisym.realize(dipole(), grid64)
    assert sc.divergence_violation(u) <= 1e-6


def test_realize_rejects_bad_inputs():
    with pytest.raises(GridError):
        axisym.realize(ring_vortex(), Grid(16, dim=2))
    with pytest.raises(SupportError):
        axisym.realize(ring_vortex(radius=3.0), Grid(16))


def test_swirl_is_flagged(grid32):
    report = axisym.check_axisymmetry(axisym.swirl(grid32, 1.0), blocks=False)
    assert report.relative("angular") > 0.5
    assert not report.passed()


def test_biot_savart_of_zero(grid16):
    zero = VectorField(tuple(SpectralField.zeros(grid16) for _ in range(3)))
    assert axisym.biot_savart(zero).max_abs() == 0


def test_biot_savart_rejects_mean(grid16):
    ones = SpectralField.from_samples(grid16, np.ones(grid16.shape))
    omega = VectorField((ones, SpectralField.zeros(grid16), SpectralField.zeros(grid16)))
    with pytest.raises(DivergenceError):
        axisym.biot_savart(omega)


def test_biot_savart_inverts_curl(grid32):
    omega = axisym.omega_from_alpha(_gaussian_alpha(grid32))
    omega = sc.leray_project(omega)
    u = axisym.biot_savart(omega, validate=False)
    back = sc.curl(u)
    mean_free = VectorField(tuple(
        SpectralField.from_samples(grid32, c.samples - c.mean()) for c in omega
    ))
    assert (back - mean_free).max_abs() <= 1e-8 * omega.max_abs()


def test_quotient_by_r_recovers_alpha(grid32):
    alpha = _gaussian_alpha(grid32)
    v = axisym.omega_from_alpha(alpha)
    out = axisym.quotient_by_r(v, "theta")
    assert (out - alpha).max_abs() <= 1e-6


def test_quotient_by_r_rejects_wrong_structure(grid32):
    with pytest.raises(AxisymmetryError):
        axisym.quotient_by_r(axisym.swirl(grid32, 1.0), "r")


def test_omega_from_alpha_is_angular(grid16):
    alpha = _gaussian_alpha(grid16)
    w = axisym.omega_from_alpha(alpha)
    assert w[2].max_abs() == 0
    assert np.max(np.abs(axisym.radial_component(w))) <= 1e-14


def test_biot_savart_round_trip_on_realized_ring(grid64):
    omega = sc.curl(axisym.realize(ring_vortex(), grid64))
    back = sc.curl(axisym.biot_savart(omega))
    assert (back - omega).max_abs() <= 1e-9 * omega.max_abs()


def test_quotient_by_r_of_manufactured_vorticity(grid64):
    x1, x2, x3 = grid64.mesh
    alpha = SpectralField.from_samples(grid64, np.exp(-4.0 * (x1 ** 2 + x2 ** 2 + x3 ** 2)))
    out = axisym.quotient_by_r(axisym.omega_from_alpha(alpha), "theta")
    assert (out - alpha).max_abs() <= 1e-8


def test_realize_keeps_support_in_central_half_box():
    grid = Grid(32)
    assert ring_vortex().support_radius <= grid.box_length / 4
    with pytest.raises(SupportError, match="central half-box"):
        axisym.realize(ring_vortex(radius=0.6), grid)


def test_quarter_turn_has_order_four(grid16):
    a = np.random.default_rng(3).standard_normal(grid16.shape)
    out = a
    for _ in range(4):
        out = axisym.quarter_turn(out)
    np.testing.assert_array_equal(out, a)
    assert not np.array_equal(axisym.quarter_turn(a), a)


def test_realized_ring_is_quarter_turn_invariant(grid32):
    u = axisym.realize(ring_vortex(), grid32)
    assert axisym.quarter_turn_gap(u) <= 1e-14 * u.max_abs()


def test_ring_passes_every_check_with_blocks():
    u = axisym.realize(ring_vortex(), Grid(128))
    report = axisym.check_axisymmetry(u)
    assert report.blocks
    assert set(report.blocks) == set(report.block_leaks)
    assert report.omega_sup > 0
    assert report.passed(1e-8), report.violations


def test_block_checks_flag_an_even_first_component(grid32):
    x1, x2, x3 = grid32.mesh
    bump = SpectralField.from_samples(grid32, np.exp(-(x1 ** 2 + x2 ** 2 + x3 ** 2)))
    zero = SpectralField.zeros(grid32)
    report = axisym.check_axisymmetry(VectorField((bump, zero, zero)))
    assert max(report.blocks.values()) > 0.1
    assert not report.passed()


def test_division_guards_share_one_tolerance():
    for func in (axisym.quotient_by_r, norms.embedding_ratio, dynamics.initial_alpha):
        assert inspect.signature(func).parameters["tol"].default == axisym.STRUCTURE_GUARD
