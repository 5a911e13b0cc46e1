import math

import numpy as np
import pandas as pd
import pytest

from plab.errors import (
    BlockRangeError,
    DegenerateBlockError,
    GridError,
    HomogeneousMeanError,
    PartitionError,
)
from plab.models import Grid, SpectralField
from plab.profiles import random_band_limited, random_solenoidal, single_mode
from plab.services import spectral_core as sc
from plab.utils.fitting import spread


@pytest.mark.parametrize("n,dim", [(24, 3), (8, 3), (32, 4)])
def test_grid_rejects_bad_shapes(n, dim):
    with pytest.raises(GridError):
        Grid(n, dim=dim)


def test_grid_is_cell_centred(grid32):
    h = grid32.spacing
    assert grid32.axis[0] == pytest.approx(-math.pi + h / 2)
    assert not np.any(grid32.axis == 0.0)
    assert grid32.q_max == 3


def test_partition_rejects_bad_width():
    with pytest.raises(PartitionError):
        sc.build_partition(transition_width=1.2)


def test_partition_sums_and_supports(pu, grid32):
    viol = sc.partition_violations(pu, grid32)
    assert viol["inhomogeneous_sum"] <= 1e-12
    assert viol["homogeneous_sum"] <= 1e-12
    assert viol["nonadjacent_overlap"] == 0
    assert viol["low_overlap"] == 0


def test_block_range(grid32, pu):
    assert list(sc.block_range(grid32)) == [-1, 0, 1, 2, 3]
    hom = sc.block_range(grid32, homogeneous=True, pu=pu)
    assert hom.start == -sc.low_truncation(grid32, pu)
    assert hom.stop == grid32.q_max + 1


def test_delta_q_outside_window(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    with pytest.raises(BlockRangeError):
        sc.delta_q(f, grid32.q_max + 1, pu)


def test_decompose_reconstructs_band_limited_field(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    dec = sc.decompose(f, pu)
    assert dec.residual <= 1e-12
    np.testing.assert_allclose(dec.total().samples, f.samples, atol=1e-12)


def test_constant_lives_in_low_block(grid16, pu):
    f = SpectralField.from_samples(grid16, np.full(grid16.shape, 3.0))
    dec = sc.decompose(f, pu)
    np.testing.assert_allclose(dec.blocks[-1].samples, 3.0, rtol=1e-13)
    for q, block in dec.blocks.items():
        if q != -1:
            assert block.max_abs() <= 1e-14


def test_homogeneous_requires_zero_mean(grid16, pu):
    f = SpectralField.from_samples(grid16, np.ones(grid16.shape))
    with pytest.raises(HomogeneousMeanError):
        sc.decompose(f, pu, homogeneous=True)


def test_single_mode_splits_over_two_adjacent_blocks(grid32, pu):
    # |k| = 4 sits where the q = 1 and q = 2 annuli overlap
    f = single_mode(grid32, (4, 0, 0))
    dec = sc.decompose(f, pu)
    np.testing.assert_allclose((dec.blocks[1] + dec.blocks[2]).samples, f.samples, atol=1e-12)
    for q in (-1, 0, 3):
        assert dec.blocks[q].max_abs() <= 1e-12


def test_s_q_is_sum_of_lower_blocks(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    low = sc.s_q(f, 2, pu)
    acc = sum((sc.delta_q(f, j, pu) for j in (0, 1)), sc.delta_q(f, -1, pu))
    np.testing.assert_allclose(low.samples, acc.samples, atol=1e-12)


def test_partial_of_cosine(grid32):
    f = single_mode(grid32, (1, 0, 0))
    expected = -np.sin(grid32.mesh[0]) * np.ones(grid32.shape)
    np.testing.assert_allclose(sc.partial(f, 0).samples, expected, atol=1e-12)
    assert sc.partial(f, 1).max_abs() <= 1e-12


def test_leray_projection_is_divergence_free(grid32, rng):
    v = random_solenoidal(grid32, rng)
    assert sc.divergence_violation(v) <= 1e-12


def test_curl_of_gradient_vanishes(grid32, rng):
    f = random_band_limited(grid32, rng)
    assert sc.curl(sc.gradient(f)).max_abs() <= 1e-10


def test_dealiased_product_keeps_resolved_modes(grid32):
    a = single_mode(grid32, (2, 0, 0))
    b = single_mode(grid32, (3, 0, 0))
    np.testing.assert_allclose(sc.dealiased_product(a, b).samples, a.samples * b.samples, atol=1e-12)


def test_dealias_removes_high_modes(grid32):
    f = single_mode(grid32, (12, 0, 0))
    assert sc.dealias(f).max_abs() <= 1e-12


def test_evaluate_at_off_grid(grid32):
    f = single_mode(grid32, (2, 1, 0), phase=0.3)
    pts = np.array([[0.1, -0.7, 0.4], [1.3, 0.2, -2.0], [0.0, 0.0, 0.0]])
    expected = np.cos(2 * pts[:, 0] + pts[:, 1] + 0.3)
    np.testing.assert_allclose(sc.evaluate_at(f, pts), expected, atol=1e-10)


def test_bernstein_ratio_errors(grid32, pu):
    f = random_band_limited(grid32, np.random.default_rng(0))
    with pytest.raises(BlockRangeError):
        sc.bernstein_ratio(f, grid32.q_max + 1, 1, 2.0, math.inf, pu)
    with pytest.raises(DegenerateBlockError):
        sc.bernstein_ratio(SpectralField.zeros(grid32), 1, 1, 2.0, math.inf, pu)


def test_low_block_kernel_has_unit_mass(grid32, pu):
    assert sc.kernel_l1_norm(pu, -1, grid32) >= 1.0 - 1e-12


def test_export_partition_csv(pu, tmp_path):
    path = sc.export_partition_csv(pu, tmp_path / "partition.csv", samples=64)
    frame = pd.read_csv(path)
    assert len(frame) == 64
    assert {"rho", "chi", "phi"} <= set(frame.columns)


def test_leray_is_idempotent_and_kills_gradients(grid32, rng):
    g = random_band_limited(grid32, rng, zero_mean=True)
    grad = sc.gradient(g)
    assert sc.leray_project(grad).max_abs() <= 1e-12 * grad.max_abs()
    v = random_solenoidal(grid32, rng)
    assert (sc.leray_project(v) - v).max_abs() <= 1e-12 * v.max_abs()


def test_nonadjacent_blocks_annihilate(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    assert sc.delta_q(sc.delta_q(f, 0, pu), 2, pu).max_abs() <= 1e-12
    assert sc.delta_q(sc.delta_q(f, -1, pu), 1, pu).max_abs() <= 1e-12


def test_bernstein_identity_case(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    same, mixed = sc.bernstein_ratio(f, 1, 0, 2.0, 2.0, pu)
    assert same == pytest.approx(1.0)
    assert mixed == pytest.approx(1.0)


@pytest.mark.parametrize("a,b", [(math.inf, math.inf), (2.0, math.inf)])
def test_bernstein_constants_collapse_for_a_spike(grid32, pu, a, b):
    samples = np.zeros(grid32.shape)
    samples[5, 9, 20] = 1.0
    f = SpectralField.from_samples(grid32, samples)
    ratios = [sc.bernstein_ratio(f, q, 1, a, b, pu) for q in range(3)]
    assert spread(r[0] for r in ratios) <= 4.0
    assert spread(r[1] for r in ratios) <= 4.0
    assert all(r[0] > 0 for r in ratios)


def test_homogeneous_low_pass_telescopes(grid32, pu, rng):
    f = random_band_limited(grid32, rng, zero_mean=True)
    lo = -sc.low_truncation(grid32, pu)
    assert sc.s_dot_q(f, lo, pu).max_abs() == 0
    for q in range(lo, grid32.q_max + 1):
        step = sc.s_dot_q(f, q + 1, pu) - sc.s_dot_q(f, q, pu)
        assert (step - sc.delta_dot_q(f, q, pu)).max_abs() <= 1e-12 * f.max_abs()
    top = sc.s_dot_q(f, grid32.q_max + 1, pu)
    assert (top - f).max_abs() <= 1e-10 * f.max_abs()
    assert sc.decompose(f, pu, homogeneous=True).residual <= 1e-10
