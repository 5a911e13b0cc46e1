import math

import numpy as np
import pytest

from plab.errors import AxisymmetryError, DilationError, NormParameterError
from plab.models import INF, BesovParams, LorentzParams, SpectralField, VectorField
from plab.profiles import random_band_limited
from plab.services import axisym
from plab.services import norms


@pytest.mark.parametrize("text,value", [("inf", INF), ("∞", INF), ("2", 2.0), (1.5, 1.5)])
def test_parse_exponent(text, value):
    assert norms.parse_exponent(text) == value


def test_parameter_validation():
    with pytest.raises(NormParameterError):
        LorentzParams(INF, 2.0)
    with pytest.raises(NormParameterError):
        BesovParams(0.0, 0.5, 1.0)
    with pytest.raises(NormParameterError):
        BesovParams(math.inf, 2.0, 1.0)


def test_lebesgue_of_constant(grid16):
    f = SpectralField.from_samples(grid16, np.full(grid16.shape, 2.0))
    vol = (2 * math.pi) ** 3
    assert norms.lebesgue_norm(f, 2) == pytest.approx(2.0 * vol ** 0.5, rel=1e-12)
    assert norms.lebesgue_norm(f, "inf") == 2.0


def _indicator(grid, m):
    samples = np.zeros(grid.shape)
    samples.reshape(-1)[:m] = 1.0
    return SpectralField.from_samples(grid, samples)


@pytest.mark.parametrize("p,q,m", [(1, 1, 1), (3, 1, 17), (6, 2, 17), (2, INF, 5), (3, 6, 40)])
def test_lorentz_of_indicator(grid16, p, q, m):
    f = _indicator(grid16, m)
    measure = m * grid16.cell_measure
    expected = measure ** (1 / p) if q == INF else (p / q) ** (1 / q) * measure ** (1 / p)
    assert norms.lorentz_norm(f, LorentzParams(p, q)) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_lorentz_diagonal_is_lebesgue(grid16, rng, p):
    f = random_band_limited(grid16, rng)
    assert norms.lorentz_norm(f, LorentzParams(p, p)) == pytest.approx(norms.lebesgue_norm(f, p), rel=1e-8)


def test_lorentz_nesting_is_contractive(grid16, rng):
    f = random_band_limited(grid16, rng)
    assert norms.lorentz_nesting_constant(f, 3.0, 1.0, 2.0) <= 1.0 + 1e-12
    with pytest.raises(NormParameterError):
        norms.lorentz_nesting_constant(f, 3.0, 2.0, 1.0)


def test_besov_of_constant(grid16, pu):
    f = SpectralField.from_samples(grid16, np.full(grid16.shape, -1.5))
    vol = (2 * math.pi) ** 3
    value = norms.besov_norm(f, BesovParams(0.0, 2.0, 1.0), pu)
    assert value == pytest.approx(1.5 * vol ** 0.5, rel=1e-10)


def test_besov_index_monotone_and_triangle(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    g = random_band_limited(grid32, rng)
    assert norms.besov_norm(f, BesovParams(0.0, INF, INF), pu) <= norms.besov_norm(f, BesovParams(0.0, INF, 1.0), pu)
    bp = BesovParams(0.5, 2.0, 1.0)
    assert norms.besov_norm(f + g, bp, pu) <= norms.besov_norm(f, bp, pu) + norms.besov_norm(g, bp, pu) + 1e-10


def test_vector_block_norms_cover_window(grid16, pu, rng):
    v = VectorField(tuple(random_band_limited(grid16, rng) for _ in range(3)))
    assert sorted(norms.block_norms(v, 2.0, pu)) == [-1, 0, 1, 2]


def test_embedding_ratio_edges(grid32, pu):
    zero = VectorField(tuple(SpectralField.zeros(grid32) for _ in range(3)))
    assert norms.embedding_ratio(zero, 2.0, pu) == 0.0
    with pytest.raises(NormParameterError):
        norms.embedding_ratio(zero, 3.0, pu)
    with pytest.raises(AxisymmetryError):
        norms.embedding_ratio(axisym.swirl(grid32, 1.0), 2.0, pu)


def test_dilation_identity(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    np.testing.assert_allclose(norms.anisotropic_dilate(f, 1.0).samples, f.samples, atol=1e-12)
    assert norms.dilation_ratio(f, 1.0, pu) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("lam", [1.5, 0.0, 1.0 / 32])
def test_dilation_rejects_factor(grid32, rng, lam):
    f = random_band_limited(grid32, rng)
    with pytest.raises(DilationError):
        norms.anisotropic_dilate(f, lam)


def test_sobolev_zero_order_is_l2(grid16, rng):
    f = random_band_limited(grid16, rng)
    assert norms.sobolev_norm(f, 0.0) == pytest.approx(norms.lebesgue_norm(f, 2), rel=1e-10)


def test_sobolev_identity_ratio_at_zero_order(grid32, pu, rng):
    for _ in range(3):
        f = random_band_limited(grid32, rng)
        ratio = norms.sobolev_identity_ratio(f, 0.0, pu)
        assert 1.0 / math.sqrt(2.0) - 1e-12 <= ratio <= 1.0 + 1e-12
    assert norms.sobolev_identity_ratio(SpectralField.zeros(grid32), 0.0, pu) == 0.0


def test_besov_embedding_ratio(grid32, pu, rng):
    f = random_band_limited(grid32, rng)
    assert norms.besov_embedding_ratio(f, 0.0, 2.0, 1.0, 2.0, INF, pu) <= 1.0 + 1e-12
    assert norms.besov_embedding_ratio(f, 0.0, 2.0, 2.0, 2.0, 2.0, pu) == pytest.approx(1.0)
    assert math.isfinite(norms.besov_embedding_ratio(f, 0.0, 2.0, 2.0, INF, INF, pu))
    with pytest.raises(NormParameterError):
        norms.besov_embedding_ratio(f, 0.0, INF, 1.0, 2.0, 1.0, pu)
