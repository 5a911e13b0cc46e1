import math

import pytest

from plab.utils.fitting import fit_constant, linear_fit, spread


def test_fit_constant_ignores_non_positive_pairs():
    fit = fit_constant([2.0, 4.0, 0.0], [1.0, 1.0, 3.0])
    assert fit.samples == 2
    assert fit.max_ratio == pytest.approx(4.0)
    assert fit.log_fit == pytest.approx(math.sqrt(8.0))


def test_fit_constant_empty():
    assert fit_constant([0.0], [0.0]).max_ratio == 0.0


def test_linear_fit_exact_line():
    slope, intercept, resid = linear_fit([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
    assert slope == pytest.approx(2.0)
    assert intercept == pytest.approx(1.0)
    assert resid == pytest.approx(0.0, abs=1e-12)


def test_linear_fit_degenerate_abscissa():
    assert linear_fit([1.0, 1.0], [2.0, 4.0]) == (0.0, 3.0, 1.0)


def test_spread():
    assert spread([2.0, 8.0, 0.0]) == 4.0
    assert spread([3.0]) == 1.0
