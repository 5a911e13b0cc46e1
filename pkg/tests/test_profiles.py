import json

import numpy as np
import pytest

from plab.errors import PlabError
from plab.models import Grid
from plab.profiles import (
    build_profile,
    profile_corpus,
    random_band_limited,
    random_rings,
    random_solenoidal,
    ring_vortex,
    single_mode,
)
from plab.schemas import default_scenarios
from plab.services import axisym, dynamics, norms
from plab.services import spectral_core as sc


def test_build_profile_by_name():
    p = build_profile("dipole", {"radius": 0.9})
    assert p.name == "dipole"
    assert p.params["radius"] == 0.9
    with pytest.raises(PlabError):
        build_profile("hill_vortex")


def test_profiles_vanish_radially_on_axis():
    z = np.linspace(-2.0, 2.0, 9)
    for p in (ring_vortex(), build_profile("dipole"), random_rings(3)):
        assert np.all(p.u_r(np.zeros_like(z), z) == 0)


def test_support_fits_central_half_box():
    for p in [ring_vortex(), build_profile("dipole"), *profile_corpus(20, seed=11)]:
        assert p.support_radius <= np.pi / 2


def test_random_rings_deterministic():
    r = np.array([0.2, 0.9, 1.4])
    z = np.array([0.0, 0.1, -0.3])
    a, b = random_rings(7), random_rings(7)
    np.testing.assert_array_equal(a.u_z(r, z), b.u_z(r, z))


def test_shifted_profile_moves_along_axis():
    p = ring_vortex()
    q = p.shifted(0.5)
    r, z = np.array([1.0]), np.array([0.3])
    np.testing.assert_allclose(q.u_z(r, z + 0.5), p.u_z(r, z))
    assert q.support_radius == pytest.approx(p.support_radius + 0.5)


def test_random_band_limited(grid32, rng):
    f = random_band_limited(grid32, rng, zero_mean=True)
    assert abs(f.mean()) <= 1e-14
    k = np.sqrt(sum(kk ** 2 for kk in grid32.index_wavenumbers))
    spectrum = np.abs(f.coefficients)
    assert np.max(np.where(np.broadcast_to(k, grid32.spectral_shape) > 8, spectrum, 0.0)) <= 1e-10


def test_random_solenoidal_is_divergence_free(grid16, rng):
    assert sc.divergence_violation(random_solenoidal(grid16, rng)) <= 1e-12


def test_single_mode(grid16):
    f = single_mode(grid16, (1, 2, 0), phase=0.5)
    assert f.max_abs() <= 1.0
    assert f.mean() == pytest.approx(0.0, abs=1e-14)


def test_every_shipped_scenario_resolves_its_profile(pu):
    seen = set()
    for spec in default_scenarios().values():
        key = (spec.profile.kind, json.dumps(spec.profile.params, sort_keys=True), spec.grid.n)
        if key in seen:
            continue
        seen.add(key)
        grid = spec.grid.build()
        profile = build_profile(spec.profile.kind, spec.profile.params)
        u = axisym.realize(profile, grid)
        assert dynamics.initial_alpha(profile, grid).max_abs() > 0
        assert np.isfinite(norms.embedding_ratio(u, spec.solver.besov_p, pu))


def test_ring_corpus_passes_structure_guard():
    grid = Grid(64)
    for p in profile_corpus(10, seed=0):
        assert dynamics.initial_alpha(p, grid).max_abs() > 0
