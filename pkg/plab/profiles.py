"""Built-in axisymmetric test flows and random corpus fields.

Each profile comes from an azimuthal vector potential a = r g(r^2, z) e_theta,
so u = curl a has

    u_r = -r dg/dz,    u_z = 2 g + 2 r^2 dg/ds   (s = r^2)

which is divergence-free and regular on the axis without any division by r.
A ring is the average of the Gaussian exp(-|x - y|^2 / c^2) over the circle
|y'| = R, y3 = h:

    g = A exp(-((r - R)^2 + (z - h)^2) / c^2) i0e(2 r R / c^2)

so its spectrum decays like exp(-c^2 |xi|^2 / 4) and the envelope is below
CUTOFF at distance c sqrt(log(1/CUTOFF)) from the core circle.
"""
from __future__ import annotations

import logging
import math
from typing import Callable

import numpy as np
from scipy.special import i0e, i1e

from .errors import PlabError
from .models import AxisymProfile, Grid, SpectralField, VectorField
from .services import spectral_core as sc

logger = logging.getLogger(__name__)

CUTOFF = 1e-10
_LOG_CUTOFF = -math.log(CUTOFF)
_SMALL_ARGUMENT = 1e-8


def _i1e_over_x(x: np.ndarray) -> np.ndarray:
    """i1e(x) / x with the x -> 0 limit 1/2."""
    return np.divide(i1e(x), x, out=np.full_like(x, 0.5), where=x > _SMALL_ARGUMENT)


def _ring_terms(radius: float, core: float, height: float, amplitude: float):
    """g, dg/dz and dg/ds for one Gaussian ring centred at (radius, height)."""
    c2 = core ** 2

    def envelope(s, z):
        r = np.sqrt(s)
        x = np.asarray(2.0 * radius * r / c2, dtype=float)
        return amplitude * np.exp(-((r - radius) ** 2 + (z - height) ** 2) / c2), x

    def g(s, z):
        e, x = envelope(s, z)
        return e * i0e(x)

    def dg_dz(s, z):
        return g(s, z) * (-2.0 * (z - height) / c2)

    def dg_ds(s, z):
        e, x = envelope(s, z)
        return e * (-i0e(x) / c2 + 2.0 * radius ** 2 / c2 ** 2 * _i1e_over_x(x))

    return g, dg_dz, dg_ds


def _ring_extent(radius: float, core: float, height: float) -> float:
    return math.hypot(radius, height) + core * math.sqrt(_LOG_CUTOFF)


def _from_potential(name: str, terms: list, extent: float, params: dict) -> AxisymProfile:
    def u_r(r, z):
        s = r ** 2
        return -r * sum(t[1](s, z) for t in terms)

    def u_z(r, z):
        s = r ** 2
        return sum(2.0 * t[0](s, z) + 2.0 * s * t[2](s, z) for t in terms)

    return AxisymProfile(name, u_r, u_z, extent, params)


def ring_vortex(radius: float = 0.25, core: float = 0.27, amplitude: float = 1.0, height: float = 0.0) -> AxisymProfile:
    terms = [_ring_terms(radius, core, height, amplitude)]
    params = {"radius": radius, "core": core, "amplitude": amplitude, "height": height}
    return _from_potential("ring_vortex", terms, _ring_extent(radius, core, height), params)


def dipole(radius: float = 0.2, core: float = 0.27, separation: float = 0.3, amplitude: float = 1.0) -> AxisymProfile:
    """Two counter-rotating rings stacked along the axis."""
    h = 0.5 * separation
    terms = [
        _ring_terms(radius, core, h, amplitude),
        _ring_terms(radius, core, -h, -amplitude),
    ]
    params = {"radius": radius, "core": core, "separation": separation, "amplitude": amplitude}
    return _from_potential("dipole", terms, _ring_extent(radius, core, h), params)


def random_rings(seed: int = 0, count: int = 3) -> AxisymProfile:
    """Superposition of randomly placed smooth rings; deterministic in the seed."""
    rng = np.random.default_rng(seed)
    terms, extent = [], 0.0
    for _ in range(count):
        radius = rng.uniform(0.08, 0.16)
        core = rng.uniform(0.27, 0.29)
        height = rng.uniform(-0.06, 0.06)
        amplitude = rng.uniform(-1.0, 1.0)
        terms.append(_ring_terms(radius, core, height, amplitude))
        extent = max(extent, _ring_extent(radius, core, height))
    return _from_potential("random_rings", terms, extent, {"seed": seed, "count": count})


LIBRARY: dict[str, Callable[..., AxisymProfile]] = {
    "ring_vortex": ring_vortex,
    "dipole": dipole,
    "random_rings": random_rings,
}


def build_profile(kind: str, params: dict | None = None) -> AxisymProfile:
    try:
        factory = LIBRARY[kind]
    except KeyError:
        raise PlabError(f"unknown profile {kind!r}; choose from {sorted(LIBRARY)}") from None
    return factory(**(params or {}))


def profile_corpus(size: int, seed: int) -> list[AxisymProfile]:
    return [random_rings(seed=seed + i) for i in range(size)]


def random_band_limited(grid: Grid, rng: np.random.Generator, k_max: float | None = None,
                        zero_mean: bool = False) -> SpectralField:
    """Random real field with Fourier support in |k| <= k_max (default n/4)."""
    k_max = grid.n / 4 if k_max is None else k_max
    kk = np.sqrt(sum(k ** 2 for k in grid.index_wavenumbers))
    kk = np.broadcast_to(kk, grid.spectral_shape)
    noise = rng.standard_normal(grid.spectral_shape) + 1j * rng.standard_normal(grid.spectral_shape)
    coef = np.where(kk <= k_max, noise, 0.0)
    # round trip through the samples restores conjugate symmetry on the self-conjugate planes
    samples = grid.irfft(coef)
    f = SpectralField.from_samples(grid, samples / np.max(np.abs(samples)))
    if zero_mean:
        f = SpectralField.from_samples(grid, f.samples - f.mean())
    return f


def random_solenoidal(grid: Grid, rng: np.random.Generator, k_max: float | None = None) -> VectorField:
    v = VectorField(tuple(random_band_limited(grid, rng, k_max, zero_mean=True) for _ in range(grid.dim)))
    return sc.leray_project(v)


def single_mode(grid: Grid, k: tuple[int, ...], phase: float = 0.0) -> SpectralField:
    """cos(xi_k . x + phase) sampled on the grid."""
    arg = sum(grid.fundamental * ki * x for ki, x in zip(k, grid.mesh))
    return SpectralField.from_samples(grid, np.cos(arg + phase))
