"""Littlewood-Paley machinery on the periodic box.

Blocks, low-frequency cut-offs, Fourier derivatives, the Leray projector,
the 2/3-rule dealiasing and trigonometric interpolation off the grid.
All multipliers act on the physical wavenumber |xi| = 2 pi |k| / L.
"""
from __future__ import annotations

import logging
import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
import pandas as pd
import scipy.fft as sfft

from ..errors import (
    BlockRangeError,
    DegenerateBlockError,
    GridError,
    GridMismatchError,
    HomogeneousMeanError,
    PartitionError,
)
from ..models import (
    INF,
    DyadicDecomposition,
    Grid,
    PartitionOfUnity,
    SpectralField,
    VectorField,
)

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-12
_EVAL_BATCH = 128


def build_partition(inner_radius: float = 0.75, transition_width: float = 7.0 / 9.0) -> PartitionOfUnity:
    if not inner_radius > 0:
        raise PartitionError(f"inner_radius must be positive, got {inner_radius}")
    if not 0 < transition_width < 1:
        raise PartitionError(
            f"transition_width={transition_width} outside (0, 1): the annuli of "
            "phi(2^-p .) and phi(2^-q .) would overlap for |p - q| >= 2"
        )
    return PartitionOfUnity(inner_radius, transition_width)


def low_truncation(grid: Grid, pu: PartitionOfUnity) -> int:
    """Number of negative block indices needed to cover the lowest nonzero mode."""
    return math.ceil(math.log2(pu.outer_radius / grid.fundamental))


def block_range(grid: Grid, homogeneous: bool = False, pu: PartitionOfUnity | None = None) -> range:
    if homogeneous:
        pu = pu or build_partition()
        return range(-low_truncation(grid, pu), grid.q_max + 1)
    return range(-1, grid.q_max + 1)


@lru_cache(maxsize=256)
def block_multiplier(grid: Grid, q: int, pu: PartitionOfUnity, homogeneous: bool = False) -> np.ndarray:
    rho = grid.frequency_magnitude
    if q == -1 and not homogeneous:
        m = pu.chi(rho)
    else:
        m = pu.phi(rho * 2.0 ** -q)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def low_pass_multiplier(grid: Grid, q: int, pu: PartitionOfUnity) -> np.ndarray:
    # sum of blocks -1..q-1 telescopes to chi(2^-q .); empty for q <= -1
    if q <= -1:
        m = np.zeros(grid.spectral_shape)
    else:
        m = pu.chi(grid.frequency_magnitude * 2.0 ** -q)
    m.setflags(write=False)
    return m


def _check_block(grid: Grid, q: int, homogeneous: bool, pu: PartitionOfUnity):
    window = block_range(grid, homogeneous, pu)
    if q not in window:
        raise BlockRangeError(
            f"block index {q} outside [{window.start}, {window.stop - 1}] for n={grid.n}"
        )


def delta_q(f: SpectralField, q: int, pu: PartitionOfUnity | None = None) -> SpectralField:
    pu = pu or build_partition()
    _check_block(f.grid, q, False, pu)
    return SpectralField.from_coefficients(f.grid, f.coefficients * block_multiplier(f.grid, q, pu))


def delta_dot_q(f: SpectralField, q: int, pu: PartitionOfUnity | None = None) -> SpectralField:
    """Homogeneous block; q may be negative down to the low truncation."""
    pu = pu or build_partition()
    _check_block(f.grid, q, True, pu)
    return SpectralField.from_coefficients(
        f.grid, f.coefficients * block_multiplier(f.grid, q, pu, True)
    )


def s_q(f: SpectralField, q: int, pu: PartitionOfUnity | None = None) -> SpectralField:
    pu = pu or build_partition()
    if not 0 <= q <= f.grid.q_max + 1:
        raise BlockRangeError(f"S_q needs 0 <= q <= {f.grid.q_max + 1}, got {q}")
    return SpectralField.from_coefficients(f.grid, f.coefficients * low_pass_multiplier(f.grid, q, pu))


def s_dot_q(f: SpectralField, q: int, pu: PartitionOfUnity | None = None) -> SpectralField:
    """Homogeneous low-pass: sum of homogeneous blocks below q (mean removed)."""
    pu = pu or build_partition()
    lo = -low_truncation(f.grid, pu)
    if not lo <= q <= f.grid.q_max + 1:
        raise BlockRangeError(f"homogeneous S_q needs {lo} <= q <= {f.grid.q_max + 1}, got {q}")
    m = sum(
        (block_multiplier(f.grid, j, pu, True) for j in range(lo, q)),
        np.zeros(f.grid.spectral_shape),
    )
    return SpectralField.from_coefficients(f.grid, f.coefficients * m)


def _assert_zero_mean(f: SpectralField):
    scale = max(f.max_abs(), np.finfo(float).tiny)
    if abs(f.mean()) > MEAN_TOLERANCE * scale:
        raise HomogeneousMeanError(
            f"homogeneous blocks are defined modulo constants on the torus; field mean "
            f"{f.mean():.3e} exceeds {MEAN_TOLERANCE:g} x sup norm"
        )


def decompose(f: SpectralField, pu: PartitionOfUnity | None = None, homogeneous: bool = False) -> DyadicDecomposition:
    pu = pu or build_partition()
    grid = f.grid
    if homogeneous:
        _assert_zero_mean(f)
    window = block_range(grid, homogeneous, pu)
    blocks = {
        q: SpectralField.from_coefficients(
            grid, f.coefficients * block_multiplier(grid, q, pu, homogeneous)
        )
        for q in window
    }
    total = sum((b.coefficients for b in blocks.values()), np.zeros(grid.spectral_shape, complex))
    diff = grid.irfft(f.coefficients - total)
    scale = f.max_abs()
    residual = float(np.max(np.abs(diff)) / scale) if scale > 0 else 0.0
    logger.debug("decompose n=%d blocks=%d residual=%.2e", grid.n, len(blocks), residual)
    return DyadicDecomposition(
        blocks=blocks,
        q_min=window.start,
        q_max=window.stop - 1,
        homogeneous=homogeneous,
        residual=residual,
        low_truncation=low_truncation(grid, pu) if homogeneous else None,
    )


def decompose_vector(v: VectorField, pu: PartitionOfUnity | None = None) -> dict[int, VectorField]:
    pu = pu or build_partition()
    per_comp = [decompose(c, pu).blocks for c in v]
    return {
        q: VectorField(tuple(b[q] for b in per_comp), v.divergence_free)
        for q in per_comp[0]
    }


def partial(f: SpectralField, axis: int, order: int = 1) -> SpectralField:
    grid = f.grid
    xi = grid.derivative_wavevector[axis] if order % 2 else grid.wavevector[axis]
    return SpectralField.from_coefficients(grid, f.coefficients * (1j * xi) ** order)


def gradient(f: SpectralField) -> VectorField:
    return VectorField(tuple(partial(f, a) for a in range(f.grid.dim)))


def divergence(v: VectorField) -> SpectralField:
    grid = v.grid
    coef = sum(1j * xi * c.coefficients for xi, c in zip(grid.derivative_wavevector, v))
    return SpectralField.from_coefficients(grid, coef)


def _require_3d(grid: Grid, what: str):
    if grid.dim != 3:
        raise GridError(f"{what} needs a 3-d grid, got dim={grid.dim}")


def curl(u: VectorField) -> VectorField:
    grid = u.grid
    _require_3d(grid, "curl")
    k1, k2, k3 = grid.derivative_wavevector
    a1, a2, a3 = (c.coefficients for c in u)
    comps = (
        1j * (k2 * a3 - k3 * a2),
        1j * (k3 * a1 - k1 * a3),
        1j * (k1 * a2 - k2 * a1),
    )
    return VectorField(
        tuple(SpectralField.from_coefficients(grid, c) for c in comps), divergence_free=True
    )


def leray_project(v: VectorField) -> VectorField:
    grid = v.grid
    _require_3d(grid, "leray_project")
    ks = grid.derivative_wavevector
    k2 = np.broadcast_to(sum(k ** 2 for k in ks), grid.spectral_shape)
    inv = np.divide(1.0, k2, out=np.zeros(grid.spectral_shape), where=k2 > 0)
    dot = sum(k * c.coefficients for k, c in zip(ks, v))
    comps = tuple(
        SpectralField.from_coefficients(grid, c.coefficients - k * dot * inv) for k, c in zip(ks, v)
    )
    return VectorField(comps, divergence_free=True)


def divergence_violation(v: VectorField) -> float:
    """Sup of the spectral divergence relative to the sup of the field."""
    scale = v.max_abs()
    return divergence(v).max_abs() / scale if scale > 0 else 0.0


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField.from_coefficients(f.grid, f.coefficients * f.grid.dealias_mask)


def dealiased_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """D(Du * Dv): alias-free product for the 2/3 rule."""
    if u.grid != v.grid:
        raise GridMismatchError(f"{u.grid} != {v.grid}")
    grid = u.grid
    mask = grid.dealias_mask
    prod = grid.irfft(u.coefficients * mask) * grid.irfft(v.coefficients * mask)
    return SpectralField.from_coefficients(grid, grid.rfft(prod) * mask)


def _phase(grid: Grid, coords: np.ndarray) -> np.ndarray:
    """exp(i xi_k (x - x_0)) for each coordinate and full-fft wavenumber."""
    k = sfft.fftfreq(grid.n, 1.0 / grid.n) * grid.fundamental
    return np.exp(1j * np.outer(coords - grid.axis[0], k))


def _full_spectrum(f: SpectralField, axes) -> np.ndarray:
    return sfft.fftn(f.samples, axes=axes)


def evaluate_at(f: SpectralField, points) -> np.ndarray:
    """Trigonometric interpolant of f at arbitrary points of shape (P, dim)."""
    grid = f.grid
    points = np.atleast_2d(np.asarray(points, dtype=float))
    spec = _full_spectrum(f, tuple(range(grid.dim))) / np.prod(grid.shape)
    out = np.empty(len(points))
    for start in range(0, len(points), _EVAL_BATCH):
        chunk = points[start:start + _EVAL_BATCH]
        phases = [_phase(grid, chunk[:, a]) for a in range(grid.dim)]
        if grid.dim == 3:
            val = np.einsum("pa,pb,pc,abc->p", *phases, spec, optimize="greedy")
        else:
            val = np.einsum("pa,pb,ab->p", *phases, spec, optimize="greedy")
        out[start:start + len(chunk)] = val.real
    return out


def evaluate_columns(f: SpectralField, xy) -> np.ndarray:
    """Interpolate f at in-plane points (P, 2) for every grid z; returns (P, n)."""
    grid = f.grid
    _require_3d(grid, "evaluate_columns")
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    spec = _full_spectrum(f, (0, 1)) / grid.n ** 2
    out = np.empty((len(xy), grid.n))
    for start in range(0, len(xy), _EVAL_BATCH):
        chunk = xy[start:start + _EVAL_BATCH]
        e1, e2 = _phase(grid, chunk[:, 0]), _phase(grid, chunk[:, 1])
        out[start:start + len(chunk)] = np.einsum("pa,pb,abz->pz", e1, e2, spec, optimize="greedy").real
    return out


def interpolate_axis0(f: SpectralField, coords) -> np.ndarray:
    """Resample f along axis 0 at the given x1 coordinates (other axes stay on the grid)."""
    grid = f.grid
    spec = sfft.fft(f.samples, axis=0) / grid.n
    phase = _phase(grid, np.asarray(coords, dtype=float))
    return np.tensordot(phase, spec, axes=(1, 0)).real


def _lp_norm(values: np.ndarray, p: float, cell: float) -> float:
    from .norms import lebesgue_samples

    return lebesgue_samples(values, p, cell)


def bernstein_ratio(f: SpectralField, q: int, k: int, a: float, b: float, pu: PartitionOfUnity | None = None) -> tuple[float, float]:
    """Return (sup_alpha ||d^alpha D_q f||_a / (2^{qk} ||D_q f||_a),
    sup_alpha ||d^alpha D_q f||_b / (2^{q(k + d(1/a - 1/b))} ||D_q f||_a))."""
    pu = pu or build_partition()
    grid = f.grid
    if not 0 <= q <= grid.q_max:
        raise BlockRangeError(f"Bernstein ratios need 0 <= q <= {grid.q_max}, got {q}")
    if k < 0 or not (1 <= a <= b):
        raise ValueError(f"need k >= 0 and 1 <= a <= b, got k={k}, a={a}, b={b}")
    block = delta_q(f, q, pu)
    cell = grid.cell_measure
    base = _lp_norm(block.samples, a, cell)
    if base == 0:
        raise DegenerateBlockError(f"block {q} of the field is identically zero")
    best_a = best_b = 0.0
    for alpha in combinations_with_replacement(range(grid.dim), k):
        coef = block.coefficients
        for ax in alpha:
            coef = coef * (1j * grid.derivative_wavevector[ax])
        vals = grid.irfft(coef)
        best_a = max(best_a, _lp_norm(vals, a, cell))
        best_b = max(best_b, _lp_norm(vals, b, cell))
    inv = lambda p: 0.0 if p == INF else 1.0 / p
    shift = k + grid.dim * (inv(a) - inv(b))
    return best_a / (2.0 ** (q * k) * base), best_b / (2.0 ** (q * shift) * base)


def kernel_l1_norm(pu: PartitionOfUnity, q: int, grid: Grid) -> float:
    """L^1 norm of the convolution kernel of block q.

    On the grid this is also the sup-to-sup operator norm of the block.
    """
    kernel = grid.irfft(block_multiplier(grid, q, pu).astype(complex))
    return float(np.sum(np.abs(kernel)))


def partition_violations(pu: PartitionOfUnity, grid: Grid) -> dict[str, float]:
    """Worst-case deviations of the partition identities on the grid's wavenumbers."""
    rho = np.unique(np.round(grid.frequency_magnitude.ravel(), 12))
    top = max(grid.q_max + 4, math.ceil(math.log2(max(rho[-1], 1.0) / pu.inner_radius)))
    layers = {q: pu.phi(rho * 2.0 ** -q) for q in range(0, top + 1)}
    chi = pu.chi(rho)
    inhomogeneous = chi + sum(layers.values())
    lo = low_truncation(grid, pu)
    positive = rho > 0
    homog = sum(pu.phi(rho[positive] * 2.0 ** -q) for q in range(-lo, top + 1))
    overlap = max(
        float(np.max(np.abs(layers[p] * layers[q])))
        for p in layers for q in layers if abs(p - q) >= 2
    )
    chi_overlap = max(float(np.max(np.abs(chi * layers[q]))) for q in layers if q >= 1)
    return {
        "inhomogeneous_sum": float(np.max(np.abs(inhomogeneous - 1.0))),
        "homogeneous_sum": float(np.max(np.abs(homog - 1.0))) if positive.any() else 0.0,
        "nonadjacent_overlap": overlap,
        "low_overlap": chi_overlap,
    }


def partition_table(pu: PartitionOfUnity, samples: int = 512) -> pd.DataFrame:
    rho = np.linspace(0.0, 2.5 * pu.outer_radius, samples)
    return pd.DataFrame({"rho": rho, "chi": pu.chi(rho), "phi": pu.phi(rho)})


def export_partition_csv(pu: PartitionOfUnity, path, samples: int = 512) -> str:
    partition_table(pu, samples).to_csv(path, index=False, float_format="%.17g")
    return str(path)
