"""Lebesgue, Lorentz and Besov norms on sampled fields, plus embedding diagnostics."""
from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import AxisymmetryError, DilationError, NormParameterError
from ..models import (
    INF,
    BesovParams,
    Grid,
    LorentzParams,
    PartitionOfUnity,
    Rearrangement,
    SpectralField,
    VectorField,
)
from . import axisym
from . import spectral_core as sc

logger = logging.getLogger(__name__)

_WEIGHT_EXPONENT_CEILING = 1000.0


def parse_exponent(value) -> float:
    """Accept 1.5, '2', 'inf' or '∞' and return a float with math.inf for infinity."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "infinity", "∞"):
            return INF
        value = float(v)
    value = float(value)
    if math.isnan(value):
        raise NormParameterError("exponent is NaN")
    return value


def magnitude(f: SpectralField | VectorField) -> np.ndarray:
    if isinstance(f, VectorField):
        return f.magnitude()
    return np.abs(f.samples)


def lebesgue_samples(values: np.ndarray, p: float, cell: float) -> float:
    if not (p >= 1 or p == INF):
        raise NormParameterError(f"L^p needs p >= 1, got {p}")
    vals = np.abs(np.asarray(values, dtype=float))
    top = float(np.max(vals)) if vals.size else 0.0
    if p == INF or top == 0.0:
        return top
    # scaled by the max so large p does not overflow
    return top * float(np.sum((vals / top) ** p) * cell) ** (1.0 / p)


def lebesgue_norm(f: SpectralField | VectorField, p: float) -> float:
    grid = f.grid
    return lebesgue_samples(magnitude(f), parse_exponent(p), grid.cell_measure)


def rearrange(f: SpectralField | VectorField) -> Rearrangement:
    vals = np.sort(magnitude(f).ravel())[::-1]
    cell = f.grid.cell_measure
    measures = cell * np.arange(1, vals.size + 1, dtype=float)
    return Rearrangement(thresholds=vals, measures=measures)


def lorentz_from_rearrangement(r: Rearrangement, lp: LorentzParams) -> float:
    f, mu = r.thresholds, r.measures
    top = float(f[0]) if f.size else 0.0
    if top == 0.0:
        return 0.0
    if lp.q == INF:
        if lp.p == INF:
            return top
        return float(np.max(f * mu ** (1.0 / lp.p)))
    e = lp.q / lp.p
    prev = np.concatenate(([0.0], mu[:-1]))
    increments = mu ** e - prev ** e
    integral = (lp.p / lp.q) * np.sum((f / top) ** lp.q * increments)
    return top * float(integral) ** (1.0 / lp.q)


def lorentz_norm(f: SpectralField | VectorField, lp: LorentzParams) -> float:
    """Closed-form integral of (t^{1/p} f*(t))^q dt/t over the rearrangement's steps."""
    return lorentz_from_rearrangement(rearrange(f), lp)


def block_norms(f: SpectralField | VectorField, p: float, pu: PartitionOfUnity | None = None) -> dict[int, float]:
    """L^p norm of every inhomogeneous block, q = -1 .. q_max."""
    pu = pu or sc.build_partition()
    cell = f.grid.cell_measure
    if isinstance(f, VectorField):
        blocks = sc.decompose_vector(f, pu)
        return {q: lebesgue_samples(b.magnitude(), p, cell) for q, b in blocks.items()}
    dec = sc.decompose(f, pu)
    return {q: lebesgue_samples(b.samples, p, cell) for q, b in dec.blocks.items()}


def besov_from_blocks(norms: dict[int, float], bp: BesovParams) -> float:
    weighted = np.array([2.0 ** (q * bp.s) * v for q, v in norms.items()])
    if bp.r == INF:
        return float(np.max(weighted))
    top = float(np.max(weighted))
    if top == 0.0:
        return 0.0
    return top * float(np.sum((weighted / top) ** bp.r)) ** (1.0 / bp.r)


def besov_norm(f: SpectralField | VectorField, bp: BesovParams, pu: PartitionOfUnity | None = None) -> float:
    grid = f.grid
    if abs(bp.s) * grid.q_max > _WEIGHT_EXPONENT_CEILING:
        logger.warning("Besov weight 2^(q*s) out of range for s=%g, q_max=%d", bp.s, grid.q_max)
    return besov_from_blocks(block_norms(f, bp.p, pu), bp)


def embedding_ratio(u: VectorField, p: float, pu: PartitionOfUnity | None = None,
                    tol: float = axisym.STRUCTURE_GUARD) -> float:
    """||omega/r||_{L^{3,1}} / ||u||_{B^{1+3/p}_{p,1}} for an axisymmetric swirl-free u."""
    p = parse_exponent(p)
    if not 1 <= p < 3:
        raise NormParameterError(f"embedding ratio needs 1 <= p < 3, got {p}")
    if u.max_abs() == 0:
        return 0.0
    report = axisym.check_axisymmetry(u, blocks=False, curl=False)
    if report.relative("angular") > tol:
        raise AxisymmetryError(
            f"angular component {report.relative('angular'):.3e} x sup exceeds {tol:g}"
        )
    alpha = axisym.quotient_by_r(sc.curl(u), "theta", tol=tol)
    denom = besov_norm(u, BesovParams(1.0 + 3.0 / p, p, 1.0), pu)
    return lorentz_norm(alpha, LorentzParams(3.0, 1.0)) / denom


def anisotropic_dilate(f: SpectralField, lam: float) -> SpectralField:
    """f_lambda(x1, x2, x3) = f(lambda x1, x2, x3) about the box centre."""
    grid = f.grid
    if not 0 < lam <= 1:
        raise DilationError(f"dilation factor must lie in (0, 1], got {lam}")
    if lam < 2.0 / grid.n:
        raise DilationError(f"lambda={lam} below the resolvable limit 2/n = {2.0 / grid.n}")
    return SpectralField.from_samples(grid, sc.interpolate_axis0(f, lam * grid.axis))


def dilation_ratio(f: SpectralField, lam: float, pu: PartitionOfUnity | None = None) -> float:
    bp = BesovParams(0.0, INF, 1.0)
    base = besov_norm(f, bp, pu)
    if base == 0:
        return 0.0
    return besov_norm(anisotropic_dilate(f, lam), bp, pu) / ((1.0 - math.log(lam)) * base)


def lorentz_nesting_constant(f: SpectralField | VectorField, p: float, q: float, q_wide: float) -> float:
    """||f||_{L^{p,q_wide}} / ||f||_{L^{p,q}} for q <= q_wide."""
    if not q <= q_wide:
        raise NormParameterError(f"nesting needs q <= q_wide, got {q} > {q_wide}")
    r = rearrange(f)
    narrow = lorentz_from_rearrangement(r, LorentzParams(p, q))
    if narrow == 0:
        return 0.0
    return lorentz_from_rearrangement(r, LorentzParams(p, q_wide)) / narrow


def besov_embedding_ratio(f, s: float, p1: float, r1: float, p2: float, r2: float,
                          pu: PartitionOfUnity | None = None) -> float:
    """||f||_{B^{s - d(1/p1 - 1/p2)}_{p2,r2}} / ||f||_{B^s_{p1,r1}}, p1 <= p2, r1 <= r2."""
    if not (p1 <= p2 and r1 <= r2):
        raise NormParameterError("Besov embedding needs p1 <= p2 and r1 <= r2")
    inv = lambda p: 0.0 if p == INF else 1.0 / p
    d = f.grid.dim
    base = besov_norm(f, BesovParams(s, p1, r1), pu)
    if base == 0:
        return 0.0
    return besov_norm(f, BesovParams(s - d * (inv(p1) - inv(p2)), p2, r2), pu) / base


def _parseval_weights(grid: Grid) -> np.ndarray:
    k_last = grid.index_wavenumbers[-1]
    w = np.where((k_last == 0) | (k_last == grid.n // 2), 1.0, 2.0)
    return np.broadcast_to(w, grid.spectral_shape)


def sobolev_norm(f: SpectralField, s: float) -> float:
    grid = f.grid
    weight = (1.0 + grid.frequency_magnitude ** 2) ** s
    total = np.sum(_parseval_weights(grid) * weight * np.abs(f.coefficients) ** 2)
    return math.sqrt(float(total) * grid.cell_measure / np.prod(grid.shape))


def sobolev_identity_ratio(f: SpectralField, s: float, pu: PartitionOfUnity | None = None) -> float:
    """||f||_{B^s_{2,2}} / ||f||_{H^s}; bounded above and below for the same space."""
    h = sobolev_norm(f, s)
    if h == 0:
        return 0.0
    return besov_norm(f, BesovParams(s, 2.0, 2.0), pu) / h


def ur_quotient_lemma_ratio(omega0: VectorField, q: int, pu: PartitionOfUnity | None = None) -> float:
    """||Delta_q omega0^1 / x2||_{B^0_{inf,1}} / (2^q ||Delta_q omega0||_inf)."""
    pu = pu or sc.build_partition()
    grid = omega0.grid
    block = VectorField(tuple(sc.delta_q(c, q, pu) for c in omega0))
    base = block.max_abs()
    if base == 0:
        return 0.0
    x2 = grid.mesh[1]
    quotient = SpectralField.from_samples(grid, block[0].samples / x2)
    return besov_norm(quotient, BesovParams(0.0, INF, 1.0), pu) / (2.0 ** q * base)
