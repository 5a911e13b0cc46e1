"""Bony calculus on dealiased products.

Every product is taken as D(Da * Db) with D the 2/3-rule mask, so the
split T_u v + T_v u + R(u, v) telescopes to the dealiased product exactly
when both factors are band-limited to the block window.
"""
from __future__ import annotations

import logging

import numpy as np

from ..errors import BlockRangeError, ConsistencyError, DivergenceError, GridMismatchError, NormParameterError
from ..models import INF, BesovParams, BonySplit, PartitionOfUnity, SpectralField, VectorField
from . import norms
from . import spectral_core as sc

logger = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-8


def _check_grids(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"{f.grid} != {g}")


def _block_samples(f: SpectralField, pu: PartitionOfUnity) -> dict[int, np.ndarray]:
    """Samples of the blocks of D f, q = -1 .. q_max."""
    grid = f.grid
    coef = f.coefficients * grid.dealias_mask
    return {
        q: grid.irfft(coef * sc.block_multiplier(grid, q, pu))
        for q in sc.block_range(grid)
    }


def _low_sums(blocks: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """S_q = sum_{j <= q-1} of the given blocks, for q = -1 .. q_max."""
    out, acc = {}, None
    for q in sorted(blocks):
        out[q] = np.zeros_like(blocks[q]) if acc is None else acc.copy()
        acc = blocks[q] if acc is None else acc + blocks[q]
    return out


def _finish(grid, samples: np.ndarray) -> SpectralField:
    return SpectralField.from_coefficients(grid, grid.rfft(samples) * grid.dealias_mask)


def _paraproduct_samples(bu, su, bv) -> np.ndarray:
    acc = np.zeros_like(next(iter(bv.values())))
    for q, block in bv.items():
        low = su.get(q - 1)
        if low is not None:
            acc += low * block
    return acc


def _remainder_samples(bu, bv) -> np.ndarray:
    acc = np.zeros_like(next(iter(bv.values())))
    for q, block in bu.items():
        wide = sum(bv[j] for j in (q - 1, q, q + 1) if j in bv)
        acc += block * wide
    return acc


def paraproduct(a: SpectralField, b: SpectralField, pu: PartitionOfUnity | None = None) -> SpectralField:
    """T_a b = sum_q S_{q-1} a * Delta_q b."""
    pu = pu or sc.build_partition()
    _check_grids(a, b)
    ba = _block_samples(a, pu)
    return _finish(a.grid, _paraproduct_samples(ba, _low_sums(ba), _block_samples(b, pu)))


def remainder(a: SpectralField, b: SpectralField, pu: PartitionOfUnity | None = None) -> SpectralField:
    """R(a, b) = sum_q Delta_q a * (Delta_{q-1} + Delta_q + Delta_{q+1}) b."""
    pu = pu or sc.build_partition()
    _check_grids(a, b)
    return _finish(a.grid, _remainder_samples(_block_samples(a, pu), _block_samples(b, pu)))


def t_prime(a: SpectralField, b: SpectralField, pu: PartitionOfUnity | None = None) -> SpectralField:
    return paraproduct(a, b, pu) + remainder(a, b, pu)


def bony_split(u: SpectralField, v: SpectralField, pu: PartitionOfUnity | None = None) -> BonySplit:
    pu = pu or sc.build_partition()
    _check_grids(u, v)
    grid = u.grid
    bu, bv = _block_samples(u, pu), _block_samples(v, pu)
    para_uv = _finish(grid, _paraproduct_samples(bu, _low_sums(bu), bv))
    para_vu = _finish(grid, _paraproduct_samples(bv, _low_sums(bv), bu))
    rem = _finish(grid, _remainder_samples(bu, bv))
    product = sc.dealiased_product(u, v)
    total = para_uv + para_vu + rem
    scale = product.max_abs()
    diff = (total - product).max_abs()
    residual = diff / scale if scale > 0 else diff
    logger.debug("bony split n=%d residual=%.2e", grid.n, residual)
    return BonySplit(para_uv, para_vu, rem, residual)


def paraproduct_leakage(u: SpectralField, v: SpectralField, q: int, pu: PartitionOfUnity | None = None) -> float:
    """Fraction of the energy of S_{q-1}u * Delta_q v outside its localization annulus."""
    pu = pu or sc.build_partition()
    _check_grids(u, v)
    grid = u.grid
    if q not in sc.block_range(grid):
        raise BlockRangeError(f"block index {q} outside the window")
    if q <= 0:
        return 0.0
    low = grid.irfft(u.coefficients * grid.dealias_mask * sc.low_pass_multiplier(grid, q - 1, pu))
    block = grid.irfft(v.coefficients * grid.dealias_mask * sc.block_multiplier(grid, q, pu))
    spec = grid.rfft(low * block) * grid.dealias_mask
    energy = np.abs(spec) ** 2
    total = float(np.sum(energy))
    if total == 0:
        return 0.0
    a, b = pu.inner_radius, pu.outer_radius
    lo, hi = 2.0 ** q * (a - b / 2.0), 2.0 ** q * (2.0 * b + b / 2.0)
    rho = grid.frequency_magnitude
    outside = (rho < lo) | (rho > hi)
    return float(np.sum(energy[outside])) / total


def _require_divergence_free(u: VectorField):
    viol = sc.divergence_violation(u)
    if viol > DIVERGENCE_TOLERANCE:
        raise DivergenceError(
            f"flow must be divergence-free: sup|div u| / sup|u| = {viol:.3e} > {DIVERGENCE_TOLERANCE:g}"
        )


def advect(u: VectorField, f: SpectralField) -> SpectralField:
    """Dealiased u . grad f."""
    acc = None
    for j, uj in enumerate(u):
        term = sc.dealiased_product(uj, sc.partial(f, j))
        acc = term if acc is None else acc + term
    return acc


def commutator(q: int, u: VectorField, f: SpectralField, pu: PartitionOfUnity | None = None) -> SpectralField:
    """[Delta_q, u . grad] f evaluated directly."""
    pu = pu or sc.build_partition()
    _check_grids(u[0], f)
    _require_divergence_free(u)
    return sc.delta_q(advect(u, f), q, pu) - advect(u, sc.delta_q(f, q, pu))


def commutator_terms(q: int, u: VectorField, f: SpectralField, pu: PartitionOfUnity | None = None) -> dict[str, SpectralField | float]:
    """Four-term split of the commutator and its mismatch with the direct evaluation."""
    pu = pu or sc.build_partition()
    _check_grids(u[0], f)
    _require_divergence_free(u)
    zero = SpectralField.zeros(f.grid)
    r1 = r2 = r3 = r4 = zero
    for j, uj in enumerate(u):
        df = sc.partial(f, j)
        df_q = sc.delta_q(df, q, pu)
        r1 = r1 + sc.delta_q(remainder(uj, df, pu), q, pu)
        r2 = r2 + sc.delta_q(paraproduct(df, uj, pu), q, pu)
        r3 = r3 - t_prime(df_q, uj, pu)
        r4 = r4 + sc.delta_q(paraproduct(uj, df, pu), q, pu) - paraproduct(uj, df_q, pu)
    total = r1 + r2 + r3 + r4
    direct = commutator(q, u, f, pu)
    scale = max(direct.max_abs(), total.max_abs())
    mismatch = (total - direct).max_abs()
    return {
        "R1": r1,
        "R2": r2,
        "R3": r3,
        "R4": r4,
        "sum": total,
        "direct": direct,
        "mismatch": mismatch / scale if scale > 0 else mismatch,
    }


def commutator_gain_ratio(u: VectorField, f: SpectralField, p: float, pu: PartitionOfUnity | None = None) -> dict[int, float]:
    """2^{-q} ||[Delta_q, u.grad] f||_p / (||f||_{B^{-1}_{p,inf}} ||u||_{B^1_{inf,1}}) per q."""
    pu = pu or sc.build_partition()
    denom = norms.besov_norm(f, BesovParams(-1.0, p, INF), pu) * norms.besov_norm(u, BesovParams(1.0, INF, 1.0), pu)
    out = {}
    for q in sc.block_range(f.grid):
        c = commutator(q, u, f, pu)
        out[q] = 2.0 ** -q * norms.lebesgue_norm(c, p) / denom if denom > 0 else 0.0
    return out


def _gradient_sup(u: VectorField) -> float:
    sq = sum(sc.partial(ui, j).samples ** 2 for ui in u for j in range(u.grid.dim))
    return float(np.sqrt(np.max(sq)))


def stretching(omega: VectorField, u: VectorField) -> VectorField:
    """(omega . grad) u with dealiased products."""
    comps = []
    for ui in u:
        acc = None
        for j, wj in enumerate(omega):
            term = sc.dealiased_product(wj, sc.partial(ui, j))
            acc = term if acc is None else acc + term
        comps.append(acc)
    return VectorField(tuple(comps))


def stretching_norm_bound(omega: VectorField, u: VectorField, p: float, pu: PartitionOfUnity | None = None,
                          tol: float = 1e-8) -> tuple[float, float]:
    """(||omega.grad u||_{B^{3/p}_{p,1}}, ||omega||_{B^{3/p}_{p,1}} ||grad u||_inf)."""
    pu = pu or sc.build_partition()
    p = norms.parse_exponent(p)
    if not (p >= 1 or p == INF):
        raise NormParameterError(f"p must lie in [1, inf], got {p}")
    _check_grids(omega[0], u[0])
    w = sc.curl(u)
    scale = max(w.max_abs(), np.finfo(float).tiny)
    gap = (omega - w).max_abs()
    if gap > tol * scale:
        raise ConsistencyError(f"omega differs from curl u by {gap:.3e} (sup of curl u {scale:.3e})")
    if u.max_abs() == 0:
        return 0.0, 0.0
    s = 0.0 if p == INF else 3.0 / p
    bp = BesovParams(s, p, 1.0)
    lhs = norms.besov_norm(stretching(omega, u), bp, pu)
    rhs = norms.besov_norm(omega, bp, pu) * _gradient_sup(u)
    return lhs, rhs


def remainder_divergence_check(omega: VectorField, u: VectorField, pu: PartitionOfUnity | None = None) -> float:
    """Relative L^2 gap between sum_j R(omega^j, d_j u) and sum_j d_j R(omega^j, u)."""
    pu = pu or sc.build_partition()
    _check_grids(omega[0], u[0])
    num = den = 0.0
    for ui in u:
        lhs = rhs = None
        for j, wj in enumerate(omega):
            a = remainder(wj, sc.partial(ui, j), pu)
            b = sc.partial(remainder(wj, ui, pu), j)
            lhs = a if lhs is None else lhs + a
            rhs = b if rhs is None else rhs + b
        num += norms.lebesgue_norm(lhs - rhs, 2) ** 2
        den += norms.lebesgue_norm(lhs, 2) ** 2
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
