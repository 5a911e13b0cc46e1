"""Pseudo-spectral axisymmetric Euler solver, the linear vorticity model and the tilde family.

The Euler state is alpha = omega_theta / r, advected by u. Velocity is
rebuilt from alpha at every RK4 stage. The linear model
    d_t W + u . grad W = W . grad u
is driven by a stored velocity history, linearly interpolated in time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.special import lambertw

from ..errors import AdmissibilityError, CFLViolation, HistoryMismatchError
from ..models import (
    INF,
    AxisymProfile,
    BesovParams,
    DiagnosticsSeries,
    EulerState,
    Grid,
    LorentzParams,
    PartitionOfUnity,
    SolverConfig,
    SpectralField,
    TildeFamily,
    VectorField,
)
from ..utils.fitting import linear_fit
from . import axisym, norms
from . import spectral_core as sc

logger = logging.getLogger(__name__)

DEGENERATE_BLOCK = 1e-14
MATRIX_FLOOR = -60.0


# -- products -----------------------------------------------------------------

def _product(a: SpectralField, b: SpectralField, dealias: bool) -> SpectralField:
    if dealias:
        return sc.dealiased_product(a, b)
    return SpectralField.from_samples(a.grid, a.samples * b.samples)


def advection(u: VectorField, f: SpectralField, dealias: bool = True) -> SpectralField:
    acc = None
    for j, uj in enumerate(u):
        term = _product(uj, sc.partial(f, j), dealias)
        acc = term if acc is None else acc + term
    return acc


def stretching_term(w: VectorField, u: VectorField, dealias: bool = True) -> VectorField:
    comps = []
    for ui in u:
        acc = None
        for j, wj in enumerate(w):
            term = _product(wj, sc.partial(ui, j), dealias)
            acc = term if acc is None else acc + term
        comps.append(acc)
    return VectorField(tuple(comps))


def gradient_sup(u: VectorField) -> float:
    sq = sum(sc.partial(ui, j).samples ** 2 for ui in u for j in range(u.grid.dim))
    return float(np.sqrt(np.max(sq)))


# -- velocity history ---------------------------------------------------------

class VelocityHistory:
    """Velocity snapshots on increasing times, linearly interpolated in between."""

    def __init__(self, grid: Grid, times, loader: Callable[[int], VectorField], cache_size: int = 4):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise HistoryMismatchError("velocity history needs at least one time")
        if np.any(np.diff(self.times) <= 0):
            raise HistoryMismatchError("velocity history times must increase")
        self._loader = loader
        self._cache: dict[int, VectorField] = {}
        self._cache_size = cache_size

    @classmethod
    def from_fields(cls, times, fields: list[VectorField]) -> "VelocityHistory":
        if len(times) != len(fields):
            raise HistoryMismatchError(f"{len(times)} times for {len(fields)} snapshots")
        grid = fields[0].grid
        for f in fields:
            if f.grid != grid:
                raise HistoryMismatchError("snapshots live on different grids")
        return cls(grid, times, lambda i: fields[i], cache_size=0)

    @classmethod
    def constant(cls, u: VectorField, t_end: float, steps: int) -> "VelocityHistory":
        times = np.linspace(0.0, t_end, steps + 1)
        return cls(u.grid, times, lambda i: u, cache_size=0)

    def __len__(self):
        return self.times.size

    @property
    def dt(self) -> float:
        if self.times.size < 2:
            return 0.0
        steps = np.diff(self.times)
        if np.max(steps) - np.min(steps) > 1e-9 * np.max(steps):
            raise HistoryMismatchError("velocity history is not uniformly spaced")
        return float(steps[0])

    def at_index(self, i: int) -> VectorField:
        if i in self._cache:
            return self._cache[i]
        u = self._loader(i)
        if self._cache_size:
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[i] = u
        return u

    def at(self, t: float) -> VectorField:
        ts = self.times
        span = max(ts[-1] - ts[0], 1.0)
        if t < ts[0] - 1e-12 * span or t > ts[-1] + 1e-12 * span:
            raise HistoryMismatchError(f"t={t} outside the history [{ts[0]}, {ts[-1]}]")
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 1))
        if i == ts.size - 1:
            return self.at_index(i)
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        if w <= 1e-12:
            return self.at_index(i)
        if w >= 1 - 1e-12:
            return self.at_index(i + 1)
        a, b = self.at_index(i), self.at_index(i + 1)
        return VectorField(tuple(ca * (1.0 - w) + cb * w for ca, cb in zip(a, b)), a.divergence_free and b.divergence_free)


# -- Euler solver -------------------------------------------------------------

def velocity_from_alpha(alpha: SpectralField) -> VectorField:
    return axisym.biot_savart(axisym.omega_from_alpha(alpha), validate=False)


def initial_alpha(profile: AxisymProfile, grid: Grid, tol: float = axisym.STRUCTURE_GUARD) -> SpectralField:
    u0 = axisym.realize(profile, grid)
    return axisym.quotient_by_r(sc.curl(u0), "theta", tol=tol)


def compute_diagnostics(alpha: SpectralField, u: VectorField, pu: PartitionOfUnity, besov_p: float = 2.0) -> dict[str, float]:
    omega = axisym.omega_from_alpha(alpha)
    return {
        "alpha_L1": norms.lebesgue_norm(alpha, 1),
        "alpha_L2": norms.lebesgue_norm(alpha, 2),
        "alpha_Linf": norms.lebesgue_norm(alpha, INF),
        "alpha_L31": norms.lorentz_norm(alpha, LorentzParams(3.0, 1.0)),
        "omega_inf": omega.max_abs(),
        "omega_Binf1": norms.besov_norm(omega, BesovParams(0.0, INF, 1.0), pu),
        "u_B1inf1": norms.besov_norm(u, BesovParams(1.0, INF, 1.0), pu),
        "u_Bp1": norms.besov_norm(u, BesovParams(1.0 + 3.0 / besov_p, besov_p, 1.0), pu),
        "u_inf": u.max_abs(),
        "grad_u_inf": gradient_sup(u),
        "ur_over_r_inf": axisym.quotient_by_r(u, "r", validate=False).max_abs(),
        "energy": norms.lebesgue_norm(u, 2),
    }


def _alpha_rhs(alpha: SpectralField, dealias: bool) -> SpectralField:
    # dealiased products mask both factors, so only D alpha drives the update
    return -advection(velocity_from_alpha(alpha), alpha, dealias)


def _rk4(y, rhs: Callable, dt: float):
    k1 = rhs(y, 0.0)
    k2 = rhs(_axpy(y, 0.5 * dt, k1), 0.5 * dt)
    k3 = rhs(_axpy(y, 0.5 * dt, k2), 0.5 * dt)
    k4 = rhs(_axpy(y, dt, k3), dt)
    incr = _axpy(_axpy(k1, 2.0, k2), 2.0, k3)
    return _axpy(y, dt / 6.0, _axpy(incr, 1.0, k4))


def _axpy(y, a: float, x):
    if isinstance(y, VectorField):
        return VectorField(tuple(yc + xc * a for yc, xc in zip(y, x)))
    return y + x * a


def cfl_number(u: VectorField, dt: float) -> float:
    return dt * u.max_abs() / u.grid.spacing


def auto_dt(u: VectorField, cfg: SolverConfig) -> float:
    """Half the CFL limit at the initial speed."""
    speed = u.max_abs()
    h = u.grid.spacing
    return 0.5 * cfg.cfl_max * h / speed if speed > 0 else cfg.cfl_max * h


def _schedule(t_end: float, dt: float) -> tuple[int, float]:
    if t_end == 0:
        return 0, dt
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    return steps, t_end / steps


def step_euler(state: EulerState, cfg: SolverConfig, dt: float | None = None,
               pu: PartitionOfUnity | None = None) -> EulerState:
    """Advance alpha by one RK4 step and append the new diagnostics row."""
    pu = pu or sc.build_partition()
    dt = dt or cfg.dt or auto_dt(state.u, cfg)
    cfl = cfl_number(state.u, dt)
    if cfl > cfg.cfl_max:
        raise CFLViolation(state.step + 1, cfl, cfg.cfl_max)
    alpha = _rk4(state.alpha, lambda a, _: _alpha_rhs(a, cfg.dealias), dt)
    u = velocity_from_alpha(alpha)
    t = state.t + dt
    state.diagnostics.append(t, compute_diagnostics(alpha, u, pu, cfg.besov_p))
    return EulerState(t=t, step=state.step + 1, alpha=alpha, u=u, diagnostics=state.diagnostics)


@dataclass
class EulerRun:
    grid: Grid
    config: SolverConfig
    dt: float
    alphas: list[SpectralField]
    states: list[EulerState]
    diagnostics: DiagnosticsSeries
    flags: dict[str, bool] = field(default_factory=dict)
    profile: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.diagnostics.times)

    @property
    def history(self) -> VelocityHistory:
        return VelocityHistory(self.grid, self.times, lambda i: velocity_from_alpha(self.alphas[i]))

    @property
    def final(self) -> EulerState:
        return self.states[-1]


def monotone_flags(diag: DiagnosticsSeries, tol: float = 0.01) -> dict[str, bool]:
    l31 = diag.channel("alpha_L31")
    ok = bool(np.all(l31 <= l31[0] * (1.0 + tol)) and np.all(np.diff(l31) <= tol * l31[0]))
    return {"alpha_L31_nonincreasing": ok}


def evolve_alpha(alpha0: SpectralField, cfg: SolverConfig, pu: PartitionOfUnity | None = None,
                 profile_params: dict | None = None, keep_history: bool = True) -> EulerRun:
    """Run the solver to cfg.t_end. With keep_history=False only the diagnostics and the end state survive."""
    pu = pu or sc.build_partition()
    grid = alpha0.grid
    u0 = velocity_from_alpha(alpha0)
    diag = DiagnosticsSeries()
    diag.append(0.0, compute_diagnostics(alpha0, u0, pu, cfg.besov_p))
    state = EulerState(t=0.0, step=0, alpha=alpha0, u=u0, diagnostics=diag)
    steps, dt = _schedule(cfg.t_end, cfg.dt or auto_dt(u0, cfg))
    run = EulerRun(grid, cfg, dt, [alpha0], [state], diag, profile=profile_params or {})
    logger.info("evolving n=%d steps=%d dt=%.4g", grid.n, steps, dt)
    for _ in range(steps):
        try:
            state = step_euler(state, cfg, dt, pu)
        except CFLViolation as exc:
            exc.trajectory = run
            logger.error("%s", exc)
            raise
        if keep_history:
            run.alphas.append(state.alpha)
        if state.step == steps or (keep_history and state.step % cfg.snapshot_every == 0):
            run.states.append(state)
    run.flags = monotone_flags(diag)
    return run


def evolve(initial: AxisymProfile, cfg: SolverConfig, grid: Grid, pu: PartitionOfUnity | None = None,
           keep_history: bool = True) -> EulerRun:
    alpha0 = initial_alpha(initial, grid)
    return evolve_alpha(alpha0, cfg, pu, {"name": initial.name, **initial.params}, keep_history)


# -- linear models driven by a history ---------------------------------------

def _horizon(history: VelocityHistory, cfg: SolverConfig, dt: float | None) -> tuple[int, float]:
    span = min(cfg.t_end, history.times[-1]) - history.times[0]
    dt = dt or cfg.dt or history.dt
    if span <= 0 or dt <= 0:
        return 0, dt
    return _schedule(span, dt)


def iterate_vorticity_model(history: VelocityHistory, omega0: VectorField, cfg: SolverConfig,
                            dt: float | None = None) -> Iterator[tuple[float, VectorField]]:
    """Yield (t, W) for the initial state and after every RK4 step."""
    if omega0.grid != history.grid:
        raise HistoryMismatchError(f"vorticity grid {omega0.grid} != history grid {history.grid}")
    steps, dt = _horizon(history, cfg, dt)
    t0 = float(history.times[0])

    def rhs(w: VectorField, t: float) -> VectorField:
        u = history.at(t)
        stretch = stretching_term(w, u, cfg.dealias)
        return VectorField(tuple(
            s - advection(u, wi, cfg.dealias) for s, wi in zip(stretch, w)
        ))

    w = omega0
    yield t0, w
    for i in range(steps):
        t = t0 + i * dt
        w = _rk4(w, lambda y, off: rhs(y, t + off), dt)
        yield t0 + (i + 1) * dt, w


def evolve_vorticity_model(history: VelocityHistory, omega0: VectorField, cfg: SolverConfig,
                           dt: float | None = None) -> list[VectorField]:
    return [w for _, w in iterate_vorticity_model(history, omega0, cfg, dt)]


def iterate_scalar_transport(history: VelocityHistory, f0: SpectralField, cfg: SolverConfig,
                             dt: float | None = None) -> Iterator[tuple[float, SpectralField]]:
    if f0.grid != history.grid:
        raise HistoryMismatchError(f"field grid {f0.grid} != history grid {history.grid}")
    steps, dt = _horizon(history, cfg, dt)
    t0 = float(history.times[0])
    f = f0
    yield t0, f
    for i in range(steps):
        t = t0 + i * dt
        f = _rk4(f, lambda y, off: -advection(history.at(t + off), y, cfg.dealias), dt)
        yield t0 + (i + 1) * dt, f


def evolve_scalar_transport(history: VelocityHistory, f0: SpectralField, cfg: SolverConfig,
                            dt: float | None = None) -> list[SpectralField]:
    return [f for _, f in iterate_scalar_transport(history, f0, cfg, dt)]


def non_angular_leak(w: VectorField) -> float:
    """(sup |W . e_r| + sup |W^z|) / sup |W|."""
    sup = w.max_abs()
    if sup == 0:
        return 0.0
    return (float(np.max(np.abs(axisym.radial_component(w)))) + w[2].max_abs()) / sup


def stretching_identity_residual(w: VectorField, u: VectorField) -> float:
    """sup |W . grad u - (u_r / r) W| / sup |W . grad u| for angular W."""
    lhs = stretching_term(w, u)
    ratio = axisym.quotient_by_r(u, "r", validate=False).samples
    gap = max(float(np.max(np.abs(l.samples - ratio * wi.samples))) for l, wi in zip(lhs, w))
    scale = lhs.max_abs()
    return gap / scale if scale > 0 else gap


# -- tilde family -------------------------------------------------------------

def interaction_matrix(blocks: dict[int, VectorField], pu: PartitionOfUnity) -> dict[tuple[int, int], float]:
    """sup |Delta_j W_q| for every block j of every family member q."""
    out = {}
    for q, w in blocks.items():
        for j, b in sc.decompose_vector(w, pu).items():
            out[(j, q)] = b.max_abs()
    return out


def _x2_quotient_norm(w: VectorField, pu: PartitionOfUnity) -> float:
    x2 = w.grid.mesh[1]
    f = SpectralField.from_samples(w.grid, w[0].samples / x2)
    return norms.besov_norm(f, BesovParams(0.0, INF, 1.0), pu)


@dataclass
class FamilyRun:
    times: list[float]
    initial_norms: dict[int, float]
    skipped: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    block_sup: dict[int, list[float]] = field(default_factory=dict)
    matrices: dict[float, dict[tuple[int, int], float]] = field(default_factory=dict)
    snapshots: list[TildeFamily] = field(default_factory=list)
    quotient_channel: dict[float, dict[int, float]] = field(default_factory=dict)
    u_integral: dict[float, float] = field(default_factory=dict)

    def sup_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({f"q{q}": v for q, v in self.block_sup.items()})
        df.insert(0, "t", self.times)
        df.insert(1, "residual", self.residuals)
        return df


def time_integral(times, values) -> np.ndarray:
    """Cumulative trapezoid integral starting from 0."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return np.zeros(times.size)
    return cumulative_trapezoid(np.asarray(values, dtype=float), times, initial=0.0)


def _report_indices(times: np.ndarray, report_times) -> list[int]:
    idx = {0, times.size - 1}
    for t in report_times or ():
        if t <= times[-1] + 1e-12:
            idx.add(int(np.argmin(np.abs(times - t))))
    return sorted(idx)


def evolve_tilde_family(run: EulerRun, pu: PartitionOfUnity | None = None, cfg: SolverConfig | None = None,
                        report_times=(0.25, 0.5, 1.0)) -> FamilyRun:
    """Solve the linear model once per block of omega0, all driven by the run's velocity."""
    pu = pu or sc.build_partition()
    cfg = cfg or run.config
    grid = run.grid
    omega0 = axisym.omega_from_alpha(run.alphas[0])
    sup0 = omega0.max_abs()
    blocks0 = sc.decompose_vector(omega0, pu)
    window = set(sc.block_range(grid))
    if set(blocks0) != window:
        raise HistoryMismatchError(f"block window {sorted(blocks0)} != grid window {sorted(window)}")
    active = {q: b for q, b in blocks0.items() if b.max_abs() >= DEGENERATE_BLOCK * sup0}
    family = FamilyRun(
        times=[],
        initial_norms={q: b.max_abs() for q, b in blocks0.items()},
        skipped=sorted(set(blocks0) - set(active)),
    )
    if family.skipped:
        logger.warning("skipping degenerate blocks %s", family.skipped)
    history = run.history
    gens = [iterate_vorticity_model(history, b, cfg, run.dt) for b in active.values()]
    times = run.times
    report = set(_report_indices(times, report_times))
    u_int = time_integral(times, run.diagnostics.channel("u_B1inf1"))
    for i, members in enumerate(zip(*gens)):
        t = members[0][0]
        fields = {q: w for q, (_, w) in zip(active, members)}
        total = TildeFamily(t, fields).total()
        omega = axisym.omega_from_alpha(run.alphas[i])
        scale = omega.max_abs()
        gap = (omega - total).max_abs()
        family.times.append(t)
        family.residuals.append(gap / scale if scale > 0 else gap)
        for q, w in fields.items():
            family.block_sup.setdefault(q, []).append(w.max_abs())
        if i in report:
            family.matrices[t] = interaction_matrix(fields, pu)
            family.snapshots.append(TildeFamily(t, fields, list(family.skipped)))
            family.quotient_channel[t] = {q: _x2_quotient_norm(w, pu) for q, w in fields.items()}
            family.u_integral[t] = float(u_int[i])
    logger.info("tilde family: %d members, max residual %.2e", len(active), max(family.residuals))
    return family


def frozen_family(omega0: VectorField, pu: PartitionOfUnity | None = None, times=(0.0,)) -> FamilyRun:
    """Family whose members never leave Delta_q omega0; a reference for the decay report."""
    pu = pu or sc.build_partition()
    blocks = sc.decompose_vector(omega0, pu)
    sup0 = omega0.max_abs()
    active = {q: b for q, b in blocks.items() if b.max_abs() >= DEGENERATE_BLOCK * sup0}
    family = FamilyRun(
        times=list(times),
        initial_norms={q: b.max_abs() for q, b in blocks.items()},
        skipped=sorted(set(blocks) - set(active)),
    )
    matrix = interaction_matrix(active, pu)
    for t in times:
        family.residuals.append(0.0)
        family.matrices[t] = dict(matrix)
        family.u_integral[t] = 0.0
        for q, w in active.items():
            family.block_sup.setdefault(q, []).append(w.max_abs())
    return family


@dataclass
class BlockDecayReport:
    entries: pd.DataFrame
    offsets: dict[float, float]
    u_integral: dict[float, float]
    slope: float
    intercept: float
    fit_residual: float
    excluded: list[int]

    def offsets_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": list(self.offsets),
            "b": list(self.offsets.values()),
            "U": [self.u_integral.get(t, 0.0) for t in self.offsets],
        })


def block_decay_report(family: FamilyRun, floor: float = MATRIX_FLOOR) -> BlockDecayReport:
    """log2 of sup |Delta_j W_q(t)| / sup |Delta_q omega0| and the envelope offset b(t)."""
    rows, offsets = [], {}
    excluded = sorted(set(family.skipped) | {q for q, v in family.initial_norms.items() if v == 0})
    for t, matrix in family.matrices.items():
        best = -math.inf
        for (j, q), value in matrix.items():
            if q in excluded:
                continue
            base = family.initial_norms[q]
            m = math.log2(value / base) if value > 0 else floor
            m = max(m, floor)
            rows.append({"t": t, "j": j, "q": q, "m": m})
            if m > floor:
                best = max(best, m + abs(j - q))
        offsets[t] = best
    ts = sorted(offsets)
    us = [family.u_integral.get(t, 0.0) for t in ts]
    bs = [offsets[t] for t in ts]
    slope, intercept, resid = linear_fit(us, bs)
    return BlockDecayReport(
        entries=pd.DataFrame(rows, columns=["t", "j", "q", "m"]),
        offsets={t: offsets[t] for t in ts},
        u_integral=dict(zip(ts, us)),
        slope=slope,
        intercept=intercept,
        fit_residual=resid,
        excluded=excluded,
    )


def growth_constant(family: FamilyRun, alpha_l31: float) -> float:
    """Smallest C with sup W_q(t) <= sup Delta_q omega0 * exp(C t ||alpha0||_{L^{3,1}}) for all q, t."""
    best = 0.0
    for q, sups in family.block_sup.items():
        base = family.initial_norms[q]
        for t, s in zip(family.times, sups):
            if t > 0 and alpha_l31 > 0 and s > base:
                best = max(best, math.log(s / base) / (t * alpha_l31))
    return best


# -- transport estimate -------------------------------------------------------

@dataclass
class TransportAudit:
    constant: float
    variable: str
    times: list[float]
    ratios: list[float]
    exponents: list[float]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "ratio": self.ratios, self.variable: self.exponents})


def exponent_variable(bp: BesovParams) -> str:
    """'U1' for -1 < s < 1; 'U' for the limiting pairs (-1, inf) and (1, 1)."""
    if -1.0 < bp.s < 1.0:
        return "U1"
    if (bp.s == -1.0 and bp.r == INF) or (bp.s == 1.0 and bp.r == 1.0):
        return "U"
    raise AdmissibilityError(
        f"transport estimate needs -1 < s < 1, or (s, r) in {{(-1, inf), (1, 1)}}; got s={bp.s}, r={bp.r}"
    )


def gronwall_constant(ratio: float, exponent: float) -> float:
    """Smallest C with ratio <= C exp(C * exponent)."""
    if exponent <= 0:
        return ratio
    return float(lambertw(ratio * exponent).real) / exponent


def transport_estimate_audit(history: VelocityHistory, f0: SpectralField, bp: BesovParams, cfg: SolverConfig,
                             pu: PartitionOfUnity | None = None, dt: float | None = None) -> TransportAudit:
    pu = pu or sc.build_partition()
    variable = exponent_variable(bp)
    base = norms.besov_norm(f0, bp, pu)
    times, ratios, integrands = [], [], []
    for t, f in iterate_scalar_transport(history, f0, cfg, dt):
        u = history.at(t)
        times.append(t)
        ratios.append(norms.besov_norm(f, bp, pu) / base if base > 0 else 1.0)
        if variable == "U":
            integrands.append(norms.besov_norm(u, BesovParams(1.0, INF, 1.0), pu))
        else:
            integrands.append(gradient_sup(u))
    exponents = list(time_integral(times, integrands))
    constant = max(gronwall_constant(r, e) for r, e in zip(ratios, exponents))
    logger.info("transport audit s=%g p=%g r=%g: C=%.4g (%s)", bp.s, bp.p, bp.r, constant, variable)
    return TransportAudit(constant, variable, times, ratios, exponents)
