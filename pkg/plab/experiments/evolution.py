"""Time-dependent studies driven by one Euler run of the scenario's flow."""
from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
import pandas as pd

from ..lab import ExperimentGroup, RunContext
from ..models import INF, BesovParams, ExperimentReport, SpectralField
from ..profiles import random_band_limited, random_solenoidal
from ..services import axisym, dynamics, norms
from ..services import spectral_core as sc
from ..utils.fitting import linear_fit

logger = logging.getLogger(__name__)

group = ExperimentGroup("evolution")

DRIFT_TOLERANCE = 0.01
MODEL_TOLERANCE = 1e-6
LINEARITY_TOLERANCE = 1e-10
CLOSURE_TOLERANCE = 1e-6
TRIDIAGONAL_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-10
REFINEMENT_FACTOR = 2.0
CONSERVED = ("alpha_L2", "alpha_Linf", "alpha_L31")
TRANSPORT_PARAMS = (BesovParams(-1.0, INF, INF), BesovParams(0.5, INF, INF), BesovParams(1.0, INF, 1.0))


def _drift(series: np.ndarray) -> float:
    base = series[0]
    if base == 0:
        return float(np.max(np.abs(series)))
    return float(np.max(np.abs(series - base)) / abs(base))


def _drifts(run: dynamics.EulerRun) -> dict[str, float]:
    return {name: _drift(run.diagnostics.channel(name)) for name in (*CONSERVED, "energy")}


def _stable(a: float, b: float) -> bool:
    if a == 0 or b == 0:
        return a == b
    return 1.0 / REFINEMENT_FACTOR <= a / b <= REFINEMENT_FACTOR


@group.experiment(
    "conservation_run",
    criteria=(
        "alpha_L31_nonincreasing",
        "alpha_conservation",
        "energy_conservation",
        "zero_data_fixed_point",
        "refinement_improves",
    ),
)
def conservation_run(ctx: RunContext) -> ExperimentReport:
    """Drift of the conserved norms of alpha and of the energy over the run."""
    run = ctx.euler_run()
    drifts = _drifts(run)
    flags = {
        "alpha_L31_nonincreasing": run.flags["alpha_L31_nonincreasing"],
        "alpha_conservation": all(drifts[c] <= DRIFT_TOLERANCE for c in CONSERVED),
        "energy_conservation": drifts["energy"] <= DRIFT_TOLERANCE,
    }

    dt = ctx.cfg.cfl_max * ctx.grid.spacing
    still = dynamics.evolve_alpha(
        SpectralField.zeros(ctx.grid), dataclasses.replace(ctx.cfg, dt=dt, t_end=3 * dt), ctx.pu,
    )
    flags["zero_data_fixed_point"] = still.final.alpha.max_abs() == 0.0

    constants = {f"drift_{k}": v for k, v in drifts.items()}
    details = {"dt": run.dt, "steps": len(run.times) - 1}
    if ctx.spec.refine_n:
        fine = _drifts(ctx.euler_run(ctx.spec.refine_n))
        constants.update({f"drift_{k}_refined": v for k, v in fine.items()})
        flags["refinement_improves"] = all(fine[k] < drifts[k] for k in drifts)
        details["refine_n"] = ctx.spec.refine_n
    return ExperimentReport(
        key="conservation_run",
        fitted_constants=constants,
        pass_flags=flags,
        artifact_paths=[str(ctx.path("diagnostics.csv"))],
        details=details,
    )


def _final(iterator):
    last = None
    for _, w in iterator:
        last = w
    return last


def _max_over(iterator, measure) -> tuple[float, object]:
    worst, last = 0.0, None
    for _, w in iterator:
        worst = max(worst, measure(w))
        last = w
    return worst, last


@group.experiment(
    "model_v_suite",
    criteria=("divergence_preserved", "angular_preserved", "stretching_identity", "linearity", "zero_flow_identity"),
)
def model_v_suite(ctx: RunContext) -> ExperimentReport:
    """The linear vorticity model driven by the run's velocity: preserved structure, linearity, u = 0."""
    run = ctx.euler_run()
    history = run.history
    grid, cfg = ctx.grid, ctx.cfg
    rng = ctx.rng("model_v_suite")

    solenoidal = random_solenoidal(grid, rng, k_max=grid.n / 8)
    angular = sc.curl(axisym.realize(ctx.corpus()[0], grid))

    div_leak, w_sol = _max_over(
        dynamics.iterate_vorticity_model(history, solenoidal, cfg, run.dt), sc.divergence_violation,
    )
    ang_leak, w_ang = _max_over(
        dynamics.iterate_vorticity_model(history, angular, cfg, run.dt), dynamics.non_angular_leak,
    )
    stretch = dynamics.stretching_identity_residual(angular, history.at(history.times[0]))

    a, b = 0.7, -1.3
    mixed = _final(dynamics.iterate_vorticity_model(history, solenoidal.scale(a) + angular.scale(b), cfg, run.dt))
    expected = w_sol.scale(a) + w_ang.scale(b)
    linear = (mixed - expected).max_abs() / max(expected.max_abs(), np.finfo(float).tiny)

    zero = dynamics.VelocityHistory.constant(history.at_index(0).scale(0.0), cfg.t_end, steps=4)
    frozen = _final(dynamics.iterate_vorticity_model(zero, solenoidal, cfg))
    identity = (frozen - solenoidal).max_abs()

    return ExperimentReport(
        key="model_v_suite",
        fitted_constants={
            "max_divergence": div_leak,
            "max_non_angular": ang_leak,
            "stretching_residual": stretch,
            "linearity_gap": linear,
            "zero_flow_gap": identity,
        },
        pass_flags={
            "divergence_preserved": div_leak <= MODEL_TOLERANCE,
            "angular_preserved": ang_leak <= MODEL_TOLERANCE,
            "stretching_identity": stretch <= MODEL_TOLERANCE,
            "linearity": linear <= LINEARITY_TOLERANCE,
            "zero_flow_identity": identity <= IDENTITY_TOLERANCE * solenoidal.max_abs(),
        },
    )


@group.experiment("vorticity_growth", criteria=("ur_over_r_bounded", "omega_growth_bounded"))
def vorticity_growth(ctx: RunContext) -> ExperimentReport:
    """u_r/r against the initial ||alpha||_{L^{3,1}} and the exponential growth rate of sup |omega|."""
    run = ctx.euler_run()
    diag = run.diagnostics
    t = np.asarray(diag.times)
    l31 = diag.channel("alpha_L31")[0]
    ur = diag.channel("ur_over_r_inf")
    omega = diag.channel("omega_inf")
    c_ur = float(np.max(ur) / l31) if l31 > 0 else 0.0
    positive = (t > 0) & (omega > 0)
    if l31 > 0 and positive.any() and omega[0] > 0:
        rates = np.log(omega[positive] / omega[0]) / (t[positive] * l31)
        c_growth = max(0.0, float(np.max(rates)))
    else:
        c_growth = 0.0
    slope, _, resid = linear_fit(t, np.log(np.maximum(omega, np.finfo(float).tiny)))
    return ExperimentReport(
        key="vorticity_growth",
        fitted_constants={
            "C_ur_over_r": c_ur,
            "C_omega_growth": c_growth,
            "log_omega_slope": slope,
            "log_omega_fit_residual": resid,
            "u_inf_max": float(np.max(diag.channel("u_inf"))),
        },
        pass_flags={
            "ur_over_r_bounded": math.isfinite(c_ur),
            "omega_growth_bounded": math.isfinite(c_growth),
        },
        artifact_paths=[str(ctx.path("diagnostics.csv"))],
    )


def _direct_closure(ctx: RunContext, run: dynamics.EulerRun, family: dynamics.FamilyRun) -> float:
    """Relative gap between the family sum and one solve of the same model from omega0."""
    wanted = {snap.t: snap for snap in family.snapshots}
    omega0 = axisym.omega_from_alpha(run.alphas[0])
    worst = 0.0
    for t, w in dynamics.iterate_vorticity_model(run.history, omega0, ctx.cfg, run.dt):
        match = next((s for ts, s in wanted.items() if abs(ts - t) <= 1e-12 * max(1.0, abs(t))), None)
        if match is None:
            continue
        total = match.total()
        scale = w.max_abs()
        gap = (total - w).max_abs()
        worst = max(worst, gap / scale if scale > 0 else gap)
    return worst


@group.experiment(
    "decomposition_suite",
    criteria=("family_closure", "initial_tridiagonal", "decay_envelope_finite", "growth_single_constant"),
)
def decomposition_suite(ctx: RunContext) -> ExperimentReport:
    """One linear solve per block of omega0; closure, block-interaction decay and growth."""
    run = ctx.euler_run()
    family = ctx.family_run()
    pu = ctx.pu
    omega0 = axisym.omega_from_alpha(run.alphas[0])
    sup0 = omega0.max_abs()

    closure = _direct_closure(ctx, run, family)
    t0 = min(family.matrices)
    off = [v for (j, q), v in family.matrices[t0].items() if abs(j - q) >= 2]
    tridiagonal = max(off, default=0.0) / sup0 if sup0 > 0 else 0.0

    decay = dynamics.block_decay_report(family)
    l31 = run.diagnostics.channel("alpha_L31")[0]
    growth = dynamics.growth_constant(family, l31)
    lemma = {
        q: norms.ur_quotient_lemma_ratio(omega0, q, pu)
        for q in range(0, ctx.grid.q_max + 1)
        if q not in decay.excluded
    }

    offsets = decay.offsets_frame()
    offsets["C_fit_U"] = decay.slope * offsets["U"]
    paths = [
        ctx.write_csv("block_decay.csv", decay.entries),
        ctx.write_csv("block_offsets.csv", offsets),
        ctx.write_csv("family_sup.csv", family.sup_frame()),
    ]
    quotient = pd.DataFrame(
        [{"t": t, "q": q, "value": v} for t, row in family.quotient_channel.items() for q, v in row.items()],
        columns=["t", "q", "value"],
    )
    paths.append(ctx.write_csv("family_quotient.csv", quotient))
    return ExperimentReport(
        key="decomposition_suite",
        fitted_constants={
            "closure_residual": closure,
            "alpha_reconstruction_residual": max(family.residuals),
            "initial_off_tridiagonal": tridiagonal,
            "b0": decay.offsets[t0],
            "envelope_slope": decay.slope,
            "envelope_fit_residual": decay.fit_residual,
            "C_growth": growth,
            "lemma_ratio_max": max(lemma.values(), default=0.0),
        },
        pass_flags={
            "family_closure": closure <= CLOSURE_TOLERANCE,
            "initial_tridiagonal": tridiagonal <= TRIDIAGONAL_TOLERANCE,
            "decay_envelope_finite": all(math.isfinite(b) for b in decay.offsets.values()),
            "growth_single_constant": math.isfinite(growth),
        },
        artifact_paths=paths,
        details={
            "offsets": {f"{t:.6g}": b for t, b in decay.offsets.items()},
            "excluded_blocks": decay.excluded,
            "skipped_blocks": family.skipped,
        },
    )


def _growth(run: dynamics.EulerRun, channel: str) -> float:
    series = run.diagnostics.channel(channel)
    return float(np.max(series) / series[0]) if series[0] > 0 else 0.0


@group.experiment("norm_growth", criteria=("norms_finite", "refinement_stable"))
def norm_growth(ctx: RunContext) -> ExperimentReport:
    """Growth of ||omega||_{B^0_{inf,1}} and ||u||_{B^{1+3/p}_{p,1}}; finiteness and refinement only."""
    run = ctx.euler_run()
    channels = ("omega_Binf1", "u_Bp1", "u_B1inf1")
    growth = {c: _growth(run, c) for c in channels}
    flags = {"norms_finite": all(np.all(np.isfinite(run.diagnostics.channel(c))) for c in channels)}
    constants = {f"growth_{c}": v for c, v in growth.items()}
    if ctx.spec.refine_n:
        fine = ctx.euler_run(ctx.spec.refine_n)
        fine_growth = {c: _growth(fine, c) for c in channels}
        constants.update({f"growth_{c}_refined": v for c, v in fine_growth.items()})
        flags["refinement_stable"] = all(_stable(growth[c], fine_growth[c]) for c in channels)
    return ExperimentReport(
        key="norm_growth",
        fitted_constants=constants,
        pass_flags=flags,
        artifact_paths=[str(ctx.path("diagnostics.csv"))],
    )


def _bp_label(bp: BesovParams) -> str:
    fmt = lambda x: "inf" if x == INF else f"{x:g}"
    return f"{fmt(bp.s)},{fmt(bp.p)},{fmt(bp.r)}"


@group.experiment("transport_audit", criteria=("zero_flow_identity", "constants_finite", "dt_refinement_stable"))
def transport_audit(ctx: RunContext) -> ExperimentReport:
    """Gronwall constants of the Besov transport estimate, at dt and dt/2, plus the u = 0 identity."""
    run = ctx.euler_run()
    history = run.history
    grid, cfg, pu = ctx.grid, ctx.cfg, ctx.pu
    f0 = random_band_limited(grid, ctx.rng("transport_audit"), k_max=grid.n / 8, zero_mean=True)

    frames, constants, stable = [], {}, []
    for bp in TRANSPORT_PARAMS:
        label = _bp_label(bp)
        coarse = dynamics.transport_estimate_audit(history, f0, bp, cfg, pu, dt=run.dt)
        fine = dynamics.transport_estimate_audit(history, f0, bp, cfg, pu, dt=run.dt / 2)
        constants[f"C_{label}"] = coarse.constant
        constants[f"C_{label}_half_dt"] = fine.constant
        stable.append(_stable(coarse.constant, fine.constant))
        frame = coarse.frame().rename(columns={coarse.variable: "exponent"})
        frame.insert(0, "params", label)
        frame["variable"] = coarse.variable
        frames.append(frame)

    zero = dynamics.VelocityHistory.constant(history.at_index(0).scale(0.0), cfg.t_end, steps=4)
    still = dynamics.transport_estimate_audit(zero, f0, TRANSPORT_PARAMS[1], cfg, pu)
    constants["C_zero_flow"] = still.constant

    path = ctx.write_csv("transport_audit.csv", pd.concat(frames, ignore_index=True))
    finite = [v for k, v in constants.items() if k != "C_zero_flow"]
    return ExperimentReport(
        key="transport_audit",
        fitted_constants=constants,
        pass_flags={
            "zero_flow_identity": abs(still.constant - 1.0) <= IDENTITY_TOLERANCE,
            "constants_finite": all(math.isfinite(v) for v in finite),
            "dt_refinement_stable": all(stable),
        },
        artifact_paths=[path],
    )
