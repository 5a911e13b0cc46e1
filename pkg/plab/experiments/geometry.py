"""Axisymmetric geometry: structure checks, Biot-Savart, the Lorentz embedding and the u_r/r bound."""
from __future__ import annotations

import logging
import math

import numpy as np
import pandas as pd

from ..lab import ExperimentGroup, RunContext
from ..models import ExperimentReport, LorentzParams, SpectralField, VectorField
from ..services import axisym, norms
from ..services import spectral_core as sc
from ..utils.fitting import fit_constant

logger = logging.getLogger(__name__)

group = ExperimentGroup("geometry")

STRUCTURE_TOLERANCE = 1e-8
ROUND_TRIP_TOLERANCE = 1e-9
REFINEMENT_FACTOR = 2.0
EMBEDDING_EXPONENTS = (1.5, 2.0)


def _refined(ctx: RunContext) -> int:
    return ctx.spec.refine_n or 2 * ctx.grid.n


def _stable(coarse: float, fine: float) -> bool:
    if coarse == 0 or fine == 0:
        return coarse == fine
    return 1.0 / REFINEMENT_FACTOR <= coarse / fine <= REFINEMENT_FACTOR


def _flows(ctx: RunContext, key: str):
    return [ctx.profile()] + ctx.corpus(key)


@group.experiment("embedding_sweep", criteria=("embedding_bounded", "refinement_stable"))
def embedding_sweep(ctx: RunContext) -> ExperimentReport:
    """||omega/r||_{L^{3,1}} / ||u||_{B^{1+3/p}_{p,1}} over the flow corpus."""
    grid, pu = ctx.grid, ctx.pu
    rows = []
    for i, profile in enumerate(_flows(ctx, "embedding_sweep")):
        u = axisym.realize(profile, grid)
        for p in EMBEDDING_EXPONENTS:
            rows.append({"corpus_id": i, "q": f"p={p:g}", "lhs": norms.embedding_ratio(u, p, pu), "rhs": 1.0})
    frame = pd.DataFrame(rows)
    frame["ratio"] = frame["lhs"]

    fine_grid = ctx.spec.grid.build(_refined(ctx))
    coarse = norms.embedding_ratio(axisym.realize(ctx.profile(), grid), 2.0, pu)
    fine = norms.embedding_ratio(axisym.realize(ctx.profile(), fine_grid), 2.0, pu)
    worst = float(frame["ratio"].max())
    path = ctx.write_csv("audit_embedding_sweep.csv", frame)
    return ExperimentReport(
        key="embedding_sweep",
        fitted_constants={"max_ratio": worst, "ratio_coarse": coarse, "ratio_fine": fine},
        pass_flags={
            "embedding_bounded": math.isfinite(worst),
            "refinement_stable": _stable(coarse, fine),
        },
        artifact_paths=[path],
        details={"refinement": [grid.n, fine_grid.n]},
    )


def _mean_free(u: VectorField) -> VectorField:
    return VectorField(tuple(SpectralField.from_samples(c.grid, c.samples - c.mean()) for c in u))


@group.experiment("geometry_audit", criteria=("axisymmetry", "block_axisymmetry", "biot_savart_round_trip"))
def geometry_audit(ctx: RunContext) -> ExperimentReport:
    """Swirl-free structure of realized flows, of their curl and of every block; Biot-Savart round trip."""
    grid, pu = ctx.grid, ctx.pu
    rows = []
    field_worst = block_worst = leak_worst = trip_worst = recovery_worst = 0.0
    for i, profile in enumerate(_flows(ctx, "geometry_audit")):
        u = axisym.realize(profile, grid)
        report = axisym.check_axisymmetry(u, pu)
        for name, value in report.violations.items():
            rel = report.relative(name)
            field_worst = max(field_worst, rel)
            rows.append({"corpus_id": i, "q": name, "lhs": value, "rhs": value / rel if rel else 0.0, "ratio": rel})
        for q, rel in report.blocks.items():
            block_worst = max(block_worst, rel)
            rows.append({"corpus_id": i, "q": q, "lhs": rel * report.v_sup, "rhs": report.v_sup, "ratio": rel})
        for q, rel in report.block_leaks.items():
            leak_worst = max(leak_worst, rel)
            rows.append({"corpus_id": f"{i}:periodic_leak", "q": q, "lhs": rel * report.v_sup,
                         "rhs": report.v_sup, "ratio": rel})
        omega = sc.curl(u)
        velocity = axisym.biot_savart(omega)
        gap = (sc.curl(velocity) - omega).max_abs()
        trip = gap / report.omega_sup if report.omega_sup else gap
        trip_worst = max(trip_worst, trip)
        rows.append({"corpus_id": i, "q": "round_trip", "lhs": gap, "rhs": report.omega_sup, "ratio": trip})
        miss = (velocity - _mean_free(u)).max_abs()
        recovery_worst = max(recovery_worst, miss / report.v_sup if report.v_sup else miss)
    path = ctx.write_csv("audit_geometry_audit.csv", pd.DataFrame(rows, columns=["corpus_id", "q", "lhs", "rhs", "ratio"]))
    return ExperimentReport(
        key="geometry_audit",
        fitted_constants={
            "max_field_violation": field_worst,
            "max_block_violation": block_worst,
            "max_block_periodic_leak": leak_worst,
            "max_round_trip": trip_worst,
            "max_velocity_recovery": recovery_worst,
        },
        pass_flags={
            "axisymmetry": field_worst <= STRUCTURE_TOLERANCE,
            "block_axisymmetry": block_worst <= STRUCTURE_TOLERANCE,
            "biot_savart_round_trip": trip_worst <= ROUND_TRIP_TOLERANCE,
        },
        artifact_paths=[path],
        details={"grid": grid.n},
    )


def _ur_bound_terms(u: VectorField) -> tuple[float, float]:
    ur_over_r = axisym.quotient_by_r(u, "r").max_abs()
    alpha = axisym.quotient_by_r(sc.curl(u), "theta")
    return ur_over_r, norms.lorentz_norm(alpha, LorentzParams(3.0, 1.0))


@group.experiment("biot_savart_bound", criteria=("ur_bound_bounded", "refinement_stable"))
def biot_savart_bound(ctx: RunContext) -> ExperimentReport:
    """||u_r/r||_inf against ||omega/r||_{L^{3,1}} over the corpus, at n and at the refined n."""
    grid = ctx.grid
    fine_grid = ctx.spec.grid.build(_refined(ctx))
    rows, ratios = [], {}
    for g in (grid, fine_grid):
        lhs, rhs = [], []
        for i, profile in enumerate(ctx.corpus("biot_savart_bound")):
            left, right = _ur_bound_terms(axisym.realize(profile, g))
            lhs.append(left)
            rhs.append(right)
            rows.append({"corpus_id": f"{i}:n={g.n}", "q": "all", "lhs": left, "rhs": right,
                         "ratio": left / right if right else 0.0})
        ratios[g.n] = fit_constant(lhs, rhs)
    coarse, fine = ratios[grid.n], ratios[fine_grid.n]
    per_flow = np.array([r["ratio"] for r in rows]).reshape(2, -1)
    stable = all(_stable(a, b) for a, b in zip(per_flow[0], per_flow[1]))
    path = ctx.write_csv("audit_biot_savart_bound.csv", pd.DataFrame(rows))
    return ExperimentReport(
        key="biot_savart_bound",
        fitted_constants={
            "C_coarse": coarse.max_ratio,
            "C_fine": fine.max_ratio,
            "log_fit_coarse": coarse.log_fit,
            "log_fit_fine": fine.log_fit,
        },
        pass_flags={
            "ur_bound_bounded": math.isfinite(coarse.max_ratio) and math.isfinite(fine.max_ratio),
            "refinement_stable": stable and _stable(coarse.max_ratio, fine.max_ratio),
        },
        artifact_paths=[path],
        details={"refinement": [grid.n, fine_grid.n], "fit_residual": fine.residual},
    )
