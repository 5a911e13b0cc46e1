"""Scenario files: JSON validated by pydantic, one schema version at a time."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from .errors import PlabError, UnknownExperimentError
from .models import Grid, Integrator, PartitionOfUnity, SolverConfig

SCHEMA_VERSION = 1


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = 32
    box_length: float = 2.0 * math.pi
    dim: int = 3

    def build(self, n: int | None = None) -> Grid:
        return Grid(n or self.n, self.box_length, self.dim)


class ProfileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["ring_vortex", "dipole", "random_rings"] = "ring_vortex"
    params: dict[str, float] = Field(default_factory=dict)


class PartitionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inner_radius: float = 0.75
    transition_width: float = 7.0 / 9.0

    def build(self) -> PartitionOfUnity:
        from .services.spectral_core import build_partition
        return build_partition(self.inner_radius, self.transition_width)


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: Optional[float] = None
    t_end: float = 1.0
    dealias: bool = True
    integrator: Literal["rk4"] = "rk4"
    cfl_max: float = 0.5
    snapshot_every: int = 1
    besov_p: float = 2.0

    def build(self, **overrides) -> SolverConfig:
        fields = self.model_dump()
        fields["integrator"] = Integrator(fields["integrator"])
        fields.update(overrides)
        try:
            return SolverConfig(**fields)
        except ValueError as exc:
            raise PlabError(f"invalid solver settings: {exc}") from exc


class ScenarioSpec(BaseModel):
    """A reproducible study: one grid, one initial flow, a list of experiment keys."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str
    seed: int = 0
    grid: GridSpec = Field(default_factory=GridSpec)
    profile: ProfileSpec = Field(default_factory=ProfileSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    partition: PartitionSpec = Field(default_factory=PartitionSpec)
    experiments: list[str] = Field(default_factory=list)
    output_dir: str
    corpus_size: int = Field(10, ge=1)
    sample_count: int = Field(50, ge=1)
    report_times: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    refine_n: Optional[int] = None

    @field_validator("experiments")
    @classmethod
    def _registered(cls, keys: list[str], info: ValidationInfo) -> list[str]:
        registry = (info.context or {}).get("registry")
        if registry is not None:
            unknown = [k for k in keys if k not in registry]
            if unknown:
                raise UnknownExperimentError(
                    f"unknown experiment key {unknown[0]!r}; registered: {', '.join(sorted(registry))}"
                )
        return keys


def load_scenario(path, registry=None) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PlabError(f"cannot read scenario {path}: {exc}") from exc
    context = {"registry": set(registry)} if registry is not None else None
    try:
        return ScenarioSpec.model_validate_json(text, context=context)
    except ValidationError as exc:
        raise PlabError(f"invalid scenario {path}:\n{exc}") from None


def dump_scenario(spec: ScenarioSpec, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(spec.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path


def default_scenarios() -> dict[str, ScenarioSpec]:
    """Shipped scenarios, from a quick smoke run to the desk-scale acceptance studies."""
    harmonic = ["partition_audit", "bernstein_sweep", "bony_audit", "lorentz_suite"]
    geometry = ["embedding_sweep", "biot_savart_bound"]
    evolution = [
        "conservation_run",
        "model_v_suite",
        "vorticity_growth",
        "decomposition_suite",
        "norm_growth",
        "transport_audit",
    ]
    return {
        "smoke": ScenarioSpec(
            name="smoke",
            grid=GridSpec(n=64),
            solver=SolverSpec(t_end=0.1),
            experiments=harmonic + ["dilation_audit", "embedding_sweep", "geometry_audit", "biot_savart_bound"] + evolution,
            output_dir="smoke",
            corpus_size=3,
            sample_count=5,
            report_times=[0.05, 0.1],
        ),
        "harmonic": ScenarioSpec(name="harmonic", grid=GridSpec(n=64), experiments=harmonic, output_dir="harmonic"),
        "dilation": ScenarioSpec(name="dilation", grid=GridSpec(n=128), experiments=["dilation_audit"], output_dir="dilation"),
        "geometry": ScenarioSpec(
            name="geometry", grid=GridSpec(n=64), experiments=geometry, output_dir="geometry", refine_n=128,
        ),
        # the 1e-8 structure checks need the ring resolved to round-off, hence n = 128
        "structure": ScenarioSpec(
            name="structure", grid=GridSpec(n=128), experiments=["geometry_audit"], output_dir="structure",
        ),
        "evolution": ScenarioSpec(
            name="evolution",
            grid=GridSpec(n=128),
            solver=SolverSpec(t_end=1.0, snapshot_every=10),
            experiments=evolution,
            output_dir="evolution",
            refine_n=256,
        ),
    }


def write_default_scenarios(directory, force: bool = False) -> list[Path]:
    """Write every default scenario that is not there yet; returns the files written."""
    directory = Path(directory)
    written = []
    for name, spec in default_scenarios().items():
        path = directory / f"{name}.json"
        if path.exists() and not force:
            continue
        written.append(dump_scenario(spec, path))
    return written
