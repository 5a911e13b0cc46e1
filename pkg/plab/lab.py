"""Experiment registry and scenario runner.

Experiments are grouped the way request handlers are grouped in a web app:
each group module owns an ExperimentGroup, decorates its functions with
``@group.experiment(key, criteria=...)`` and the factory registers the group.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import scipy.fft as sfft

from .errors import CFLViolation, PlabError, UnknownExperimentError
from .models import ExperimentReport, SpectralField
from .profiles import build_profile, profile_corpus
from .schemas import ScenarioSpec, dump_scenario, load_scenario
from .services import axisym, dynamics
from .utils.snapshots import write_field

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class Experiment:
    key: str
    func: Callable[["RunContext"], ExperimentReport]
    criteria: tuple[str, ...]
    group: str
    description: str = ""


class ExperimentGroup:
    def __init__(self, name: str):
        self.name = name
        self.experiments: list[Experiment] = []

    def experiment(self, key: str, criteria=()):
        def register(func):
            doc = (func.__doc__ or "").strip().splitlines()
            self.experiments.append(Experiment(key, func, tuple(criteria), self.name, doc[0] if doc else ""))
            return func
        return register


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


class RunContext:
    """Shared state for the experiments of one scenario run.

    The Euler run and the tilde family are computed once and reused by every
    experiment that needs them; the first solve persists snapshots and the
    diagnostics table into the run directory.
    """

    def __init__(self, spec: ScenarioSpec, run_dir: Path):
        self.spec = spec
        self.run_dir = Path(run_dir)
        self.grid = spec.grid.build()
        self.pu = spec.partition.build()
        self.cfg = spec.solver.build()
        self._runs: dict[int, dynamics.EulerRun] = {}
        self._family: dynamics.FamilyRun | None = None

    @property
    def seed(self) -> int:
        return self.spec.seed

    def rng(self, key: str) -> np.random.Generator:
        """Generator seeded by the scenario seed and the experiment key, independent of run order."""
        return np.random.default_rng([self.spec.seed, zlib.crc32(key.encode())])

    def profile(self):
        return build_profile(self.spec.profile.kind, self.spec.profile.params)

    def corpus(self, key: str | None = None):
        """Random ring corpus; with a key its parameters are recorded as corpus_<key>.json."""
        profiles = profile_corpus(self.spec.corpus_size, self.spec.seed)
        if key:
            self.write_json(f"corpus_{key}.json", [{"name": p.name, **p.params} for p in profiles])
        return profiles

    def path(self, *parts) -> Path:
        return self.run_dir.joinpath(*parts)

    def write_csv(self, name: str, frame: pd.DataFrame) -> str:
        return str(write_csv(self.path(name), frame))

    def write_json(self, name: str, payload) -> str:
        return str(write_json(self.path(name), payload))

    def euler_run(self, n: int | None = None) -> dynamics.EulerRun:
        n = n or self.grid.n
        if n in self._runs:
            return self._runs[n]
        grid = self.spec.grid.build(n)
        primary = n == self.grid.n
        try:
            run = dynamics.evolve(self.profile(), self.cfg, grid, self.pu, keep_history=primary)
        except CFLViolation as exc:
            if primary and exc.trajectory is not None:
                self._persist_run(exc.trajectory)
            raise
        if primary:
            self._persist_run(run)
        self._runs[n] = run
        return run

    def _persist_run(self, run: dynamics.EulerRun):
        for state in run.states:
            write_field(self.path("snapshots", f"t_{state.step:05d}.field"), state.alpha)
        write_csv(self.path("diagnostics.csv"), run.diagnostics.to_frame())
        logger.info("persisted %d snapshots to %s", len(run.states), self.run_dir)

    def family_run(self) -> dynamics.FamilyRun:
        if self._family is None:
            run = self.euler_run()
            self._family = dynamics.evolve_tilde_family(run, self.pu, report_times=self.spec.report_times)
            times = run.times
            for snap in self._family.snapshots:
                index = int(np.argmin(np.abs(times - snap.t)))
                for q, w in snap.blocks.items():
                    theta = axisym.angular_component(w)
                    write_field(
                        self.path("family", str(q), f"t_{index:05d}.field"),
                        SpectralField.from_samples(w.grid, theta),
                    )
        return self._family


class Lab:
    def __init__(self, config: dict | None = None):
        self.config = {"THREADS": 1, "OUTPUT_DIR": "runs", "SCENARIO_DIR": "scenarios", **(config or {})}
        self.experiments: dict[str, Experiment] = {}

    def register_group(self, group: ExperimentGroup):
        for exp in group.experiments:
            if exp.key in self.experiments:
                raise PlabError(f"experiment key {exp.key!r} registered twice")
            self.experiments[exp.key] = exp

    def load(self, path) -> ScenarioSpec:
        return load_scenario(path, self.experiments)

    def output_path(self, spec: ScenarioSpec) -> Path:
        out = Path(spec.output_dir)
        return out if out.is_absolute() else Path(self.config["OUTPUT_DIR"]) / out

    def _prepare(self, spec: ScenarioSpec) -> Path:
        for key in spec.experiments:
            if key not in self.experiments:
                raise UnknownExperimentError(
                    f"unknown experiment key {key!r}; registered: {', '.join(sorted(self.experiments))}"
                )
        run_dir = self.output_path(spec)
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise PlabError(f"cannot create output directory {run_dir}: {exc}") from exc
        if not os.access(run_dir, os.W_OK):
            raise PlabError(f"output directory {run_dir} is not writable")
        return run_dir

    def run_scenario(self, scenario) -> list[ExperimentReport]:
        """Run every experiment of a scenario file (or spec) in order and persist the run directory."""
        spec = scenario if isinstance(scenario, ScenarioSpec) else self.load(scenario)
        run_dir = self._prepare(spec)
        dump_scenario(spec, run_dir / "config.json")
        ctx = RunContext(spec, run_dir)
        reports: list[ExperimentReport] = []
        logger.info("scenario %s: %d experiments -> %s", spec.name, len(spec.experiments), run_dir)
        with sfft.set_workers(int(self.config["THREADS"])):
            for key in spec.experiments:
                reports.append(self.run_experiment(key, ctx))
                self._write_reports(run_dir, reports)
        self._write_reports(run_dir, reports)
        return reports

    def run_experiment(self, key: str, ctx: RunContext) -> ExperimentReport:
        exp = self.experiments[key]
        started = time.perf_counter()
        logger.info("running %s", key)
        report = exp.func(ctx)
        stray = set(report.pass_flags) - set(exp.criteria)
        if stray:
            raise PlabError(f"experiment {key!r} reported unregistered criteria {sorted(stray)}")
        report.details.setdefault("seed", ctx.seed)
        for name, value in report.fitted_constants.items():
            if not math.isfinite(value):
                logger.warning("%s: fitted constant %s is %s", key, name, value)
        logger.info(
            "%s finished in %.1fs: %s", key, time.perf_counter() - started,
            ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in report.pass_flags.items()) or "no flags",
        )
        return report

    @staticmethod
    def _write_reports(run_dir: Path, reports: list[ExperimentReport]):
        write_json(run_dir / "reports.json", [dataclasses.asdict(r) for r in reports])
