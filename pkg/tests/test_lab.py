import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from plab import create_lab
from plab.errors import PlabError, UnknownExperimentError
from plab.evaluation.emit_plots import emit_plots
from plab.lab import ExperimentGroup, Lab, RunContext
from plab.models import DIAGNOSTIC_CHANNELS, ExperimentReport
from plab.schemas import GridSpec, ScenarioSpec, load_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def _spec(tmp_path, name, experiments=(), **kwargs):
    return ScenarioSpec(
        name=name,
        grid=GridSpec(n=16),
        experiments=list(experiments),
        output_dir=str(tmp_path / name),
        **kwargs,
    )


@pytest.fixture
def lab(tmp_path):
    lab = create_lab()
    lab.config["OUTPUT_DIR"] = str(tmp_path)
    return lab


def test_every_group_registers(lab):
    groups = {exp.group for exp in lab.experiments.values()}
    assert groups == {"harmonic", "geometry", "evolution"}
    assert len(lab.experiments) == 14
    assert all(exp.criteria for exp in lab.experiments.values())


def test_duplicate_keys_are_rejected():
    group = ExperimentGroup("twice")

    @group.experiment("same")
    def first(ctx):
        """First."""

    @group.experiment("same")
    def second(ctx):
        """Second."""

    with pytest.raises(PlabError):
        Lab().register_group(group)


def test_empty_scenario(lab, tmp_path):
    spec = _spec(tmp_path, "empty")
    assert lab.run_scenario(spec) == []
    run_dir = tmp_path / "empty"
    assert (run_dir / "config.json").exists()
    assert json.loads((run_dir / "reports.json").read_text()) == []


def test_unknown_key_is_rejected_before_running(lab, tmp_path):
    spec = _spec(tmp_path, "bad", ["partition_audit", "warp_drive"])
    with pytest.raises(UnknownExperimentError):
        lab.run_scenario(spec)
    assert not (tmp_path / "bad").exists()


def test_unregistered_criteria_fail_the_run(tmp_path):
    group = ExperimentGroup("rogue")

    @group.experiment("rogue", criteria=("declared",))
    def rogue(ctx):
        """Reports a flag it never declared."""
        return ExperimentReport(key="rogue", fitted_constants={}, pass_flags={"undeclared": True})

    lab = Lab({"OUTPUT_DIR": str(tmp_path)})
    lab.register_group(group)
    with pytest.raises(PlabError, match="unregistered"):
        lab.run_scenario(_spec(tmp_path, "rogue", ["rogue"]))


def test_partition_audit_is_deterministic(lab, tmp_path):
    first = lab.run_scenario(_spec(tmp_path, "a", ["partition_audit"], sample_count=3))
    lab.run_scenario(_spec(tmp_path, "b", ["partition_audit"], sample_count=3))
    assert first[0].passed
    assert first[0].details["seed"] == 0
    for name in ("audit_partition_audit.csv", "partition.csv"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_rng_depends_on_key_not_order(tmp_path):
    ctx = RunContext(_spec(tmp_path, "r"), tmp_path / "r")
    a = ctx.rng("alpha").standard_normal(4)
    b = ctx.rng("beta").standard_normal(4)
    np.testing.assert_array_equal(a, ctx.rng("alpha").standard_normal(4))
    assert not np.array_equal(a, b)


def test_emit_plots_writes_one_file_per_channel(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 0.1], "alpha_L1": [1.0, 1.0], "energy": [2.0, 1.9], "u_inf": [0.5, 0.6]})
    frame.to_csv(tmp_path / "diagnostics.csv", index=False)
    result = emit_plots(tmp_path)
    assert len(result.data_files) == 3
    assert (tmp_path / "plots" / "plot_series.py").exists()
    assert len(result.missing) == len(DIAGNOSTIC_CHANNELS) - 3
    energy = pd.read_csv(tmp_path / "plots" / "energy.dat")
    assert list(energy.columns) == ["t", "value"]


def test_emit_plots_on_empty_diagnostics(tmp_path):
    (tmp_path / "diagnostics.csv").write_text("")
    result = emit_plots(tmp_path)
    assert result.data_files == []
    assert (tmp_path / "plots" / "plot_series.py").exists()
    assert result.missing == list(DIAGNOSTIC_CHANNELS)


def test_emit_plots_needs_diagnostics(tmp_path):
    with pytest.raises(PlabError):
        emit_plots(tmp_path)


def test_structure_scenario_passes_geometry_audit(lab, tmp_path):
    spec = load_scenario(SCENARIO_DIR / "structure.json", registry=lab.experiments)
    spec = spec.model_copy(update={"corpus_size": 1, "output_dir": str(tmp_path / "structure")})
    [report] = lab.run_scenario(spec)
    assert report.key == "geometry_audit"
    assert report.pass_flags == {"axisymmetry": True, "block_axisymmetry": True, "biot_savart_round_trip": True}
    assert report.fitted_constants["max_block_periodic_leak"] < 1.0


def test_bony_audit_reports_every_criterion(lab, tmp_path):
    spec = _spec(tmp_path, "bony", ["bony_audit"], sample_count=2, refine_n=64)
    spec = spec.model_copy(update={"grid": GridSpec(n=32)})
    [report] = lab.run_scenario(spec)
    assert set(report.pass_flags) == set(lab.experiments["bony_audit"].criteria)
    for name in ("bony_identity", "commutator_gain_bounded", "remainder_divergence_form"):
        assert report.pass_flags[name], name
    assert report.details["refinement"] == [32, 64]


def test_partition_and_bernstein_report_new_criteria(lab, tmp_path):
    reports = lab.run_scenario(_spec(tmp_path, "pb", ["partition_audit", "bernstein_sweep"], sample_count=3,
                                     corpus_size=2))
    flags = {k: v for r in reports for k, v in r.pass_flags.items()}
    assert flags["homogeneous_reconstruction"]
    assert flags["sobolev_equivalence"]
    assert flags["besov_embedding"]
