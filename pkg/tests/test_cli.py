import json

import numpy as np
import pandas as pd
from click.testing import CliRunner

from plab.cli import main
from plab.models import SpectralField
from plab.profiles import random_band_limited
from plab.utils.snapshots import write_field


def test_list_shows_every_experiment():
    result = CliRunner().invoke(main, ["list"])
    assert result.exit_code == 0
    assert "partition_audit [harmonic]" in result.output
    assert "criteria: " in result.output


def test_init_writes_scenarios(tmp_path):
    result = CliRunner().invoke(main, ["init", str(tmp_path)])
    assert result.exit_code == 0
    assert sorted(p.name for p in tmp_path.glob("*.json")) == [
        "dilation.json", "evolution.json", "geometry.json", "harmonic.json", "smoke.json", "structure.json",
    ]


def test_run_empty_scenario(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"name": "empty", "output_dir": str(tmp_path / "out")}))
    result = CliRunner().invoke(main, ["run", str(path)])
    assert result.exit_code == 0
    assert "no experiments" in result.output
    assert (tmp_path / "out" / "config.json").exists()


def test_run_reports_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "output_dir": "x", "experiments": ["warp_drive"]}))
    result = CliRunner().invoke(main, ["run", str(path)])
    assert result.exit_code == 1
    assert "warp_drive" in result.output


def test_norms_prints_csv(grid16, rng, tmp_path):
    path = write_field(tmp_path / "f.field", random_band_limited(grid16, rng))
    result = CliRunner().invoke(main, ["norms", str(path), "--lp", "2", "--lorentz", "3,1", "--besov", "0,inf,1"])
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "field_id,norm_name,params,value"
    assert [line.split(",")[1] for line in lines[1:]] == ["lebesgue", "lorentz", "besov"]


def test_norms_rejects_malformed_params(grid16, rng, tmp_path):
    path = write_field(tmp_path / "f.field", random_band_limited(grid16, rng))
    result = CliRunner().invoke(main, ["norms", str(path), "--besov", "0,2"])
    assert result.exit_code == 2


def test_decompose_writes_blocks(grid16, rng, tmp_path):
    path = write_field(tmp_path / "f.field", random_band_limited(grid16, rng))
    out = tmp_path / "blocks"
    result = CliRunner().invoke(main, ["decompose", str(path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out / "blocks.csv")
    assert list(frame["q"]) == [-1, 0, 1, 2]
    assert (out / "block_-1.field").exists()


def test_decompose_homogeneous_needs_zero_mean(grid16, tmp_path):
    path = write_field(tmp_path / "c.field", SpectralField.from_samples(grid16, np.ones(grid16.shape)))
    result = CliRunner().invoke(main, ["decompose", str(path), "--out", str(tmp_path / "o"), "--homogeneous"])
    assert result.exit_code == 1
