import json
from dataclasses import replace

import numpy as np
import pytest

from csbflock import experiments
from csbflock.cli import run_cli
from csbflock.config import format_config
from csbflock.output import check_manifest, read_outputs, write_outputs


@pytest.fixture(scope="module")
def short_run():
    cfg = replace(experiments.build_scenario("fig3-regular", 42).config(), t_end=2.0, sample_every=0.1)
    return experiments.run_config(cfg)


def test_outputs_round_trip(short_run, tmp_path):
    manifest = write_outputs(short_run.record, short_run.summary(), tmp_path)
    assert set(manifest) == {"config.ini", "trajectory.csv", "diagnostics.csv", "summary.json"}
    assert check_manifest(tmp_path) == []
    record, summary = read_outputs(tmp_path)
    np.testing.assert_array_equal(record.x, short_run.record.x)
    np.testing.assert_array_equal(record.v, short_run.record.v)
    for name, series in short_run.record.diag.items():
        np.testing.assert_array_equal(record.diag[name], series)
    assert record.config == short_run.record.config
    # verdicts are a pure function of the saved series
    _, verdicts = experiments.evaluate(record)
    assert [v.as_dict() for v in verdicts] == [v.as_dict() for v in short_run.verdicts]
    assert summary["criteria"] == json.loads(json.dumps(summary["criteria"]))


def test_manifest_detects_edits(short_run, tmp_path):
    write_outputs(short_run.record, short_run.summary(), tmp_path)
    path = tmp_path / "trajectory.csv"
    path.write_text(path.read_text().replace("0.1,", "0.10000001,", 1))
    assert check_manifest(tmp_path) == ["trajectory.csv"]


def _config_file(tmp_path):
    # plain run: only the common criteria apply
    cfg = replace(experiments.build_scenario("fig3-regular", 42).config(), t_end=1.0, sample_every=0.1, scenario=None)
    path = tmp_path / "run.ini"
    path.write_text(format_config(cfg))
    return path


def _only_dir(root):
    (out,) = list(root.iterdir())
    return out


def test_cli_simulate_and_verify(tmp_path, capsys):
    path = _config_file(tmp_path)
    root = tmp_path / "out"
    assert run_cli(["simulate", str(path), "--output-root", str(root)]) == 0
    out = _only_dir(root)
    assert out.name.startswith("simulate-seed42-")
    assert run_cli(["verify", str(out)]) == 0

    diag = out / "diagnostics.csv"
    lines = diag.read_text().splitlines()
    fields = lines[5].split(",")
    fields[3] = repr(float(fields[3]) + 1.0)
    lines[5] = ",".join(fields)
    diag.write_text("\n".join(lines) + "\n")
    assert run_cli(["verify", str(out)]) == 1
    assert "hash mismatch" in capsys.readouterr().out


def test_cli_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("CSBFLOCK_OUTPUT_ROOT", str(tmp_path / "env"))
    assert run_cli(["simulate", str(_config_file(tmp_path)), "--seed", "5"]) == 0
    assert _only_dir(tmp_path / "env").name.startswith("simulate-seed5-")


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nn = 3\ndim = 2\n[model]\nvariant = simplified\nkernel = singular\nalpha = 0.5\n")
    assert run_cli(["simulate", str(bad)]) == 3
    assert run_cli(["simulate", str(tmp_path / "missing.ini")]) == 3
    assert run_cli(["scenario", "no-such-scenario"]) == 3
    assert run_cli(["verify", str(tmp_path)]) == 3
    assert run_cli(["frobnicate"]) == 3


def test_cli_abort_exit_code(short_run, tmp_path):
    record = replace(short_run.record, events=[{"kind": "collision", "t": 1.0, "i": 0, "j": 1, "r": 0.0}])
    cfg = replace(record.config, scenario=None)
    record = replace(record, config=cfg)
    write_outputs(record, short_run.summary(), tmp_path)
    assert run_cli(["verify", str(tmp_path)]) == 2
