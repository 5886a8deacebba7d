from pathlib import Path
from unittest.mock import patch

import pytest
import yaml

from chronodelta import artifacts
from chronodelta.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main


@pytest.fixture
def small_config(tmp_path: Path) -> Path:
    """A configuration small enough to solve in a test."""
    config_data = {
        "coupling": {"kind": "constant", "value": -2.0},
        "initial_data": {"kind": "gaussian", "width": 1.0},
        "space": {"length": 20.0, "count": 2048},
        "time": {"start": 0.0, "end": 1.2, "count": 65},
        "snapshots": {"start": 0.0, "end": 0.25, "count": 3},
    }
    config_path = tmp_path / "run.yml"
    with open(config_path, "w") as f:
        yaml.dump(config_data, f)
    return config_path


def test_cli_solve_writes_artifacts(small_config: Path, tmp_path: Path, capsys):
    """Test the 'solve' command with --config and --out."""
    out_dir = tmp_path / "out"
    with patch("sys.argv", ["chronodelta", "solve", "--config", str(small_config), "--out", str(out_dir)]):
        code = main()

    assert code == EXIT_OK
    assert (out_dir / "q.csv").is_file()
    assert (out_dir / "telemetry.json").is_file()
    assert sorted(p.name for p in (out_dir / "snapshots").iterdir()) == [
        "snapshot_0.csv",
        "snapshot_1.csv",
        "snapshot_2.csv",
    ]
    diagnostics = artifacts.read_json(out_dir / "diagnostics.json")
    assert len(diagnostics["series"]) == 3
    assert "Wrote" in capsys.readouterr().out


def test_cli_seed_override_changes_hash(small_config: Path, tmp_path: Path):
    """Test that --seed reaches the config and therefore the stamped hash."""
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(small_config), "--out", str(first)]) == EXIT_OK
    assert main(["solve", "--config", str(small_config), "--out", str(second), "--seed", "5"]) == EXIT_OK
    hash_a = artifacts.read_json(first / "telemetry.json")["config_hash"]
    hash_b = artifacts.read_json(second / "telemetry.json")["config_hash"]
    assert hash_a != hash_b


def test_cli_unknown_key_writes_nothing(tmp_path: Path, capsys):
    """Test that a malformed key exits with the config code before any artifact."""
    config_path = tmp_path / "bad.yml"
    config_path.write_text(yaml.dump({"solver": {"tolerance": 1e-8}}))
    out_dir = tmp_path / "out"
    code = main(["solve", "--config", str(config_path), "--out", str(out_dir)])
    assert code == EXIT_CONFIG
    assert not out_dir.exists()
    assert "Configuration Error" in capsys.readouterr().out


def test_cli_missing_config(tmp_path: Path, capsys, monkeypatch):
    """Test that running without any config file shows the example config."""
    monkeypatch.chdir(tmp_path)
    code = main(["solve"])
    assert code == EXIT_CONFIG
    assert "not found" in capsys.readouterr().out


def test_cli_default_config_in_working_directory(small_config: Path, tmp_path: Path, monkeypatch):
    """Test that ./.chronodelta.yml is picked up when --config is absent."""
    monkeypatch.chdir(tmp_path)
    (tmp_path / ".chronodelta.yml").write_text(small_config.read_text())
    assert main(["solve", "--out", "here"]) == EXIT_OK
    assert (tmp_path / "here" / "q.csv").is_file()


def test_cli_missing_input_file(tmp_path: Path, capsys):
    """Test that a sampled coupling pointing at a missing file is a config error."""
    config_path = tmp_path / "sampled.yml"
    config_path.write_text(
        yaml.dump({"coupling": {"kind": "sampled", "path": str(tmp_path / "nope.csv")}})
    )
    code = main(["solve", "--config", str(config_path), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "Input file is missing" in capsys.readouterr().out


def test_cli_numerical_failure_writes_error(small_config: Path, tmp_path: Path):
    """Test that --strict turns a support warning into exit 3 with error.json."""
    data = yaml.safe_load(small_config.read_text())
    data["initial_data"]["width"] = 4.0
    small_config.write_text(yaml.dump(data))
    out_dir = tmp_path / "out"
    code = main(["solve", "--config", str(small_config), "--out", str(out_dir), "--strict"])
    assert code == EXIT_NUMERICAL
    error = artifacts.read_json(out_dir / "error.json")["error"]
    assert error["type"] == "SupportError"


def test_cli_typo_suggestion(capsys):
    """Test that a mistyped flag exits 2 with a suggestion."""
    code = main(["solve", "--confg", "x.yml"])
    assert code == EXIT_CONFIG
    out = capsys.readouterr().out
    assert "Did you mean" in out
    assert "--config" in out


def test_cli_requires_command(capsys):
    """Test that running without a subcommand exits 2."""
    assert main([]) == EXIT_CONFIG
