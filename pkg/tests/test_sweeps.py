import math
from pathlib import Path

import pytest

from chronodelta import artifacts
from chronodelta.config import Config, ConfigError
from chronodelta.sweeps import convergence_table, run_sweep

SMALL = {
    "space": {"length": 20.0, "count": 2048},
    "time": {"start": 0.0, "end": 1.2, "count": 65},
    "snapshots": {"start": 0.0, "end": 0.25, "count": 3},
}


def test_convergence_table_orders():
    """Test that halving errors show order 1 and the last row has no order."""
    rows = convergence_table([65, 129, 257], [4e-3, 2e-3, 1e-3])
    assert [n for n, _, _ in rows] == [65, 129, 257]
    assert rows[0][2] == pytest.approx(1.0)
    assert rows[1][2] == pytest.approx(1.0)
    assert math.isnan(rows[2][2])


def test_convergence_table_skips_zero_errors():
    """Test that an exact zero error leaves the order undefined."""
    rows = convergence_table([65, 129], [0.0, 1e-3])
    assert math.isnan(rows[0][2])


@pytest.mark.parametrize(
    "sweep, message",
    [
        ({"resolutions": []}, "empty"),
        ({"quantities": []}, "empty"),
        ({"resolutions": [65, 100], "quantities": ["charge"]}, "not nested"),
    ],
)
def test_run_sweep_rejects_bad_settings(tmp_path: Path, sweep, message):
    """Test that an unusable sweep section fails before any solve runs."""
    config = Config.from_dict({**SMALL, "sweep": sweep})
    with pytest.raises(ConfigError, match=message):
        run_sweep(config, tmp_path)
    assert not (tmp_path / "sweep").exists()


def test_run_sweep_writes_tables(tmp_path: Path):
    """Test that a two-level sweep writes one JSON per resolution and a CSV per quantity."""
    config = Config.from_dict({**SMALL, "sweep": {"resolutions": [65, 33], "quantities": ["charge", "jump"]}})
    tables = run_sweep(config, tmp_path)
    assert set(tables) == {"charge", "jump"}
    charge = tables["charge"]
    assert [n for n, _, _ in charge] == [33, 65]
    assert charge[0][1] > 0
    assert math.isnan(charge[1][1])
    record = artifacts.read_json(tmp_path / "sweep" / "charge_33.json")
    assert record["resolution"] == 33
    assert record["config_hash"] != config.config_hash
    assert (tmp_path / "sweep_charge.csv").is_file()
    jump = artifacts.read_json(tmp_path / "sweep" / "jump_65.json")
    assert jump["value"] != "nan"
