import json

import pytest

from pegsim.errors import ConfigInvalid
from pegsim.sim.config import golden_names, load_config, parse_range, set_path


def test_missing_seed():
    with pytest.raises(ConfigInvalid):
        load_config({"version": 1, "steps": 10})


@pytest.mark.parametrize("bad", [
    {"version": 2, "seed": 0, "steps": 1},
    {"version": 1, "seed": -1, "steps": 1},
    {"version": 1, "seed": 0, "steps": 1, "agents": [{"type": "wizard", "id": "x"}]},
    {"version": 1, "seed": 0, "steps": 1, "shocks": [{"step": 1, "type": "capital_removal", "agent": "ghost"}]},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigInvalid):
        load_config(bad)


def test_defaults_filled():
    cfg = load_config({"version": 1, "seed": 3, "steps": 5})
    assert cfg["controller"]["gain"] == "0.1"
    assert cfg["oracle"]["sample_size"] == 7


def test_file_errors(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(bad)
    ok = tmp_path / "ok.json"
    ok.write_text(json.dumps({"version": 1, "seed": 0, "steps": 2}))
    assert load_config(ok)["steps"] == 2


def test_goldens_present_and_valid():
    names = golden_names()
    assert {"leverage_s61", "pegbreak_neg10"} <= set(names)


def test_ranges_and_paths():
    assert parse_range("0:0.2:0.1") == ["0", "0.1", "0.2"]
    assert parse_range("1,2, 3") == ["1", "2", "3"]
    cfg = {"a": {"b": 1}, "l": [{"x": 0}]}
    assert set_path(cfg, "a.b", 2)["a"]["b"] == 2
    assert set_path(cfg, "l.0.x", 5)["l"][0]["x"] == 5
    assert cfg["a"]["b"] == 1
