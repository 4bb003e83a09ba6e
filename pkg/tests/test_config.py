# tests/test_config.py
from __future__ import annotations

import json
from pathlib import Path

import pytest

from avstress.config import RunConfig, apply_overrides, parse_overrides, set_dotted
from avstress.crosswalk import preset
from avstress.errors import ConfigError
from avstress.runner import resolve
from avstress.scenarios import load_scenario, scenario_from_dict, scenario_to_dict


def test_parse_overrides_sections():
    ov = parse_overrides(["idm.b_max=9", "mcts.c=50", "drl.trpo.kl_step=0.05", "reward.miss_penalty=-5000", "name=x"])
    assert ov["scenario"] == {"idm.b_max": 9, "name": "x"}
    assert ov["mcts"] == {"c": 50}
    assert ov["drl"] == {"trpo.kl_step": 0.05}
    assert ov["reward"] == {"miss_penalty": -5000}


def test_parse_overrides_explicit_scenario_prefix():
    assert parse_overrides(["scenario.dt=0.05"])["scenario"] == {"dt": 0.05}


def test_parse_overrides_rejects_malformed():
    with pytest.raises(ConfigError):
        parse_overrides(["idm.b_max"])
    with pytest.raises(ConfigError):
        parse_overrides(["=3"])


def test_set_dotted_lists_and_unknown_keys():
    data = {"pedestrians": [{"y": -2.0}], "idm": {"b_max": 2.5}}
    set_dotted(data, "pedestrians.0.y", -3.0)
    assert data["pedestrians"][0]["y"] == -3.0
    with pytest.raises(ConfigError):
        set_dotted(data, "idm.nope", 1)
    with pytest.raises(ConfigError):
        set_dotted(data, "pedestrians.4.y", 1)


def test_apply_overrides_does_not_mutate_input():
    data = {"idm": {"b_max": 2.5}}
    out = apply_overrides(data, {"idm.b_max": 9})
    assert out["idm"]["b_max"] == 9
    assert data["idm"]["b_max"] == 2.5


def test_scenario_dict_round_trip():
    cfg = preset(3)
    assert scenario_from_dict(scenario_to_dict(cfg)) == cfg


def test_scenario_from_dict_requires_pedestrians():
    with pytest.raises(ConfigError):
        scenario_from_dict({"dt": 0.1})
    with pytest.raises(ConfigError):
        scenario_from_dict({"pedestrians": []})


def test_scenario_from_dict_rejects_unknown_key():
    with pytest.raises(ConfigError, match="wheels"):
        scenario_from_dict({"pedestrians": [{"vx": 0, "vy": 1.4, "x": 0, "y": -2}], "wheels": 4})


def test_load_scenario_presets_and_overrides():
    cfg = load_scenario("2", {"idm.b_max": 9.0}, horizon=75)
    assert cfg.idm.b_max == 9.0
    assert cfg.horizon == 75
    assert cfg.pedestrians == preset(2).pedestrians
    with pytest.raises(ConfigError):
        load_scenario("7")


def test_load_scenario_from_json(tmp_path: Path):
    p = tmp_path / "wide_road.json"
    p.write_text(
        json.dumps({"pedestrians": [{"vx": 0.0, "vy": 1.2, "x": 1.0, "y": -3.0}], "road": {"lanes": 3}}),
        encoding="utf-8",
    )
    cfg = load_scenario(str(p))
    assert cfg.name == "wide_road"
    assert cfg.road.lanes == 3
    assert cfg.road.lane_width == 3.7
    assert cfg.pedestrians[0].vy == 1.2


def test_load_scenario_bad_files(tmp_path: Path):
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_scenario(str(bad))


def test_parameter_invariants():
    with pytest.raises(ConfigError):
        load_scenario("1", {"sigma_noise": 0.0})
    with pytest.raises(ConfigError):
        load_scenario("1", {"dt": -0.1})
    with pytest.raises(ConfigError):
        load_scenario("1", {"tracker_alpha": 1.5})


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(solver="ppo")
    with pytest.raises(ConfigError):
        RunConfig(budget=0)
    with pytest.raises(ConfigError):
        RunConfig(horizon=0)


def test_resolve_horizon_propagates():
    r = resolve(RunConfig(scenario="1", horizon=50))
    assert r.scenario.horizon == 50
    assert r.reward.horizon == 50
    assert r.mcts.depth == 50


def test_resolve_default_depth_matches_horizon():
    r = resolve(RunConfig(scenario="3"))
    assert r.mcts.depth == r.scenario.horizon == r.reward.horizon == 100


def test_resolve_solver_overrides():
    r = resolve(
        RunConfig(
            overrides=("mcts.c=50", "drl.trpo.kl_step=0.05", "drl.hidden=[16, 16]", "reward.dist_scale=-10"),
            iterations=7,
        )
    )
    assert r.mcts.c == 50
    assert r.mcts.iterations == 7
    assert r.drl.iterations == 7
    assert r.drl.trpo.kl_step == 0.05
    assert r.drl.hidden == (16, 16)
    assert r.reward.dist_scale == -10


def test_resolve_rejects_unknown_solver_keys():
    with pytest.raises(ConfigError):
        resolve(RunConfig(overrides=("mcts.gamma=0.9",)))
    with pytest.raises(ConfigError):
        resolve(RunConfig(overrides=("drl.trpo.kl_step=-1",)))
