from __future__ import annotations

import json

import pytest

from ncrough.config import DEFAULT_SEED, DEFAULTS, RunConfig, load_config, parse_overrides, parse_value
from ncrough.domain.errors import ConfigError


def test_defaults():
    cfg = load_config("moments")
    assert cfg.seed == DEFAULT_SEED
    assert cfg.params == DEFAULTS["moments"]
    assert cfg.study is None
    assert load_config("study:bg").study == "bg"


def test_defaults_are_not_shared():
    cfg = load_config("solve", overrides=[("f.0.coeffs", [0.0, 2.0])])
    assert cfg.params["f"][0]["coeffs"] == [0.0, 2.0]
    assert cfg.params["g"][0]["coeffs"] == [0.0, 1.0]
    assert DEFAULTS["solve"]["f"][0]["coeffs"] == [0.0, 1.0]


def test_study_defaults_enable_trend_checks():
    area = load_config("study:area-convergence").params
    assert area["final_ratio"] == 0.3
    assert area["min_rate"] == 0.2
    bounds = load_config("study:bounds").params
    assert bounds["dimensions"] == [64, 128, 256]
    assert bounds["trace_samples"] == 8
    solve = load_config("solve").params
    assert solve["pairing"] == "explicit" and solve["initial_file"] is None


def test_parse_overrides():
    tokens = ["--q", "0.5", "--order=6", "--fine-exp", "3", "--area", "ito"]
    assert parse_overrides(tokens) == [("q", 0.5), ("order", 6), ("fine_exp", 3), ("area", "ito")]
    assert parse_value("[1, 2]") == [1, 2]
    assert parse_value("stratonovich") == "stratonovich"
    with pytest.raises(ConfigError):
        parse_overrides(["--q"])
    with pytest.raises(ConfigError):
        parse_overrides(["q", "0.5"])


@pytest.mark.parametrize(
    "command,overrides",
    [
        ("moments", [("foo", 1)]),
        ("moments", [("q", 1.5)]),
        ("moments", [("times", [1.0, 2.0, 3.0])]),
        ("moments", [("order", "four")]),
        ("integrate", [("coarse_exp", 9), ("fine_exp", 8)]),
        ("integrate", [("area", "riemann")]),
        ("solve", [("self_adjoint", "yes")]),
        ("solve", [("g", [])]),
        ("solve", [("f", [{"kind": "spline"}])]),
        ("solve", [("f.3", {})]),
        ("study:solution-convergence", [("solve_exp", 1)]),
        ("study:area-convergence", [("coarse_exps", [2])]),
        ("study:area-convergence", [("gamma", 0.5)]),
        ("study:bg", [("slack", 0.9)]),
        ("study:bg", [("n_seeds", 0)]),
        ("study:ito-formula", [("functions", [{"f": {"kind": "poly", "coeffs": [1.0]}}])]),
        ("study:ito-strato", [("pairs", [{"label": "p", "f": [], "g": [{"kind": "poly", "coeffs": [1.0]}]}])]),
        ("study:nonextension", [("n_list", [0, 2])]),
        ("study:bounds", [("amplitudes", [0.5, -1.0])]),
    ],
)
def test_invalid_configurations(command, overrides):
    with pytest.raises(ConfigError):
        load_config(command, overrides=overrides)


def test_unknown_command_and_seed():
    with pytest.raises(ConfigError):
        load_config("plot")
    with pytest.raises(ConfigError):
        load_config("moments", seed=-1)


def test_float_parameters_are_coerced():
    cfg = load_config("simulate", overrides=[("horizon", 2)])
    assert cfg.params["horizon"] == 2.0 and isinstance(cfg.params["horizon"], float)


def test_seeds_derive_from_master_seed():
    cfg = load_config("study:bg", seed=5, overrides=[("n_seeds", 3)])
    assert cfg.seeds() == [5, 6, 7]


def test_params_only_file(tmp_path):
    path = tmp_path / "bg.json"
    path.write_text(json.dumps({"dimension": 8, "n_seeds": 2}), encoding="utf-8")
    cfg = load_config("study:bg", config_file=path, overrides=[("n_seeds", 4)])
    assert cfg.params["dimension"] == 8
    assert cfg.params["n_seeds"] == 4


def test_full_config_file_round_trip(tmp_path):
    cfg = load_config("solve", seed=7, overrides=[("scheme", "picard")], output_dir=tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(cfg.dumps(), encoding="utf-8")
    again = load_config("solve", config_file=path)
    assert again.params == cfg.params
    assert again.seed == 7
    assert load_config("solve", config_file=path, seed=9).seed == 9
    restored = RunConfig.from_json(json.loads(cfg.dumps()))
    assert restored.output_dir == tmp_path / "out"
    assert restored.to_json()["schema_version"] == 1


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config("moments", config_file=tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config("moments", config_file=bad)
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"command": "simulate", "params": {}}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config("moments", config_file=other)
