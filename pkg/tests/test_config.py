from __future__ import annotations

import json
from fractions import Fraction

import pytest

from corrugator.domain.errors import ConfigurationError
from corrugator.infrastructure.system import config


def test_packaged_settings_load():
    settings = config.load_settings()
    assert config.get_precision_digits(settings) == 15
    assert config.get_seed(settings) == 20240601
    assert config.get_grid_step(settings) == Fraction(1, 500)
    assert config.get_exact(settings, "holder.delta0") == Fraction(5, 10 ** 16)
    assert config.get_exact_list(settings, "holder.sigmas") == [10, 100, 1000, 10000]
    assert config.get_log_level(settings) == "INFO"


def test_merge_is_deep_and_copies():
    base = {"a": {"b": 1, "c": [1]}, "d": 2}
    out = config.merge(base, {"a": {"b": 5}, "d": {"e": 1}})
    assert out == {"a": {"b": 5, "c": [1]}, "d": {"e": 1}}
    out["a"]["c"].append(2)
    assert base["a"]["c"] == [1]


def test_yaml_run_config_merges_over_settings(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("pipeline: c1\nprecision:\n  digits: 30\nexample: identity\n", encoding="utf-8")
    merged = config.load_run_config(path, {"precision": {"digits": 15, "seed": 3}})
    assert merged["pipeline"] == "c1"
    assert config.get_precision_digits(merged) == 30
    assert config.get_seed(merged) == 3


def test_json_run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"pipeline": "sweep"}), encoding="utf-8")
    assert config.load_run_config(path, {})["pipeline"] == "sweep"


@pytest.mark.parametrize(
    "name, text",
    [
        ("bad.json", "{"),
        ("bad.yaml", "a: [1, 2"),
        ("list.yaml", "- 1\n- 2\n"),
        ("pipe.json", '{"pipeline": "c2"}'),
    ],
)
def test_run_config_errors(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigurationError):
        config.load_run_config(path, {})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        config.load_run_config(tmp_path / "nope.yaml", {})


def test_exact_values_stay_exact():
    settings = {"a": 1e-18, "b": "1-2e-21", "c": "1/3", "flag": True}
    assert config.get_exact(settings, "a") == Fraction(1, 10 ** 18)
    assert config.get_exact(settings, "c") == Fraction(1, 3)
    assert config.get_exact(settings, "missing") is None
    assert config.get_exact(settings, "missing", "0.5") == Fraction(1, 2)
    with pytest.raises(ConfigurationError):
        config.get_exact(settings, "b")
    with pytest.raises(ConfigurationError):
        config.get_exact(settings, "flag")
    with pytest.raises(ConfigurationError):
        config.get_exact_list(settings, "a")


@pytest.mark.parametrize(
    "getter, settings",
    [
        (config.get_precision_digits, {"precision": {"digits": 10}}),
        (config.get_precision_digits, {"precision": {"digits": "many"}}),
        (config.get_seed, {"precision": {"seed": -1}}),
        (config.get_sampling_n, {"sampling": {"n": 0}}),
        (config.get_grid_step, {"grid": {"h": "0"}}),
        (config.get_search_factor, {"search": {"factor": "1"}}),
        (config.get_lambda_max, {"search": {"lambdaMax": -5}}),
        (config.get_quadrature_n, {"mollify": {"quadrature_n": 4}}),
        (config.get_quadrature_tol, {"mollify": {"tol": "2"}}),
        (config.get_output_decimals, {"output": {"decimals": 0}}),
        (config.get_output_decimals, {"output": {"decimals": 41}}),
        (config.get_max_grid_points, {"grid": {"maxPoints": 0}}),
        (config.get_sampling_n, {"sampling": {"n": True}}),
    ],
)
def test_getters_validate(getter, settings):
    with pytest.raises(ConfigurationError):
        getter(settings)


@pytest.mark.parametrize("raw, level", [("debug", "DEBUG"), ("LOUD", "INFO"), (3, "INFO"), (None, "INFO")])
def test_log_level_falls_back(raw, level):
    assert config.get_log_level({"logging": {"level": raw}}) == level


def test_int_and_str_getters():
    settings = {"stage": {"mode": "fixed", "stageBudget": 2}}
    assert config.get_int(settings, "stage.stageBudget", 1, minimum=1) == 2
    assert config.get_int(settings, "stage.other", 4) == 4
    with pytest.raises(ConfigurationError):
        config.get_int(settings, "stage.stageBudget", 1, minimum=3)
    assert config.get_str(settings, "stage.mode", "search", ("search", "fixed")) == "fixed"
    with pytest.raises(ConfigurationError):
        config.get_str(settings, "stage.mode", "search", ("search",))
    with pytest.raises(ConfigurationError):
        config.get_str(settings, "stage.stageBudget", "x")


def test_settings_digest_is_order_independent():
    a = config.settings_digest({"x": 1, "y": {"z": "0.1"}})
    b = config.settings_digest({"y": {"z": "0.1"}, "x": 1})
    assert a == b and len(a) == 64
    assert config.settings_digest({"x": 2}) != a


def test_lookup():
    assert config.lookup({"a": {"b": 1}}, "a.b") == 1
    assert config.lookup({"a": 1}, "a.b", "d") == "d"
