from safmodel.config import *

import os
import string

import pytest

SCENARIO = """[scenario]
name = "t"
case = "electrolysis"

[solver]
rel_gap = 1e-6
foo = 1
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_override():
    assert parse_override("solver.rel_gap=1e-3") == (("solver", "rel_gap"), 1e-3)
    assert parse_override("pareto.caps=[1, 2]") == (("pareto", "caps"), [1, 2])
    assert parse_override("scenario.name=ftsaf") == (("scenario", "name"), "ftsaf")
    assert parse_override("scenario.description=a=b") == (("scenario", "description"), "a=b")


@pytest.mark.parametrize("text", ["solver.rel_gap", "solver..rel_gap=1", "=1"])
def test_parse_override_malformed(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_load_bundled():
    scenario = load_scenario("toy")
    assert scenario.path.endswith("toy.toml")
    assert scenario.data["scenario"]["case"] == "electrolysis"
    assert scenario.data["solver"]["rel_gap"] == 1e-6
    assert len(scenario.digest) == 16
    assert all(c in string.hexdigits for c in scenario.digest)


def test_override_changes_digest():
    plain = load_scenario("toy")
    other = load_scenario("toy", ["globals.gamma_el=0.1"])
    assert other.data["globals"]["gamma_el"] == 0.1
    assert other.digest != plain.digest
    assert load_scenario("toy").digest == plain.digest


def test_unknown_key_in_file(tmp_path):
    path = write(tmp_path, "s.toml", SCENARIO)
    with pytest.raises(ConfigError) as exc:
        load_scenario(path)
    assert exc.value.key == "solver.foo"
    assert exc.value.line == 7
    assert str(exc.value).startswith("{}:7:".format(path))


def test_unknown_override_key():
    with pytest.raises(ConfigError) as exc:
        load_scenario("toy", ["solver.bogus=1"])
    assert exc.value.key == "solver.bogus"


def test_free_tables():
    scenario = from_dict({"scenario": {"name": "x"}, "process_params": {"AEC": {"specific_work": -55.0}}})
    assert scenario.path is None
    assert scenario.data["process_params"]["AEC"]["specific_work"] == -55.0


def test_missing_scenario_table():
    with pytest.raises(ConfigError) as exc:
        from_dict({"solver": {"rel_gap": 1e-3}})
    assert exc.value.key == "scenario"


def test_toml_syntax_error(tmp_path):
    path = write(tmp_path, "bad.toml", "[scenario\nname = 1\n")
    with pytest.raises(ConfigError) as exc:
        load_scenario(path)
    assert exc.value.line == 1


def test_json_scenario(tmp_path):
    path = write(tmp_path, "s.json", '{"scenario": {"name": "j", "case": "chain"}}')
    assert load_scenario(path).data["scenario"]["case"] == "chain"
    path = write(tmp_path, "bad.json", '{"scenario":\n  {"name": }}')
    with pytest.raises(ConfigError) as exc:
        load_scenario(path)
    assert exc.value.line == 2


def test_scenario_hash():
    assert scenario_hash({"a": 1, "b": [1, 2]}) == scenario_hash({"b": [1, 2], "a": 1})
    assert scenario_hash({"a": 1}) != scenario_hash({"a": 2})


def test_not_found():
    with pytest.raises(ConfigError):
        load_scenario("no-such-scenario")


def test_resolve(tmp_path):
    path = write(tmp_path, "s.toml", '[scenario]\nname = "r"\n')
    scenario = load_scenario(path)
    assert resolve(scenario, "net.json") == os.path.join(str(tmp_path), "net.json")
    assert resolve(scenario, "/abs/net.json") == "/abs/net.json"
    assert resolve(from_dict({"scenario": {}}), "net.json") == "net.json"
