import copy

import pytest
import yaml

from wfsim import ConfigError, DiseaseState as S, Outcome as O, Strategy, canonical, dump_config, load_config, parse_config
from wfsim.config import parse_workflow, workflow_dict

from conftest import DATA_DIR


def raw_example():
    return yaml.safe_load((DATA_DIR / "pad_example.yaml").read_text())


def test_example_loads(example_config):
    cfg = load_config(example_config)
    assert cfg.seed == 20240614
    assert set(cfg.workflows) == {"nurse", "nurse_thresholded", "doctor"}
    assert [a.config.strategy for a in cfg.arms] == [Strategy.RANKED, Strategy.THRESHOLDED, Strategy.DOCTOR_ALERT]
    assert [s.kind for s in cfg.sweeps] == ["capacity", "alert_fatigue", "heatmap"]
    assert cfg.finance.retention_rate == 0.76
    assert cfg.monitor["predictions"].endswith("monitor_predictions.csv")


def test_round_trip(example_config):
    cfg = load_config(example_config)
    again = parse_config(yaml.safe_load(dump_config(cfg)), example_config.parent)
    assert again == cfg
    assert canonical(again) == canonical(cfg)


def test_round_trip_with_overrides():
    data = raw_example()
    data["utilities"] = {"severe": {"medication": 0.65}, "moderate": {"surgery": 0.7}}
    cfg = parse_config(data, DATA_DIR)
    assert cfg.utilities.values[(S.SEVERE, O.MEDICATION)] == 0.65
    assert cfg.utilities.extrapolated == frozenset()
    assert parse_config(yaml.safe_load(dump_config(cfg)), DATA_DIR) == cfg


def test_explicit_workflow_round_trip():
    for name in ("nurse_ranked", "nurse_thresholded", "doctor_alert"):
        g = parse_workflow({"preset": name}, "w")
        assert parse_workflow(workflow_dict(g), "w") == g


@pytest.mark.parametrize("path,value", [
    (("bogus",), 1),
    (("cohort", "colour"), "red"),
    (("simulation", "arms", 0, "nurse_capcity"), 3),
    (("finance", "ppvv"), 0.3),
    (("sweeps", 0, "axis1", "step"), 1),
    (("monitor", "window"), 3),
])
def test_unknown_keys_rejected(path, value):
    data = raw_example()
    node = data
    for k in path[:-1]:
        node = node[k]
    node[path[-1]] = value
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(data, DATA_DIR)


@pytest.mark.parametrize("mutate", [
    lambda d: d["cohort"].update(prevalence=2),
    lambda d: d["simulation"]["arms"][0].update(strategy="magic"),
    lambda d: d["simulation"]["arms"][0].update(workflow="nope"),
    lambda d: d["sweeps"][0]["axis1"].update(values=[3, 2]),
    lambda d: d["sweeps"][0].update(kind="spiral"),
    lambda d: d["finance"].update(ppv=1.5),
    lambda d: d.update(seed="abc"),
    lambda d: d["workflows"].update(nurse={"preset": "unknown"}),
    lambda d: d["output"].update(format="pdf"),
])
def test_invalid_values(mutate):
    data = raw_example()
    mutate(data)
    with pytest.raises(ConfigError):
        parse_config(data, DATA_DIR)


def test_explicit_nodes_schema():
    wf = {
        "nodes": [
            {"id": "s", "kind": "start"},
            {"id": "alert", "kind": "decision"},
            {"id": "doc", "kind": "resource", "capacity": 2, "service_order": "arrival_order"},
            {"id": "fix", "kind": "terminal", "outcome": "optimal"},
            {"id": "meds", "kind": "terminal", "outcome": "medication"},
        ],
        "edges": [
            {"from": "s", "to": "alert"},
            {"from": "alert", "to": "doc", "guard": {"score": ">=", "threshold": 0.4}},
            {"from": "alert", "to": "meds", "guard": {"score": "<", "threshold": 0.4}},
            {"from": "doc", "to": "fix", "guard": "admitted"},
            {"from": "doc", "to": "meds", "guard": "rejected"},
        ],
    }
    g = parse_workflow(wf, "w")
    assert g.node("doc").capacity == 2
    bad = copy.deepcopy(wf)
    bad["edges"][1]["guard"] = {"score": "~", "threshold": 0.4}
    with pytest.raises(ConfigError):
        parse_workflow(bad, "w")
