import json
import subprocess
import sys

import pytest
import yaml

from wfsim.cli import main
from wfsim.report import NOT_RUN, SECTIONS, MissingArtifact, assemble_report

from conftest import DATA_DIR


def small_config(tmp_path, **changes):
    data = yaml.safe_load((DATA_DIR / "pad_example.yaml").read_text())
    data["cohort"].update(n_per_day=20, horizon_days=20)
    for sw in data["sweeps"]:
        sw["replicates"] = 2
        sw["axis1"]["values"] = sw["axis1"]["values"][:4]
        if "axis2" in sw:
            sw["axis2"]["values"] = sw["axis2"]["values"][:3]
    for k in ("predictions", "labels", "adherence"):
        data["monitor"][k] = str(DATA_DIR / data["monitor"][k])
    data.update(changes)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def run(*args):
    return main([str(a) for a in args])


def test_validate_example(example_config, capsys):
    assert run("validate", "--config", example_config) == 0
    out = capsys.readouterr().out
    assert "status: ok" in out and "ExtrapolatedUtility" in out


def test_validate_failure(tmp_path, capsys):
    cfg = small_config(tmp_path)
    data = yaml.safe_load(cfg.read_text())
    data["utilities"] = None
    data["workflows"]["broken"] = {"nodes": [{"id": "s", "kind": "start"}, {"id": "t", "kind": "terminal", "outcome": "untreated"},
                                             {"id": "u", "kind": "terminal", "outcome": "surgery"}],
                                   "edges": [{"from": "s", "to": "t"}]}
    cfg.write_text(yaml.safe_dump(data))
    assert run("validate", "--config", cfg) == 1
    assert "UnreachableNode" in capsys.readouterr().out


def test_config_error_exit_and_json(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: 1\nmystery: 2\n")
    assert run("validate", "--config", bad) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["status"] == 1 and err["error"] == "ConfigError" and "mystery" in err["message"]


def test_missing_file_is_io_error(tmp_path, capsys):
    assert run("validate", "--config", tmp_path / "absent.yaml") == 3
    assert json.loads(capsys.readouterr().err)["status"] == 3


def test_runtime_error_exit(tmp_path, capsys):
    cfg = small_config(tmp_path)
    data = yaml.safe_load(cfg.read_text())
    data["cohort"]["prevalence"] = 0.0  # optimistic == treat none
    cfg.write_text(yaml.safe_dump(data))
    assert run("sweep", "--config", cfg, "--out", tmp_path / "o", "--format", "csv") == 2
    assert json.loads(capsys.readouterr().err)["error"] == "DegenerateBaselines"


def test_seed_required(tmp_path, capsys):
    cfg = small_config(tmp_path)
    data = yaml.safe_load(cfg.read_text())
    del data["seed"]
    cfg.write_text(yaml.safe_dump(data))
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 1
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o", "--seed", 3) == 0


def test_full_pipeline(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "out"
    before = cfg.read_bytes()
    for cmd in ("simulate", "sweep", "finance", "monitor", "report"):
        assert run(cmd, "--config", cfg, "--out", out, "--threads", 2) == 0, cmd
    assert cfg.read_bytes() == before
    names = {p.name for p in out.iterdir()}
    assert {"simulation.csv", "sweep_nurse_capacity.csv", "sweep_nurse_capacity.svg", "sweep_alert_fatigue_treat_all.csv",
            "sweep_incremental_gain.svg", "cashflow.csv", "sensitivity.csv", "alerts.csv", "sensitivity_by_time.csv",
            "adherence.csv", "monitor_summary.json", "report.md"} <= names
    assert not any(n.endswith(".tmp") for n in names)
    report = (out / "report.md").read_text()
    for h in SECTIONS:
        assert f"## {h}" in report
    assert NOT_RUN not in report
    assert "| treat_none | 0.00% |" in report and "| optimistic | 100.00% |" in report
    assert "| Y0 (Deployment) | Y1 | Y2 | Y3 | Y4 | Y5 |" in report
    assert "Most sensitive to a 10% increase in:" in report


def test_format_flag(tmp_path):
    cfg = small_config(tmp_path)
    assert run("sweep", "--config", cfg, "--out", tmp_path / "c", "--format", "csv", "--replicates", 1) == 0
    assert not list((tmp_path / "c").glob("*.svg"))
    assert run("sweep", "--config", cfg, "--out", tmp_path / "p", "--format", "plot", "--replicates", 1) == 0
    assert not list((tmp_path / "p").glob("*.csv"))


def test_finance_only_report(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "fin"
    assert run("finance", "--config", cfg, "--out", out) == 0
    assert run("report", "--config", cfg, "--out", out) == 0
    text = (out / "report.md").read_text()
    assert "## Financial Projections" in text and "Y0 (Deployment)" in text
    usefulness = text.split("## Usefulness Estimates by Workflow Simulation")[1].split("##")[0]
    assert NOT_RUN in usefulness


def test_assemble_report_missing_artifact(tmp_path):
    with pytest.raises(MissingArtifact):
        assemble_report({"cashflow": tmp_path / "nope.csv"})
    text = assemble_report({})
    assert text.count(NOT_RUN) == len(SECTIONS)


def test_module_entry_point(example_config):
    proc = subprocess.run([sys.executable, "-m", "wfsim", "validate", "--config", str(example_config)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
