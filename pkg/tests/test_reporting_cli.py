import json
import subprocess
import sys

import numpy as np
import pytest

from geoaudit.auditor import AuditReport
from geoaudit.cli import main
from geoaudit.config import ExperimentConfig, load_config
from geoaudit.errors import ConfigError
from geoaudit.pipeline import ARTIFACTS, execute, run_pipeline
from geoaudit.reporting import fmt_float, to_csv, to_json, write_report

from conftest import ADULT_DATA, ROOT

XOR_INI = """
[data]
source = xor
n = 600
leak_rate = 1.0

[train]
seed = 0
epochs = 25

[capacity]
widths = 1, 2, 4
seeds_per_point = 2
final_width = 4

[stress]
scenarios = shortcut_injection

[scenario:shortcut_injection]
kind = inject
feature = shortcut
raw_value = 1.0
selector = low_income

[baselines]
upweight_factor = 3

[run]
output_dir = out
"""


@pytest.fixture
def xor_config(tmp_path):
    p = tmp_path / "xor.ini"
    p.write_text(XOR_INI)
    return p


# -- reporting ---------------------------------------------------------------------


def test_fmt_float():
    assert fmt_float(0.123456789) == "0.123457"
    assert fmt_float(123456789.0) == "1.23457e+08"
    assert fmt_float(2.0) == "2"


def test_json_is_sorted_and_rounded():
    report = AuditReport(("a", "b"), (1.23456789, 0.5), -0.1, 1.7345678, ("a",), 0.8, 3)
    doc = json.loads(to_json(report))
    assert list(doc) == sorted(doc)
    assert doc["tau"] == 1.73457
    assert doc["features"][0] == {"abs_weight": 1.23457, "flagged": True, "name": "a"}
    assert json.loads(to_json({"x": float("nan")})) == {"x": None}
    assert json.loads(to_json(np.array([1.0, 2.0]))) == [1.0, 2.0]


def test_csv_from_dicts():
    text = to_csv([{"a": 1, "b": 0.1234567}, {"a": 2, "b": True}])
    assert text == "a,b\n1,0.123457\n2,true\n"
    with pytest.raises(ValueError):
        to_csv([])


def test_write_report_formats(tmp_path):
    write_report({"k": 1}, tmp_path / "r.json", "json")
    assert json.loads((tmp_path / "r.json").read_text()) == {"k": 1}
    write_report({"k": 1}, tmp_path / "r.csv", "csv")
    assert (tmp_path / "r.csv").read_text() == "k\n1\n"
    with pytest.raises(ValueError, match="unsupported"):
        write_report({"k": 1}, tmp_path / "r.xml", "xml")


# -- configuration -------------------------------------------------------------------


def test_load_xor_config(xor_config):
    cfg = load_config(xor_config)
    assert cfg.source == "xor" and cfg.widths == (1, 2, 4)
    assert cfg.feature_list == ("x1", "x2", "shortcut")
    assert cfg.output_dir == str(xor_config.parent / "out")
    assert cfg.scenarios[0].feature == "shortcut"
    assert cfg.jtt.upweight_factor == 3 and cfg.jtt.phase1_epochs == 25
    assert cfg.digest() == load_config(xor_config).digest()
    assert cfg.with_overrides(seed=5).digest() != cfg.digest()


@pytest.mark.parametrize("edit", [
    ("source = xor", "source = parquet"),
    ("widths = 1, 2, 4", "widths = 4, 2"),
    ("[data]", "[dataz]"),
    ("[run]", "[run]\na line without a delimiter"),
])
def test_bad_configs_raise(tmp_path, edit):
    p = tmp_path / "bad.ini"
    p.write_text(XOR_INI.replace(*edit))
    with pytest.raises(ConfigError):
        load_config(p)


def test_unknown_feature_is_config_error(tmp_path):
    p = tmp_path / "a.ini"
    p.write_text(f"[data]\nsource = adult\npath = {ADULT_DATA}\nfeatures = age, shoe-size\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_shipped_configs_parse():
    adult = load_config(ROOT / "configs" / "adult.ini")
    assert adult.source == "adult" and len(adult.feature_list) == 9
    assert load_config(ROOT / "configs" / "xor.ini").source == "xor"


# -- pipeline ---------------------------------------------------------------------------


def test_xor_pipeline_end_to_end(xor_config):
    cfg = load_config(xor_config)
    result = execute(cfg)
    out = xor_config.parent / "out"
    audit = json.loads((out / "audit.json").read_text())
    assert [f["name"] for f in audit["features"] if f["flagged"]] == ["shortcut"]
    manifest = json.loads((out / "manifest.json").read_text())
    # Manifest completeness: every produced file is listed and exists.
    assert sorted(p.name for p in out.iterdir()) == manifest["files"]
    assert set(manifest["files"]) == set(ARTIFACTS)
    assert all(s["status"] == "ok" for s in manifest["stages"].values())
    stress = json.loads((out / "stress.json").read_text())
    rates = {r["model_label"]: r["flip_rate"] for r in stress["reports"]}
    assert rates["robust"] == 0.0
    assert (out / "capacity.csv").read_text().startswith("variant,hidden_width,train_acc,test_acc\n")
    assert result.pruned.train.feature_names == ("x1", "x2")


def test_pipeline_is_byte_deterministic(xor_config, tmp_path):
    cfg = load_config(xor_config).with_overrides(stages=["audit", "sweep"])
    run_pipeline(cfg.with_overrides(output_dir=tmp_path / "a"))
    run_pipeline(cfg.with_overrides(output_dir=tmp_path / "b"))
    for name in ("audit.json", "capacity.csv", "transition.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stage_isolation(xor_config, tmp_path):
    base = load_config(xor_config)
    run_pipeline(base.with_overrides(output_dir=tmp_path / "full", stages=["audit", "sweep", "stress"]))
    run_pipeline(base.with_overrides(output_dir=tmp_path / "part", stages=["audit"]))
    assert sorted(p.name for p in (tmp_path / "part").iterdir()) == ["audit.json", "manifest.json"]
    assert (tmp_path / "full" / "audit.json").read_bytes() == (tmp_path / "part" / "audit.json").read_bytes()


def test_stale_artifacts_are_removed(xor_config, tmp_path):
    cfg = load_config(xor_config).with_overrides(output_dir=tmp_path / "o")
    run_pipeline(cfg.with_overrides(stages=["audit", "sweep"]))
    run_pipeline(cfg.with_overrides(stages=["audit"]))
    assert not (tmp_path / "o" / "capacity.csv").exists()


# -- CLI -----------------------------------------------------------------------------------


def test_cli_adult_audit_only(tmp_path):
    cfg = tmp_path / "adult.ini"
    cfg.write_text(f"[data]\nsource = adult\npath = {ADULT_DATA}\n[train]\nepochs = 20\n")
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["audit.json", "manifest.json"]


def test_cli_ingest_check(xor_config, capsys):
    assert main(["ingest-check", "--config", str(xor_config), "--out", str(xor_config.parent / "i")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["train_rows"] == 480 and summary["features"] == ["x1", "x2", "shortcut"]


def test_cli_exit_codes(tmp_path, xor_config, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "e")]) == 1
    bad_data = tmp_path / "bad.ini"
    bad_data.write_text(f"[data]\nsource = adult\npath = {tmp_path / 'nope.data'}\n")
    assert main(["audit", "--config", str(bad_data), "--out", str(tmp_path / "e")]) == 2
    assert "stage 'ingest'" in capsys.readouterr().err
    malformed = tmp_path / "m.data"
    malformed.write_text("39, State-gov, 77516\n")
    bad_data.write_text(f"[data]\nsource = adult\npath = {malformed}\n")
    assert main(["audit", "--config", str(bad_data), "--out", str(tmp_path / "e")]) == 2
    diverge = tmp_path / "div.ini"
    diverge.write_text(XOR_INI.replace("epochs = 25", "epochs = 25\nprobe_learning_rate = 1e308"))
    assert main(["audit", "--config", str(diverge), "--out", str(tmp_path / "d")]) == 3


def test_cli_seed_override(xor_config, tmp_path):
    assert main(["audit", "--config", str(xor_config), "--seed", "7", "--out", str(tmp_path / "s")]) == 0
    assert json.loads((tmp_path / "s" / "audit.json").read_text())["seed"] == 7


def test_module_entry_point(xor_config):
    proc = subprocess.run([sys.executable, "-m", "geoaudit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("geoaudit ")


def test_default_config_object():
    cfg = ExperimentConfig(source="xor")
    cfg.validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(source="adult").validate()
