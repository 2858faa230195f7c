import json
import shutil
from pathlib import Path

import pytest

from closure_lab.cli import main
from closure_lab.config import KINDS, SCHEMA, list_experiments, parse_config
from closure_lab.errors import ValidationError
from closure_lab.report import dumps_json

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def configs(tmp_path):
    dst = tmp_path / "configs"
    shutil.copytree(CONFIGS, dst)
    return dst


def run(cfg, out):
    return main(["run", str(cfg), "-o", str(out)])


# config parsing


def test_parse_types_and_defaults():
    cfg = parse_config("experiment.kind = renorm\nrenorm.eigenvalues = 0.5, 0.7\nrenorm.k_max = 0x10\n")
    assert cfg.get("renorm.eigenvalues") == [0.5, 0.7]
    assert cfg.get("renorm.k_max") == 16
    assert cfg.get("renorm.tail_length") == 20
    assert cfg.threads == 1 and cfg.plots is False


@pytest.mark.parametrize("text,match", [
    ("renorm.k_max = 3", "experiment.kind"),
    ("experiment.kind = nope", "unknown experiment kind"),
    ("experiment.kind = renorm\nrenorm.bogus = 1", "unknown keys"),
    ("experiment.kind = renorm\nrenorm.k_max = 1\nrenorm.k_max = 2", "duplicate"),
    ("experiment.kind = renorm\nrenorm.k_max = many", "cannot read"),
    ("experiment.kind = measure", "seed is required"),
    ("experiment.kind = renorm\nno equals sign", "expected"),
])
def test_parse_rejects(text, match):
    with pytest.raises(ValidationError, match=match):
        parse_config(text)


def test_seed_optional_when_deterministic():
    assert parse_config("experiment.kind = oe-check\noe.recover_samples = 0").seed is None


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("CLOSURE_LAB_THREADS", "8")
    assert parse_config("experiment.kind = tower").threads == 8
    monkeypatch.setenv("CLOSURE_LAB_THREADS", "x")
    with pytest.raises(ValidationError):
        parse_config("experiment.kind = tower")


def test_echo_excludes_threads_and_output():
    cfg = parse_config("experiment.kind = tower\nexperiment.threads = 4\nexperiment.output = o")
    assert "experiment.threads" not in cfg.echo() and "experiment.output" not in cfg.echo()


# listing


def test_list_has_six_kinds_and_every_key(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert len(lines) == 6 == len(KINDS)
    for line, kind in zip(lines, KINDS):
        assert line.startswith(kind + " ")
        for key in SCHEMA[kind]:
            assert f" {key}=" in line
    assert list_experiments() == out


# runs


def test_tower_commuting(configs, tmp_path):
    out = tmp_path / "tower"
    assert run(configs / "tower.cfg", out) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] == "pseudo_solvable_at_level 1" and rep["status"] == "ok"
    assert (out / "data" / "levels.csv").is_file()
    assert '"verdict": "pseudo_solvable_at_level 1"' in (out / "report.json").read_text()


def test_renorm_k17(configs, tmp_path):
    out = tmp_path / "renorm"
    assert run(configs / "renorm.cfg", out) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["k"] == 17 and rep["case"] == "Case1"
    assert (out / "plots" / "displacement.svg").read_text().startswith("<svg")


def test_negative_grid_exit_2_no_artifacts(configs, tmp_path):
    out = tmp_path / "bad"
    assert run(configs / "bad_grid.cfg", out) == 2
    assert not out.exists()


def test_missing_input_exit_2(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment.kind = renorm\nrenorm.jet = missing.jet\nrenorm.eigenvalues = 0.5\n")
    assert run(cfg, tmp_path / "o") == 2
    assert not (tmp_path / "o").exists()
    assert main(["run", str(tmp_path / "absent.cfg")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    cfg = tmp_path / "esc.cfg"
    cfg.write_text("experiment.kind = flow-compare\nflow.C = 1e-2\nflow.t = 5\nflow.domain = -1, 1\n")
    out = tmp_path / "esc"
    assert run(cfg, out) == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "numerical_failure"
    assert rep["error"]["type"] == "EscapeError" and "step" in rep["error"]["diagnostics"]


def test_default_output_next_to_config(configs):
    assert main(["run", str(configs / "grade.cfg")]) == 0
    rep = json.loads((configs / "grade_out" / "report.json").read_text())
    assert rep["product_law"] is True


@pytest.mark.parametrize("name", ["grade", "flow", "oe"])
def test_other_kinds_run(configs, tmp_path, name):
    out = tmp_path / name
    assert run(configs / f"{name}.cfg", out) == 0
    assert json.loads((out / "report.json").read_text())["status"] == "ok"


def test_same_config_byte_identical(configs, tmp_path):
    for i in (1, 2):
        assert run(configs / "oe.cfg", tmp_path / f"r{i}") == 0
    assert (tmp_path / "r1" / "report.json").read_bytes() == (tmp_path / "r2" / "report.json").read_bytes()


# report formatting


def test_json_seventeen_digits():
    text = dumps_json({"x": 0.1, "y": [1 / 3], "n": float("inf"), "k": 3})
    assert '"x": 0.10000000000000001' in text
    assert "0.33333333333333331" in text
    assert '"n": "inf"' in text and '"k": 3' in text
    assert json.loads(text)["y"][0] == 1 / 3
