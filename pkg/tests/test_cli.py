import json

import pytest

from runtumble.cli import DEFAULTS, main, parse_config, parse_overrides
from runtumble.core_types import ConfigError
from runtumble.inequality_lab import COLUMNS


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg.params.chi == 0.5 and cfg.params.alpha == 0.0
    assert cfg.L == 20.0 and cfg.n_cells == 4000
    assert cfg.stepping.cfl == 0.4 and cfg.stepping.t_final == 10.0
    assert cfg.initial.amplitude == 0.01 and cfg.initial.shape == "gaussian_bump"
    assert cfg.initial.constraint_mode == "project_all"
    assert cfg.raw == DEFAULTS


@pytest.mark.parametrize("doc, key", [
    ({"params": {"chi": 1.5}}, "params.chi: chi must be in (0,1)"),
    ({"grid": {"n_cells": 101}}, "grid.n_cells"),
    ({"grid": {"L": 5.0}}, "grid.L"),
    ({"grid": {"n_cells": "many"}}, "grid.n_cells: expected an integer"),
    ({"stepping": {"cfl": 2.0}}, "stepping.cfl"),
    ({"initial": {"shape": "cube"}}, "initial.shape"),
    ({"params": {"colour": 1}}, "params.colour: unknown key"),
    ({"extra": 1}, "extra: unknown key"),
    ({"entropy": {"delta_mode": "manual"}}, "entropy.delta_value"),
    ({"params": {"sigma_override": 3.0}}, "params.sigma_override"),
])
def test_config_errors_name_key(doc, key):
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(doc))
    assert key in str(info.value)


def test_overrides():
    ov = parse_overrides(["params.chi=0.3", "grid.L=30", "initial.shape=cosine_packet", "outputs.snapshots=[1, 2]"])
    cfg = parse_config("", ov)
    assert cfg.params.chi == 0.3 and cfg.initial.shape == "cosine_packet"
    assert cfg.stepping.snapshots == (1.0, 2.0)
    with pytest.raises(ConfigError):
        parse_overrides(["novalue"])


def test_manual_delta():
    cfg = parse_config(json.dumps({"entropy": {"delta_mode": "manual", "delta_value": 0.2}}))
    assert cfg.delta == 0.2 and cfg.stepping.delta == 0.2


SMALL = ["--set", "grid.n_cells=400", "--set", "stepping.t_final=3", "--set", "outputs.snapshots=[1.5]"]


def test_run_writes_outputs_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *SMALL, "--out-dir", str(a)]) == 0
    assert main(["run", *SMALL, "--out-dir", str(b)]) == 0
    text = (a / "series.csv").read_text()
    assert text == (b / "series.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert all(len(l.split(",")) == len(COLUMNS) for l in lines[1:])
    report = json.loads((a / "report.json").read_text())
    assert report["rate_normWy2"]["gamma_hat"] > 0
    snaps = json.loads((a / "snapshots.json").read_text())
    assert [s["t"] for s in snaps["snapshots"]] == [0.0, 1.5, 3.0]


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--set", "params.chi=1.5", "--out-dir", str(tmp_path)]) == 3
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 3
    two_bump = ["--set", "params.alpha=25", "--set", "initial.shape=two_bump", "--set", "initial.amplitude=100",
                "--set", "initial.center=3", "--set", "initial.width=0.3", "--set", "initial.constraint_mode=none",
                "--set", "grid.n_cells=1000"]
    assert main(["run", *two_bump, "--out-dir", str(tmp_path)]) == 2
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["abort"]["kind"] == "H1"
    assert (tmp_path / "series.csv").exists()


def test_check_subset(tmp_path):
    code = main(["check", "--only", "2", "--only", "12", "--set", "grid.n_cells=400", "--out-dir", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {c["name"].split(":")[0] for c in report["checks"]} == {"2", "12"}
    assert all(set(c) == {"name", "passed", "measured", "tolerance", "details"} for c in report["checks"])


def test_check_zero_amplitude_identities(tmp_path):
    code = main(["check", "--only", "7", "--only", "8", "--only", "10", "--set", "initial.amplitude=0",
                 "--set", "grid.n_cells=400", "--set", "stepping.t_final=2", "--out-dir", str(tmp_path)])
    assert code == 0


def test_sweep(tmp_path):
    code = main(["sweep", "--set", "sweep.n_cells=[400]", "--set", "stepping.t_final=4",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    rows = json.loads((tmp_path / "report.json").read_text())["summary"]
    assert [r["chi"] for r in rows] == [0.3, 0.5, 0.7]
    assert rows[0]["L"] == 27 and rows[1]["L"] == 20
    assert all(r["gamma_hat"] > 0 for r in rows)
    assert all((tmp_path / f"series_{i:03d}.csv").exists() for i in range(3))
