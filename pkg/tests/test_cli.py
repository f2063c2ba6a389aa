import json

import pytest

from pilotwave import cli, config
from pilotwave.errors import ConfigError
from pilotwave.io import read_snapshot
from pilotwave.scenarios import REGISTRY

SHORT_HO = """scenario = "ho-superposition"
seed = 3

[run]
t1 = 0.5
trajectories = 3
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list(capsys):
    assert cli.main(["--list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 12
    assert {ln.split()[0] for ln in lines} == set(REGISTRY)


def test_list_json(capsys):
    assert cli.main(["--list", "--json"]) == 0
    items = json.loads(capsys.readouterr().out)
    assert [i["name"] for i in items] == list(REGISTRY)
    assert all(i["description"] for i in items)


def test_every_scenario_resolves_with_defaults():
    for name in REGISTRY:
        cfg = config.resolve({}, None, "<x>", {"scenario": name})
        assert cfg["scenario"] == name and cfg["seed"] == 0 and cfg["format"] == "csv"


def test_run_writes_artifacts_and_manifest(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["--config", write(tmp_path, SHORT_HO), "--out", str(out), "--gnuplot-script"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert {"report.json", "config.json", "manifest.json", "trajectories.csv", "psi_final.csv",
            "plot.gp"} <= set(names)
    man = json.loads((out / "manifest.json").read_text())
    assert set(man) >= {"build", "scenario", "config", "tolerances", "wall_clock_seconds",
                        "artifacts", "pass", "versions"}
    assert man["config"]["seed"] == 3 and man["config"]["params"]["run"]["t1"] == 0.5
    assert man["pass"] is True
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".pwl-")]


def test_runs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, SHORT_HO)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["--config", cfg, "--out", str(b)]) == 0
    for name in ("report.json", "trajectories.csv", "psi_final.csv", "config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["--config", write(tmp_path, SHORT_HO), "--out", str(out), "--seed", "11"]) == 0
    assert json.loads((out / "config.json").read_text())["seed"] == 11


@pytest.mark.parametrize("fmt,artifact", [("json", "psi_final.json"), ("snapshot", "psi_final.pwl")])
def test_formats(tmp_path, fmt, artifact):
    out = tmp_path / fmt
    assert cli.main(["--config", write(tmp_path, SHORT_HO), "--out", str(out), "--format", fmt]) == 0
    assert (out / artifact).exists()
    if fmt == "snapshot":
        assert abs(read_snapshot(out / artifact).time - 0.5) < 1e-12
    else:
        assert len(json.loads((out / artifact).read_text())["re"]) == 256


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("PWL_OUT_DIR", str(tmp_path / "root"))
    assert cli.main(["--config", write(tmp_path, SHORT_HO)]) == 0
    assert (tmp_path / "root" / "ho-superposition" / "report.json").exists()


def test_unknown_key_reports_location(tmp_path, capsys):
    text = SHORT_HO + "stride = 5\nbogus = 1\n"
    out = tmp_path / "o"
    assert cli.main(["--config", write(tmp_path, text), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "run.toml:8:1" in err and "bogus" in err
    assert not out.exists()


def test_toml_syntax_error_location(tmp_path):
    with pytest.raises(ConfigError, match=r"run\.toml:2:"):
        config.load(write(tmp_path, 'scenario = "ho-ground"\nseed = = 3\n'))


def test_type_mismatch(tmp_path):
    with pytest.raises(ConfigError, match=r":5:1: run\.t1 must be a number"):
        config.load(write(tmp_path, 'scenario = "ho-ground"\n\n[run]\ndt = 0.01\nt1 = "long"\n'))


def test_array_length_and_inline_location():
    text = 'scenario = "frw-wkb"\n[model]\ngrid = { alpha = [0.0, 1.0], phi = [-1.0, 1.0, 8] }\n'
    with pytest.raises(ConfigError, match=r"<config>:3:10: model\.grid\.alpha must be an array of 3"):
        config.loads(text)


def test_matter_parameters_checked():
    text = ('scenario = "semiclassical-matter"\n[model.matter_potential]\nkind = "harmonic"\n'
            'params = { mass = 1.0, width = 2.0 }\n')
    with pytest.raises(ConfigError, match="width"):
        config.loads(text)


@pytest.mark.parametrize("text", ['scenario = "nope"\n', 'scenario = "ho-ground"\nseed = -1\n',
                                  'scenario = "ho-ground"\nformat = "xml"\n',
                                  'scenario = "ho-ground"\nthreads = 0\n'])
def test_invalid_top_level(text):
    with pytest.raises(ConfigError):
        config.loads(text)


def test_missing_scenario_exit_code(tmp_path):
    assert cli.main(["--out", str(tmp_path / "o")]) == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = 'scenario = "cwf-measurement"\n[measurement]\ncoupling = 1.0\n'
    out = tmp_path / "o"
    assert cli.main(["--config", write(tmp_path, text), "--out", str(out)]) == 2
    assert "InsufficientSeparation" in capsys.readouterr().err
    assert not out.exists() or not any(out.iterdir())


def test_large_kappa_reports_validity_violation(tmp_path):
    text = 'scenario = "semiclassical-matter"\n[model]\nkappa_eff = 0.5\n'
    out = tmp_path / "o"
    assert cli.main(["--config", write(tmp_path, text), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["validity_violation"] is True and rep["pass"] is False


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "pilotwave", "--list"], capture_output=True, text=True,
                         timeout=120)
    assert out.returncode == 0 and "frw-wkb" in out.stdout
