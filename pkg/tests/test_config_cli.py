import json

import numpy as np
import pytest

from dynlab import cli
from dynlab.config import ConfigError, ExperimentConfig, load_config
from dynlab.pipelines import PIPELINES, Plot, StageResult, substream

KAC_TOML = """
seed = 11
[kac]
samples = 2000
"""


@pytest.fixture
def kac_config(tmp_path):
    path = tmp_path / "kac.toml"
    path.write_text(KAC_TOML)
    return path


def test_defaults_validate():
    cfg = ExperimentConfig(seed=0)
    assert cfg.m == 5 and cfg.bumps.c_H == 0.25 and cfg.chart.y0_for(3) == [0.3, 0.6, 0.3]


@pytest.mark.parametrize(
    "data",
    [
        {},
        {"seed": -1},
        {"seed": 2**64},
        {"seed": True},
        {"seed": 0, "m": 4},
        {"seed": 0, "t": 0.0},
        {"seed": 0, "t": 1.0, "step": 0.3},
        {"seed": 0, "chart": {"gamma": 0.2}},
        {"seed": 0, "sigma": {"n_grid": 3}},
        {"seed": 0, "sigma": {"samples": 1002}},
        {"seed": 0, "slice": {"ell": 0}},
        {"seed": 0, "slice": {"ell": "many"}},
        {"seed": 0, "bogus": 1},
        {"seed": 0, "kac": {"bogus": 1}},
        {"seed": 0, "kac": 3},
        {"seed": 0, "samples": {"lyapunov_steps": 10}},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_ell_inf_accepted():
    assert ExperimentConfig.from_dict({"seed": 0, "slice": {"ell": "inf"}}).slice.ell == "inf"


def test_hash_ignores_output_only():
    a = ExperimentConfig(seed=1)
    assert a.hash() == a.with_overrides(output="elsewhere").hash()
    assert a.hash() != a.with_overrides(seed=2).hash()
    assert ExperimentConfig.from_dict(a.to_dict()).to_dict() == a.to_dict()


def test_load_config(kac_config, tmp_path):
    cfg = load_config(kac_config)
    assert cfg.seed == 11 and cfg.kac.samples == 2000
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_substreams_independent_and_stable():
    a, b = substream(5, "kac"), substream(5, "slice")
    assert a != b and a == substream(5, "kac")
    assert substream(6, "kac") != a


def test_jsonable():
    out = cli.jsonable({"a": np.float64(np.inf), "b": np.arange(3), "c": (np.bool_(True), None), 1: np.int64(4)})
    assert out == {"a": "inf", "b": [0, 1, 2], "c": [True, None], "1": 4}
    json.dumps(out, allow_nan=False)


def _run(argv):
    return cli.main([str(a) for a in argv])


def test_cli_kac_writes_artifacts(kac_config, tmp_path, capsys):
    out = tmp_path / "a"
    assert _run(["kac", "--config", kac_config, "--out", out]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] is True and summary["subcommand"] == "kac" and summary["seed"] == 11
    assert set(summary) == {"subcommand", "version", "config_hash", "config", "seed", "reports", "ledger", "pass",
                            "wall_clock"}
    assert all(entry["pass"] for entry in summary["ledger"])
    lines = (out / "samples.csv").read_text().splitlines()
    assert len(lines) >= 2
    assert "kac: PASS" in capsys.readouterr().out


def test_cli_deterministic(kac_config, tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert _run(["kac", "--config", kac_config, "--out", out, "--seed", 3]) == 0
        s = json.loads((out / "summary.json").read_text())
        s.pop("wall_clock")
        s["config"].pop("output")
        runs.append((s, (out / "samples.csv").read_bytes()))
    assert runs[0] == runs[1]
    assert runs[0][0]["seed"] == 3


def _failing(cfg):
    st = StageResult(header=["x"], rows=[[1.0]])
    st.check("always fails", False, 1.0, "< 0")
    st.plots.append(Plot("p", "x", "y", {"line": ([0, 1], [1, 0])}))
    return st


def test_cli_failure_exit_code(kac_config, tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(PIPELINES, "kac", _failing)
    assert _run(["kac", "--config", kac_config, "--out", tmp_path / "f"]) == 1
    assert "FAIL  always fails" in capsys.readouterr().out
    assert json.loads((tmp_path / "f" / "summary.json").read_text())["pass"] is False


def test_svg_deterministic(kac_config, tmp_path, monkeypatch):
    monkeypatch.setitem(PIPELINES, "kac", _failing)
    svgs = []
    for name in ("a", "b"):
        _run(["kac", "--config", kac_config, "--out", tmp_path / name])
        svgs.append((tmp_path / name / "plots" / "p.svg").read_bytes())
    assert svgs[0] == svgs[1]
    _run(["kac", "--config", kac_config, "--out", tmp_path / "c", "--no-plots"])
    assert not (tmp_path / "c" / "plots").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["nope", "--config", "x.toml"],
        ["kac"],
        ["kac", "--config", "/nonexistent.toml"],
        ["kac", "--config", "x.toml", "--seed", "-3"],
    ],
)
def test_cli_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2


def test_cli_bad_config_is_usage_error(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("seed = 1\nm = 3\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["kac", "--config", str(p)])
    assert info.value.code == 2
