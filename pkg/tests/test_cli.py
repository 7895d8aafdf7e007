import json
import math

import pytest
from click.testing import CliRunner

from exitlab.cli import main
from exitlab.config import ConfigError, LabConfig, list_presets, load_config, load_preset
from exitlab.runner import emit_plot_data, run

FAST = """
[profile]
name = "stable"
alpha = 1.0
R0 = "inf"
R = 2.0

[kernel]
d = 1
c0 = 1.1
K0 = 4.2

[simulation]
n_paths = 1000
master_seed = 3

[pipeline]
c1 = 2.0
c2 = 1.1
c3 = {c3}
steps = {steps}

[conditions]
n_paths = 1000
which = ["J2"]
grid_points = 4
oscillation_levels = 2
"""


BASE = {"profile": {"name": "stable", "alpha": 1.0, "R0": "inf", "R": 2.0}}


def write_cfg(tmp_path, c3=11.0, steps='["derive"]', extra=""):
    path = tmp_path / "cfg.toml"
    path.write_text(FAST.format(c3=c3, steps=steps) + extra)
    return path


def test_presets():
    assert "stable-1d" in list_presets()
    cfg = load_preset("stable-1d")
    assert cfg.d == 1 and cfg.r == 1.0 and math.isinf(cfg.profile().R0)
    assert cfg.ledger().k_J2 == 8
    with pytest.raises(ConfigError):
        load_preset("nope")


@pytest.mark.parametrize("section, key, value", [
    ("kernel", "c0", 1.0), ("kernel", "K0", 0.5), ("pipeline", "c1", 1.0),
    ("pipeline", "c3", math.inf), ("pipeline", "c2", -2.0),
])
def test_constants_outside_unit_to_infinity_are_rejected(section, key, value):
    with pytest.raises(ConfigError, match=key):
        LabConfig.from_dict({section: {key: value}})


@pytest.mark.parametrize("raw", [
    {"bogus": {}}, {"kernel": {"nonsense": 1}}, {"pipeline": {"steps": ["fly"]}},
    {"conditions": {"which": ["J9"]}}, {"geometry": {"r": 5.0}, "profile": {"R": 2.0}},
    {"profile": {"name": "table:/does/not/exist.csv", "R0": 1.0, "R": 0.5}},
    {"geometry": {"payoff": "square"}},
])
def test_invalid_configurations(raw):
    with pytest.raises(ConfigError):
        LabConfig.from_dict(raw)


def test_parse_error(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[kernel\nd = 1")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_table_profile_path_is_relative_to_the_config(tmp_path):
    (tmp_path / "l.csv").write_text("u,l\n0.001,1000\n0.1,10\n0.4,2.5\n")
    path = tmp_path / "t.toml"
    path.write_text('[profile]\nname = "table:l.csv"\nR0 = 0.5\nR = 0.25\n[geometry]\nr = 0.2\n')
    assert load_config(path).profile().L(0.01) > 0


def test_overrides():
    cfg = load_preset("stable-1d").with_overrides(seed=5, paths=123)
    assert cfg.seed == 5
    assert cfg.data["simulation"]["n_paths"] == cfg.data["conditions"]["n_paths"] == 123


def test_empty_plan(tmp_path):
    man = run(LabConfig.from_dict(BASE | {"pipeline": {"steps": []}}), tmp_path / "out")
    assert man.exit_code == 0 and man.outputs == {}
    assert (tmp_path / "out" / "manifest.json").is_file()
    res = CliRunner().invoke(main, ["run", "--config", str(write_cfg(tmp_path, steps="[]")),
                                    "--out", str(tmp_path / "o2"), "--quiet"])
    assert res.exit_code == 0 and res.output == ""


def test_plan_order_is_enforced(tmp_path):
    with pytest.raises(ConfigError):
        run(LabConfig.from_dict(BASE), tmp_path, steps=["holder", "derive"])
    with pytest.raises(ConfigError):
        run(LabConfig.from_dict(BASE), tmp_path, steps=["derive", "derive"])


def test_derive_command(tmp_path):
    res = CliRunner().invoke(main, ["derive", "--preset", "stable-1d", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert "[stage 3]" in res.output and "k_J2" in res.output
    ledger = json.loads((tmp_path / "ledger.json").read_text())
    assert ledger["k_J2"] == 8 and ledger["C4"] == 14.0


def test_check_l_verdicts_set_the_exit_code(tmp_path):
    ok = CliRunner().invoke(main, ["check-l", "--config", str(write_cfg(tmp_path)),
                                   "--out", str(tmp_path / "a")])
    assert ok.exit_code == 0 and "verdict L3: pass" in ok.output
    bad = CliRunner().invoke(main, ["check-l", "--config", str(write_cfg(tmp_path, c3=5.0)),
                                    "--out", str(tmp_path / "b")])
    assert bad.exit_code == 1 and "check-L:L3" in bad.output
    data = json.loads((tmp_path / "b" / "check_l.json").read_text())
    assert data["witness"]["verdict_L3"] is False and data["K0"]["value"] == pytest.approx(4.0)


def test_config_errors_exit_nonzero(tmp_path):
    path = write_cfg(tmp_path, c3=1.0)
    res = CliRunner().invoke(main, ["derive", "--config", str(path)])
    assert res.exit_code != 0 and "c3" in res.output


@pytest.mark.slow
def test_simulate_exit_measure_and_conditions_commands(tmp_path):
    cfg = str(write_cfg(tmp_path))
    runner = CliRunner()
    res = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path / "s"), "--quiet"])
    assert res.exit_code == 0
    rows = (tmp_path / "s" / "samples.csv").read_text().splitlines()
    assert len(rows) == 1001
    res = runner.invoke(main, ["exit-measure", "--config", cfg, "--out", str(tmp_path / "e"),
                               "--seed", "4", "--quiet"])
    assert res.exit_code == 0
    assert json.loads((tmp_path / "e" / "exit_measure.json").read_text())["total_mass"] == 1.0
    res = runner.invoke(main, ["conditions", "--config", cfg, "--conditions", "J0,J2",
                               "--out", str(tmp_path / "c"), "--paths", "1000"])
    assert res.exit_code == 0, res.output
    reports = json.loads((tmp_path / "c" / "conditions.json").read_text())["reports"]
    assert [r["condition"] for r in reports] == ["J0", "J2"]
    res = runner.invoke(main, ["plot-data", str(tmp_path / "c"), "--kind", "J2"])
    assert res.exit_code == 0
    decay = (tmp_path / "c" / "j2_decay.dat").read_text().splitlines()
    assert decay[0] == "# n m_n C0_a0^n" and len(decay) == 4
    assert len(decay[1].split()) == 3


@pytest.mark.slow
def test_holder_and_oscillation_commands_with_plot_data(tmp_path):
    cfg = str(write_cfg(tmp_path))
    runner = CliRunner()
    out = tmp_path / "h"
    assert runner.invoke(main, ["holder", "--config", cfg, "--out", str(out), "--quiet"]).exit_code == 0
    assert runner.invoke(main, ["oscillation", "--config", cfg, "--out", str(out),
                                "--quiet"]).exit_code == 0
    header = (out / "holder.csv").read_text().splitlines()[0]
    assert header == "rho,rho0,h,h0,dh,se,bound,within_bound"
    files = emit_plot_data(out, "holder") + emit_plot_data(out, "oscillation", tmp_path / "plots")
    assert [f.name for f in files] == ["holder_scatter.dat", "holder_line.dat", "oscillation.dat"]
    osc = (tmp_path / "plots" / "oscillation.dat").read_text().splitlines()
    assert osc[0] == "# n osc_n s_n" and len(osc) == 4


def test_plot_data_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(tmp_path, "histogram")
    with pytest.raises(FileNotFoundError):
        emit_plot_data(tmp_path, "oscillation")
    res = CliRunner().invoke(main, ["plot-data", str(tmp_path), "--kind", "histogram"])
    assert res.exit_code == 2
    res = CliRunner().invoke(main, ["plot-data", str(tmp_path), "--kind", "J2"])
    assert res.exit_code == 1 and "not found" in res.output
