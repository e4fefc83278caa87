import json

import numpy as np
import pytest

from mfda.cli import main
from mfda.config import ConfigError, load_preset, loads_config, preset_names
from mfda.experiment import CSV_COLUMNS, point_seed


def test_minimal_config_defaults():
    cfg = loads_config("")
    sc = cfg.scenario
    assert sc.p_max == pytest.approx(10.0)
    assert sc.sigma2_b == pytest.approx(1e-10) and sc.sigma2_e == pytest.approx(1e-10)
    assert (sc.r_b, sc.r_e) == (1000.0, 1000.0)
    assert np.rad2deg(sc.theta_b) == pytest.approx(30) and np.rad2deg(sc.theta_e) == pytest.approx(35)
    tpl = cfg.array.template()
    assert tpl.f_c == 10e9 and tpl.delta_f == 1e9
    assert tpl.d0 == pytest.approx(tpl.wavelength / 2)
    assert tpl.d_max == pytest.approx(30 * tpl.wavelength)
    assert cfg.sweeps == () and cfg.schemes == ("PA", "FDA", "MFDA")


def test_unknown_key_names_path():
    with pytest.raises(ConfigError, match=r"unknown key 'scenario\.pmax'"):
        loads_config("[scenario]\npmax = 10\n")
    with pytest.raises(ConfigError, match=r"unknown key 'bogus'"):
        loads_config("bogus = 1\n")


def test_parse_error_reports_position():
    with pytest.raises(ConfigError, match=r"line 2, column"):
        loads_config("[array]\nM = = 3\n")


def test_x_must_start_at_origin():
    with pytest.raises(ConfigError, match=r"x\[0\] == 0"):
        loads_config("[array]\nM = 2\nx_m = [0.01, 0.05]\n")


def test_uncertainty_block():
    cfg = loads_config('csi = "imperfect"\n[uncertainty]\ndelta_theta_deg = 3\nZ = 13\n')
    assert cfg.uncertainty.Z == 13 and cfg.uncertainty.delta_theta_deg == 3.0
    with pytest.raises(ConfigError, match="imperfect"):
        loads_config('[[sweep]]\naxis = "delta_theta_deg"\nvalues = [1]\n')


def test_exclusive_and_typed_keys():
    with pytest.raises(ConfigError, match="at most one"):
        loads_config("[array]\ndelta_f_hz = 1e9\ndelta_f_ratio = 0.1\n")
    with pytest.raises(ConfigError, match="integer"):
        loads_config("[array]\nM = 2.5\n")
    with pytest.raises(ConfigError, match="timing"):
        loads_config('[[sweep]]\naxis = "brf_hz"\nvalues = [1e3]\n')
    with pytest.raises(ConfigError, match="positive integer"):
        loads_config("[timing]\nT_s = 1e-3\nbrf_hz = 2500\n")


def test_presets_load():
    names = preset_names()
    assert names == [f"fig{i}" for i in range(2, 9)]
    for n in names:
        load_preset(n)
    fig3 = load_preset("fig3")
    assert fig3.sweeps[0].values == tuple(float(m) for m in range(4, 25, 2))
    fig6 = load_preset("fig6")
    assert fig6.array.M == 20 and fig6.timing.crf_hz == 1e6


def test_point_seeds_distinct():
    seeds = {point_seed(0, 0, i) for i in range(100)}
    assert len(seeds) == 100
    assert point_seed(1, 0, 0) == point_seed(1, 0, 0)


SMALL = """
name = "small"
seed = 11
[array]
M = 4
[[sweep]]
name = "angle"
axis = "theta_e_deg"
values = [32, 35]
"""


def test_cli_run_and_determinism(tmp_path, capsys):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL)
    assert main(["validate", str(cfg)]) == 0
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "b")]) == 0
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "c"), "--threads", "2"]) == 0
    a = (tmp_path / "a" / "angle.csv").read_bytes()
    assert a == (tmp_path / "b" / "angle.csv").read_bytes() == (tmp_path / "c" / "angle.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 3
    assert b"\r" not in a
    for line in lines[1:]:
        row = dict(zip(CSV_COLUMNS, line.split(",")))
        assert row["status"] == "ok"
        assert float(row["capacity_bits"]) <= float(row["upper_bound_bits"])
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 11 and len(manifest["config_sha256"]) == 64


def test_cli_single_point_and_overrides(tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text("[array]\nM = 3\n")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o"), "--seed", "5", "--csi", "imperfect"]) == 0
    lines = (tmp_path / "o" / "single.csv").read_text().splitlines()
    assert len(lines) == 4
    assert all(line.startswith(",") for line in lines[1:])
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["seed"] == 5


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[array]\nM = 0\n")
    assert main(["validate", str(cfg)]) == 2
    assert "positive" in capsys.readouterr().err
    assert main(["preset", "nope"]) == 2


def test_cli_convergence_preset(tmp_path):
    assert main(["preset", "fig2", "--output-dir", str(tmp_path)]) == 0
    trace = (tmp_path / "fig2_trace.csv").read_text().splitlines()
    assert trace[0] == "start,block,iteration,objective,capacity_bits"
    assert len((tmp_path / "fig2.csv").read_text().splitlines()) == 11
