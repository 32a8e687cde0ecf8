import csv
import math

import numpy as np
import pytest

from cnwfb.cli import main, parse_config
from cnwfb.config import ConfigError, RunConfig, build_config, config_fields, read_config_file
from cnwfb.driver import (
    SUMMARY_COLUMNS,
    SWEEP_COLUMNS,
    n_steps_for,
    simulate,
    sweep,
    sweep_cells,
    write_outputs,
)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------ config


def test_file_mapping(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nscheme = cn\nh = 1e-4   # trailing\n\nscenario = standing-wave-1d\n")
    cfg = build_config(read_config_file(p))
    assert cfg.scheme == "cn" and cfg.h == 1e-4


def test_scenario_defaults():
    cfg = build_config({"scenario": "string-obstacle"})
    assert cfg.h == 1e-4 and cfg.cutoff is True and cfg.T == 1.0
    assert build_config({"scenario": "standing-wave-2d"}).nx == 53


@pytest.mark.parametrize(
    "values,key",
    [
        ({"h": "-1"}, "h"),
        ({"h": "abc"}, "h"),
        ({"nx": "2.5"}, "nx"),
        ({"bogus": "1"}, "bogus"),
        ({"cutoff": "maybe"}, "cutoff"),
        ({"sweep_h": ""}, "sweep_h"),
        ({"sweep_h": "1e-3,x"}, "sweep_h"),
        ({"scheme": "rk4"}, "scheme"),
        ({"scenario": "nope"}, "scenario"),
        ({"T": "0"}, "T"),
        ({"sweep_n": "1,2", "scenario": "string-obstacle"}, "sweep_n"),
        ({"fb_eps": "-1"}, "fb_eps"),
    ],
)
def test_errors_name_the_key(values, key):
    with pytest.raises(ConfigError, match=f"^{key}"):
        build_config(values)


def test_malformed_file_line(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("h 1e-3\n")
    with pytest.raises(ConfigError, match="line 1"):
        read_config_file(p)


def test_flags_override_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("h = 1e-2\nT = 0.5\nscheme = dmf\n")
    cfg, _ = parse_config(["--config", str(p), "--h", "2e-2", "--cutoff", "on"])
    assert cfg.h == 2e-2 and cfg.T == 0.5 and cfg.scheme == "dmf" and cfg.cutoff


def test_out_env_fallback(monkeypatch):
    monkeypatch.setenv("CNWFB_OUT", "/tmp/elsewhere")
    assert build_config({}).out == "/tmp/elsewhere"
    assert build_config({"out": "here"}).out == "here"


def test_defaults_complete():
    assert set(config_fields()) == {f for f in RunConfig.__dataclass_fields__ if f != "explicit"}
    cfg = build_config({"h": "0.01"})
    assert cfg.mesh_dx == 0.01
    assert build_config({"h": "0.01", "dx": "0.05"}).mesh_dx == 0.05


def test_step_count():
    assert n_steps_for(1.0, 1e-3) == 1000
    assert n_steps_for(0.5, 0.0255) == 19
    assert n_steps_for(1.0, 1e-4) == 10000


# ------------------------------------------------------------------- runs


def test_run_writes_documented_files(tmp_path):
    out = tmp_path / "wave"
    assert main(["--scenario", "standing-wave-1d", "--h", "0.02", "--T", "0.2", "--out", str(out), "--dump-mesh"]) == 0
    energy = read_csv(out / "energy.csv")
    assert list(energy[0]) == ["m", "t", "kinetic_ek", "potential_ek", "total_ek", "total_numeric"]
    assert [int(r["m"]) for r in energy] == list(range(1, 11))
    totals = np.array([float(r["total_ek"]) for r in energy])
    assert np.max(np.abs(totals / totals[0] - 1)) <= 1e-8
    snaps = read_csv(out / "snapshots.csv")
    assert list(snaps[0]) == ["m", "t", "node", "x", "u"]
    assert {int(r["m"]) for r in snaps} >= {0, 10}
    assert list(read_csv(out / "summary.csv")[0]) == SUMMARY_COLUMNS
    assert (out / "free_boundary.csv").read_text().startswith("m,t,node,x\n")
    assert (out / "mesh.txt").exists()
    raw = (out / "energy.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_dmf_energy_non_increasing(tmp_path):
    out = tmp_path / "dmf"
    assert main(["--scheme", "dmf", "--h", "0.01", "--n", "2", "--out", str(out)]) == 0
    totals = np.array([float(r["total_ek"]) for r in read_csv(out / "energy.csv")])
    assert np.all(np.diff(totals) <= 1e-10 * totals[:-1])


def test_runs_are_bit_identical(tmp_path):
    args = ["--scenario", "string-obstacle", "--h", "0.01", "--T", "1", "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    for name in ("energy.csv", "snapshots.csv", "free_boundary.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_string_contact_band(tmp_path):
    out = tmp_path / "string"
    assert main(["--scenario", "string-obstacle", "--h", "0.002", "--out", str(out)]) == 0
    summary = read_csv(out / "summary.csv")[0]
    t0, t1 = float(summary["first_contact_t"]), float(summary["detachment_t"])
    assert 0 < t0 < t1 < 1
    times = {float(r["t"]) for r in read_csv(out / "free_boundary.csv")}
    assert times and min(times) == t0 and max(times) == t1


def test_2d_snapshot_columns(tmp_path):
    out = tmp_path / "w2"
    assert main(["--scenario", "standing-wave-2d", "--nx", "4", "--ny", "4", "--h", "0.05", "--T", "0.1", "--out", str(out)]) == 0
    assert list(read_csv(out / "snapshots.csv")[0]) == ["m", "t", "node", "x", "y", "u"]


def test_droplet_run_outputs(tmp_path):
    cfg = build_config({"scenario": "droplets", "nx": "16", "ny": "16", "T": "0.05", "out": str(tmp_path)})
    res = simulate(cfg)
    write_outputs(res, tmp_path)
    rows = read_csv(tmp_path / "droplets.csv")
    assert list(rows[0]) == ["m", "t", "id", "volume", "measured_volume"]
    for r in rows:
        assert float(r["measured_volume"]) == pytest.approx(float(r["volume"]), abs=1e-12)


def test_sweep_writes_cells_and_summary(tmp_path):
    cfg = build_config(
        {"sweep_h": "0.02,0.01", "sweep_n": "1,2", "sweep_scheme": "cn,dmf", "T": "0.2", "out": str(tmp_path), "jobs": "2"}
    )
    status, rows = sweep(cfg)
    assert status == 0 and len(rows) == 8
    assert len(sweep_cells(cfg)) == 8
    table = read_csv(tmp_path / "sweep_summary.csv")
    assert list(table[0]) == SWEEP_COLUMNS
    for r in table:
        assert (tmp_path / f"{r['scheme']}_h{r['h']}_n{r['n']}" / "energy.csv").exists()
        assert float(r["dx"]) == float(r["h"])
        if r["scheme"] == "cn":
            assert abs(float(r["energy_ratio"]) - 1) <= 1e-6


def test_sweep_records_failed_cells(tmp_path):
    # a cap of one CG iteration at a tight tolerance fails every cell
    cfg = build_config(
        {"sweep_h": "0.02,0.01", "T": "0.1", "out": str(tmp_path), "max_iters": "1", "linear_tol": "1e-15"}
    )
    status, rows = sweep(cfg)
    assert status == 1
    table = read_csv(tmp_path / "sweep_summary.csv")
    assert len(table) == 2
    assert all(r["status"] == "failed" and "conjugate gradients" in r["error"] for r in table)
    assert all(math.isnan(float(r["energy_ratio"] or "nan")) for r in table)


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["--h", "-1", "--out", str(tmp_path)]) == 2
    assert "h:" in capsys.readouterr().err
    assert main(["--h", "0.1", "--max-iters", "1", "--linear-tol", "1e-15", "--out", str(tmp_path)]) == 1
    assert "conjugate gradients" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["--scheme", "rk4"])
