import csv
import json

import pytest

from rrqss.cli import COLUMNS, main
from rrqss.config import ConfigError, RunConfig, load_config

SMALL = {
    "sweep": {"start": 0, "stop": 100, "step": 50},
    "search": {"mu_points": 21, "L_values": [64, 256], "nu_th_values": [2, 8, 16]},
}


@pytest.fixture
def config_file(tmp_path):
    def write(extra=None):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({**SMALL, **(extra or {})}))
        return str(path)
    return write


def read_csv(path):
    lines = path.read_text().splitlines()
    rows = [ln for ln in lines if not ln.startswith("#")]
    return list(csv.DictReader(rows))


def test_defaults_match_hardware_table():
    cfg = RunConfig()
    assert (cfg.system.eta_d, cfg.system.p_d, cfg.system.e_d, cfg.system.alpha, cfg.system.f) == (
        0.56, 1e-8, 0.02, 0.167, 1.1)
    assert list(cfg.distances[:3]) == [0, 10, 20] and cfg.distances[-1] == 700


def test_sweep_writes_one_row_per_distance_objective(tmp_path, config_file):
    out = tmp_path / "o"
    assert main(["sweep", "--config", config_file(), "--out", str(out)]) == 0
    text = (out / "sweep.csv").read_text()
    assert text.startswith("# generated ")
    rows = read_csv(out / "sweep.csv")
    assert list(rows[0]) == COLUMNS
    assert len(rows) == 3 * 3
    assert [r["objective"] for r in rows[:3]] == ["inside", "outside", "plob"]
    for r in rows:
        assert float(r["rate"]) >= 0


def test_reruns_are_byte_identical(tmp_path, config_file):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = config_file()
    main(["sweep", "--config", cfg, "--out", str(a), "--no-timestamp"])
    main(["sweep", "--config", cfg, "--out", str(b), "--no-timestamp", "--workers", "2"])
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()


def test_no_positive_rate_rows_are_kept(tmp_path, config_file):
    out = tmp_path / "o"
    cfg = config_file({"sweep": {"start": 880, "stop": 900, "step": 20}})
    main(["sweep", "--config", cfg, "--out", str(out), "--objective", "inside"])
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 2
    assert all(r["status"] == "no_positive_rate" and r["rate"] == "0.0" and r["clamped"] == "1"
               for r in rows)


def test_flags_override_file(tmp_path, config_file):
    out = tmp_path / "o"
    cfg = config_file({"system": {"e_d": 0.05}, "output": {"format": "csv"}})
    main(["sweep", "--config", cfg, "--ed", "0.03", "--format", "json", "--out", str(out),
          "--objective", "plob"])
    doc = json.loads((out / "sweep.json").read_text())
    assert doc["columns"] == COLUMNS
    assert {r["e_d"] for r in doc["records"]} == {0.03}


def test_finite_objective_via_flags(tmp_path, config_file):
    out = tmp_path / "o"
    rc = main(["sweep", "--config", config_file(), "--objective", "inside_finite", "--N", "1e4",
               "--s", "100", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "sweep.csv")
    assert {r["N"] for r in rows} == {"10000.0"} and all(r["r1"] for r in rows)


@pytest.mark.parametrize("raw,msg", [
    ({"objectives": []}, "at least one objective"),
    ({"objectives": ["inside_finite"]}, "finite"),
    ({"system": {"eta_d": 2}}, "eta_d"),
    ({"bogus": 1}, "unknown top-level"),
    ({"sweep": {"step": 0}}, "step"),
])
def test_config_rejections(tmp_path, raw, msg):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match=msg):
        load_config(str(path))


def test_malformed_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["sweep", "--config", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_optimize_single_distance(tmp_path, config_file, capsys):
    out = tmp_path / "o"
    assert main(["optimize", "--config", config_file(), "--distance", "300", "--out", str(out),
                 "--no-timestamp"]) == 0
    rows = read_csv(out / "optimize.csv")
    assert [r["objective"] for r in rows] == ["inside", "plob"]
    assert rows[0]["distance_km"] == "300.0"


def test_simulate_with_trace(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--distance", "50", "--mu", "0.5", "--L", "16", "--trains", "500",
                 "--seed", "4", "--trace", "--out", str(out)]) == 0
    report = json.loads((out / "simulate.json").read_text())
    assert report["stats"]["trains"] == 500
    assert len((out / "trace.jsonl").read_text().splitlines()) == 500


def test_check_only_equivalence(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["check", "--trains", "0", "--trials", "3", "--out", str(out)]) == 0
    report = json.loads((out / "check.json").read_text())
    assert [c["name"] for c in report["checks"]] == ["equivalence[L=4]", "equivalence[L=8]"]


def test_check_default_passes_and_corruption_fails(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["check", "--trials", "3", "--out", str(out)]) == 0
    assert main(["check", "--trials", "3", "--corrupt-ed", "0.10", "--out", str(out)]) == 1
    printed = capsys.readouterr().out
    assert "FAIL  monte_carlo[D=50,mu=0.2,L=64]" in printed


@pytest.mark.parametrize("fig,objectives", [
    ("3", {"inside", "outside", "plob"}),
    ("4", {"inside", "plob"}),
    ("5", {"inside", "inside_finite"}),
])
def test_plot_data_presets(tmp_path, config_file, fig, objectives):
    out = tmp_path / "o"
    assert main(["plot-data", "--figure", fig, "--config", config_file(), "--out", str(out)]) == 0
    rows = read_csv(out / f"fig{fig}.csv")
    assert {r["objective"] for r in rows} == objectives
    if fig == "4":
        assert {r["e_d"] for r in rows} == {"0.02", "0.04", "0.06", "0.08"}
    if fig == "5":
        assert {r["N"] for r in rows if r["objective"] == "inside_finite"} == {"1000.0", "10000.0"}
        assert {r["tagging"] for r in rows if r["objective"] == "inside"} == {"separate"}
