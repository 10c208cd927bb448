import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from fragasym import cli
from fragasym import io as fio


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def specs(tmp_path):
    return {
        "hom": write(tmp_path / "hom.json", {"form": "homogeneous"}),
        "mito": write(tmp_path / "mito.json", {"form": "mitosis"}),
        "atoms": write(tmp_path / "atoms.json", {"form": "atoms", "atoms": [[0.5, 1.0], [0.25, 2.0]]}),
        "lg": write(tmp_path / "lg.json", {"form": "log_gaussian", "params": {"y0": -5.0}}),
        "tsp": write(tmp_path / "tsp.json", {"form": "two_sided_power", "params": {"p0": 0.0, "q0": 3.0}}),
    }


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_kernel_check(specs, capsys):
    code, out, _ = run(["kernel", "check", specs["hom"]], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["passed"] and d["K(2)"] == pytest.approx(1.0, abs=1e-15)


def test_kernel_condition_h(specs, capsys):
    code, out, _ = run(["kernel", "condition-h", specs["atoms"]], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["satisfied"] and d["exponents"] == [1, 2]


def test_regions_output(specs, tmp_path, capsys):
    code, _, _ = run(["regions", "--kernel", specs["hom"], "--datum", specs["tsp"], "--c", "1.0",
                      "--out", str(tmp_path / "r")], capsys)
    assert code == 0
    d = json.loads((tmp_path / "r" / "regions.json").read_text())
    assert d["region"]["p_bar"] == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    assert d["region"]["s_bar_q0"] == pytest.approx(math.sqrt(12), abs=1e-12)
    assert d["critical_curve"] is None
    assert d["growth_fragmentation"]["label"] == "mixed"
    rows = list(csv.DictReader((tmp_path / "r" / "exponent_curves.csv").open()))
    assert len(rows) == 401 and set(rows[0]) == {"s", "F", "G_3"}


def test_asymptote_regimes(specs, capsys):
    code, out, _ = run(["asymptote", "--kernel", specs["hom"], "--datum", specs["tsp"], "--t", "10",
                        "--x", "2,0.01"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[0]["regime"] == "T1_large_x"
    assert float(rows[0]["value"]) == pytest.approx(0.125 * math.exp(-10 / 3), rel=1e-14)
    assert rows[1]["regime"] == "T3a_bulk"


def test_solve_mellin_json(specs, capsys):
    code, out, _ = run(["solve-mellin", "--kernel", specs["hom"], "--datum", specs["lg"], "--t", "0",
                        "--x", str(math.exp(-5)), "--format", "json"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec[0]["u"] == pytest.approx(1.0, rel=1e-9)


def test_compare_agreement(specs, tmp_path, capsys):
    out = tmp_path / "cmp"
    code, _, _ = run(["compare", "--kernel", specs["mito"], "--datum", specs["lg"], "--t", "1", "--nx", "33",
                      "--out", str(out)], capsys)
    assert code == 0
    summary = json.loads((out / "compare_summary.json").read_text())["1.0"]
    assert summary["max_dev_grid_picard"] <= 1e-3
    assert summary["max_dev_grid_mellin"] <= 1e-3
    assert summary["max_dev_picard_mellin"] <= 1e-3
    rows = list(csv.DictReader((out / "compare.csv").open()))
    assert len(rows) == 33


def test_simulate_with_plot(specs, tmp_path, capsys):
    out = tmp_path / "sim"
    code, _, _ = run(["simulate", "--kernel", specs["mito"], "--datum", specs["lg"], "--ymin", "-30",
                      "--tend", "4", "--plot", "--out", str(out)], capsys)
    assert code == 0
    assert (out / "simulate.png").stat().st_size > 0
    with (out / "snapshots.csv").open() as fh:
        assert fh.readline().strip() == "t,y,n"
    mass = list(csv.DictReader((out / "mass.csv").open()))
    assert abs(float(mass[-1]["mass"]) / float(mass[0]["mass"]) - 1) <= 1e-10
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["dirac"]["flags"]["dissipation_nonpositive"]


def test_profiles_and_growth_frag(specs, tmp_path, capsys):
    out = tmp_path / "p"
    code, _, _ = run(["profiles", "--kernel", specs["mito"], "--datum", specs["lg"], "--t", "20",
                      "--evaluator", "grid", "--ymin", "-40", "--out", str(out)], capsys)
    assert code == 0
    mom = json.loads((out / "profile_moments.json").read_text())
    assert mom["computed"][0]["mean_r"] == pytest.approx(mom["exact"]["20.0"]["mean_r"], abs=1e-5)
    code, stdout, _ = run(["growth-frag", "--kernel", specs["hom"], "--datum", specs["lg"], "--t", "0,1",
                           "--x", "0.01", "--c", "0.5"], capsys)
    assert code == 0
    assert "# === growth_frag.csv ===" in stdout and "zone_to_zero" not in stdout.split("classification")[0]


def test_config_file_and_flag_override(specs, tmp_path, capsys):
    cfg = {"kernel": {"form": "mitosis"}, "datum": {"form": "log_gaussian", "params": {"y0": -5.0}},
           "t": [1.0], "x": [0.001]}
    path = write(tmp_path / "cfg.json", cfg)
    code, a, _ = run(["solve-mellin", path], capsys)
    code2, b, _ = run(["solve-mellin", path, "--x", "0.002"], capsys)
    assert code == code2 == 0
    assert "0.001" in a and "0.002" in b


@pytest.mark.parametrize("argv", [
    ["regions", "--kernel", "missing.json"],
    ["simulate", "--bogus"],
    ["solve-mellin", "--t", "a,b"],
    ["simulate", "--plot"],
    ["simulate", "--dt", "1.0"],
    ["growth-frag"],
])
def test_invalid_input_exit_one(argv, tmp_path, capsys):
    argv = [a if a != "missing.json" else str(tmp_path / a) for a in argv]
    code, out, err = run(argv, capsys)
    assert code == 1
    assert out == ""
    assert err


def test_inadmissible_kernel_exit_one(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", {"form": "atoms", "atoms": [[1.0, 1.0]]})
    code, out, _ = run(["regions", "--kernel", bad], capsys)
    assert code == 1 and out == ""


def test_numerical_failure_exit_two(tmp_path, capsys):
    z = np.linspace(0.01, 1, 100)
    v = np.full_like(z, 2.0)
    v[0] = 0.0
    spec = write(tmp_path / "tab.json", {"form": "tabulated", "grid": {"z": z.tolist(), "values": v.tolist()}})
    code, out, err = run(["kernel", "check", spec], capsys)
    assert code == 2
    assert "numerical" in err


def test_no_artifacts_on_failure(specs, tmp_path, capsys):
    out = tmp_path / "never"
    code, _, _ = run(["simulate", "--kernel", specs["mito"], "--datum", specs["lg"], "--dt", "1",
                      "--out", str(out)], capsys)
    assert code == 1
    assert not out.exists()


def test_deterministic_and_thread_independent(specs, tmp_path):
    argv = [sys.executable, "-m", "fragasym", "solve-mellin", "--kernel", specs["mito"], "--datum", specs["lg"],
            "--t", "1,3", "--x", "geom:1e-4:1:6"]
    outs = []
    for threads in ("1", "1", "4"):
        env = {**os.environ, "FRAGASYM_THREADS": threads}
        res = subprocess.run(argv, capture_output=True, env=env, check=True)
        outs.append(res.stdout)
    assert outs[0] == outs[1] == outs[2]
    assert len(outs[0].decode().strip().splitlines()) == 13


def test_console_script_exit_codes(specs):
    ok = subprocess.run(["fragasym", "kernel", "check", specs["mito"]], capture_output=True)
    assert ok.returncode == 0
    bad = subprocess.run(["fragasym", "nonsense"], capture_output=True)
    assert bad.returncode == 1


# -- io helpers -------------------------------------------------------------------------


def test_config_round_trip():
    cfg = fio.ExperimentConfig(t=[1.0, 2.0], x=[0.1], c=0.5, grid={"dy": 0.05})
    again = fio.ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    with pytest.raises(Exception):
        fio.ExperimentConfig.from_dict({"nonsense": 1})


def test_spec_parsers():
    k = fio.kernel_from_spec({"form": "power", "params": {"a": 1.0}})
    assert float(k.K(1.0)) == pytest.approx(1.5)
    d = fio.datum_from_spec({"form": "two_sided_power", "params": {"p0": 0.0, "q0": 3.0},
                             "tails": {"upper": {"a0": 1.0, "q0": 3.0, "r": 7.0}}})
    assert d.upper_tail.r == 7.0
    with pytest.raises(Exception):
        fio.kernel_from_spec({"form": "weird"})


def test_writers_are_exact():
    text = fio.csv_text(["a", "b"], [[0.1, True], [1 / 3, None]])
    assert text == "a,b\n0.1,true\n0.3333333333333333,\n"
    assert json.loads(fio.json_text({"x": math.inf, "y": np.float64(2.5)})) == {"x": "inf", "y": 2.5}
