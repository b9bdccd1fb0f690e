import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cvmdi import experiments as ex
from cvmdi.cli import main
from cvmdi.config import load_config, parse_config


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj, indent=1))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


EW_SWEEP = {
    "protocol": "ew",
    "r": 0.2,
    "eta": 0.8,
    "n_alphabet": 300,
    "n_copies": 50,
    "seed": 5,
    "sweep": [{"param": "sigma", "min": 0.5, "max": 3.0, "steps": 6}],
}


def test_run_writes_all_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, EW_SWEEP), "--out", str(out)]) == 0
    for name in ("results.csv", "summary.json", "plot.gp"):
        assert (out / name).exists()
    header, rows = read_csv(out / "results.csv")
    assert header == ex.run_columns("ew")
    assert len(rows) == 6
    assert all(len(r) == len(header) for r in rows)
    col = {h: i for i, h in enumerate(header)}
    values = np.array([float(r[col["value"]]) for r in rows])
    thresholds = np.array([float(r[col["threshold"]]) for r in rows])
    ses = np.array([float(r[col["std_error"]]) for r in rows])
    # witness is flat in the alphabet width while the threshold rises
    assert np.all(np.abs(values - 1.7362560368285114) < 4 * ses)
    assert np.all(np.diff(thresholds) > 0)
    assert "results.csv" in (out / "plot.gp").read_text()


def test_column_count_does_not_depend_on_sweep(tmp_path):
    single = {k: v for k, v in EW_SWEEP.items() if k != "sweep"}
    single["n_alphabet"] = 40
    main(["run", "--config", write(tmp_path, single), "--out", str(tmp_path / "a")])
    header, rows = read_csv(tmp_path / "a" / "results.csv")
    assert header == ex.run_columns("ew") and len(rows) == 1


def test_memory_sweep_violation_pattern(tmp_path):
    cfg = {
        "protocol": "memory",
        "eta": 0.8,
        "xi": 0.0,
        "n_alphabet": 500,
        "n_copies": 100,
        "sweep": [{"param": "sigma", "min": 1.0, "max": 4.0, "steps": 4}],
    }
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "m")]) == 0
    header, rows = read_csv(tmp_path / "m" / "results.csv")
    col = {h: i for i, h in enumerate(header)}
    assert [r[col["violated"]] for r in rows] == ["false", "true", "true", "true"]


def test_rerun_is_byte_identical_across_workers(tmp_path):
    path = write(tmp_path, EW_SWEEP)
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b")])
    main(["run", "--config", path, "--out", str(tmp_path / "c"), "--threads", "3"])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes() == (tmp_path / "c" / "results.csv").read_bytes()


def test_single_point_threads_are_deterministic(tmp_path):
    cfg = {"protocol": "ew", "r": 0.3, "phase_var_1": 0.01, "n_alphabet": 100, "n_copies": 20}
    path = write(tmp_path, cfg)
    main(["run", "--config", path, "--out", str(tmp_path / "a")])
    main(["run", "--config", path, "--out", str(tmp_path / "b"), "--threads", "2"])
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_summary_round_trips(tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", write(tmp_path, EW_SWEEP), "--out", str(out), "--seed", "99", "--k", "2.5"])
    summary = json.loads((out / "summary.json").read_text())
    echoed = parse_config(summary["config"])
    assert echoed.seed == 99 and echoed.violation_k == 2.5 and echoed.output == str(out)
    assert echoed.to_dict() == summary["config"]
    assert echoed.points() == parse_config({**EW_SWEEP, "seed": 99}).points()
    for key in ("wall_time_s", "seed", "points"):
        assert key in summary
    # running the echoed config reproduces the table
    again = tmp_path / "again"
    main(["run", "--config", write(tmp_path, summary["config"], "echo.json"), "--out", str(again)])
    assert (again / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_floats_have_seventeen_significant_digits(tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", write(tmp_path, EW_SWEEP), "--out", str(out)])
    header, rows = read_csv(out / "results.csv")
    v = rows[0][header.index("value")]
    assert v == format(float(v), ".17g")
    assert ex.format_value(0.1) == "0.10000000000000001"


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    cfg = {**EW_SWEEP, "output": str(tmp_path / "from_config"), "n_alphabet": 20, "sweep": []}
    monkeypatch.setenv("CVMDI_OUT", str(tmp_path / "from_env"))
    assert main(["run", "--config", write(tmp_path, cfg)]) == 0
    assert (tmp_path / "from_env" / "results.csv").exists()
    assert not (tmp_path / "from_config").exists()


@pytest.mark.parametrize(
    "text,fragment",
    [
        ('{"protocol": "ew",\n "rr": 1}', "line 2, key 'rr'"),
        ('{"protocol": "ew",', "line 1"),
        ('{"protocol": "ew", "sweep": [{"param": "r", "min": 0, "max": 1, "steps": 1}]}', "steps"),
        ('{"protocol": "ew", "sweep": [{"param": "xi", "min": 0, "max": 1, "steps": 3}]}', "xi"),
        ('{"protocol": "teleport"}', "protocol"),
        ('{"protocol": "ew", "r": "big"}', "key 'r'"),
        ('{"protocol": "memory", "region": {"axes": [{"param": "epsilon"}, {"param": "eta"}]}}', "epsilon"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, fragment):
    assert main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2
    assert fragment in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


@pytest.mark.parametrize(
    "cfg",
    [{"protocol": "memory", "eta": 0.0}, {"protocol": "ew", "r": -1.0}, {"protocol": "ew", "sigma": 0.0}],
)
def test_infeasible_parameters_exit_3(tmp_path, cfg):
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


def test_oracle_check_reports_variant(tmp_path, capsys):
    cfg = {"protocol": "memory", "eta": 0.8, "xi": 0.2, "nu": 1.5, "sigma": 2.0, "n_alphabet": 1000, "n_copies": 100}
    out = tmp_path / "o"
    assert main(["oracle-check", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    assert "oracle matches minus" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    point = summary["points"][0]
    assert summary["passed"] and point["variant"] == "minus"
    assert point["z_plus"] > 6
    header, rows = read_csv(out / "results.csv")
    assert header == ex.oracle_columns("memory")


def test_oracle_check_separable_ew(tmp_path):
    cfg = {"protocol": "ew", "r": 0.0, "sigma": 1.5, "n_alphabet": 500, "n_copies": 100}
    out = tmp_path / "o"
    assert main(["oracle-check", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    p = json.loads((out / "summary.json").read_text())["points"][0]
    for key in ("engine", "oracle"):
        assert abs(p[f"{key}_value"] - 2.0) < 4 * p[f"{key}_std_error"]


def test_oracle_disagreement_exit_4(tmp_path, monkeypatch):
    monkeypatch.setattr(ex, "ORACLE_SIGMA", -1.0)
    cfg = {"protocol": "ew", "r": 0.1, "n_alphabet": 40, "n_copies": 10}
    assert main(["oracle-check", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 4


def test_internal_error_exit_4(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("broken invariant")

    monkeypatch.setattr(ex, "run", boom)
    cfg = {"protocol": "ew"}
    assert main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 4


def test_region_outputs(tmp_path):
    cfg = {
        "protocol": "ew",
        "r": 0.2,
        "n_alphabet": 200,
        "n_copies": 50,
        "region": {"axes": [{"param": "epsilon"}, {"param": "sigma_star"}], "spot_checks": [[80, 120]]},
    }
    out = tmp_path / "o"
    assert main(["region", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    header, rows = read_csv(out / "region.csv")
    assert header == ex.REGION_COLUMNS and len(rows) == 151 * 161
    header, crow = read_csv(out / "contour.csv")
    assert header == ex.CONTOUR_COLUMNS and crow
    e = np.array([float(r[2]) for r in crow])
    s = np.array([float(r[3]) for r in crow])
    lhs = e**2 * np.exp(-0.4) + e**2 + 2 * (e - 1) ** 2 * s**2
    assert np.max(np.abs(lhs - 2 * s**2 / (1 + s**2))) < 1e-9
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_negative"] > 0 and summary["axis1"] == "epsilon"
    assert abs(summary["spot_checks"][0]["z"]) < 4
    assert "region.csv" in (out / "plot.gp").read_text()


def test_region_memory_axes(tmp_path):
    cfg = {
        "protocol": "memory",
        "sigma": 3.0,
        "region": {"axes": [{"param": "eta", "min": 0.3, "max": 1.0, "steps": 36}, {"param": "xi"}]},
    }
    out = tmp_path / "o"
    assert main(["region", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, crow = read_csv(out / "contour.csv")
    e = np.array([float(r[2]) for r in crow])
    x = np.array([float(r[3]) for r in crow])
    np.testing.assert_allclose((2 + x + e * x) / (2 * e), 1.8, atol=1e-9)


def test_calibrate(tmp_path):
    response = np.array([[1.2, 0.0], [0.05, 0.9]])
    volts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, -0.5]])
    amps = volts @ response.T
    cfg = {"calibration": {"samples": np.column_stack([volts, amps]).tolist(), "targets": [[1.0, 0.0]]}}
    out = tmp_path / "o"
    assert main(["calibrate", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    fit = json.loads((out / "summary.json").read_text())["fit"]
    np.testing.assert_allclose(fit["response"], response, atol=1e-10)
    header, rows = read_csv(out / "results.csv")
    assert header == ex.CALIBRATION_COLUMNS
    assert abs(float(rows[0][header.index("replay_p")])) < 1e-9


def test_calibrate_collinear_exit_3(tmp_path):
    cfg = {"calibration": {"samples": [[0, 0, 0, 0], [1, 1, 1, 1], [2, 2, 2, 2]]}}
    assert main(["calibrate", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 3


def test_console_script(tmp_path):
    cfg = {"protocol": "simon-duan", "epsilon": 0.9, "n_rounds": 20000}
    out = tmp_path / "o"
    proc = subprocess.run(
        [sys.executable, "-m", "cvmdi.cli", "run", "--config", write(tmp_path, cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    header, rows = read_csv(out / "results.csv")
    assert header == ex.run_columns("simon-duan")
    assert rows[0][header.index("violated")] == "true"


def test_load_config_defaults(tmp_path):
    cfg = load_config(write(tmp_path, {"protocol": "memory"}))
    assert cfg.params["beta_matching"] == "postprocess" and cfg.violation_k == 3.0
    assert len(cfg.points()) == 1
