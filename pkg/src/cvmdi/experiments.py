"""Config-driven runs: sweeps, engine/oracle comparisons, region maps, calibration.

Each function here takes a :class:`~cvmdi.config.RunConfig`, does the work and
returns plain rows and a summary dict; :func:`write_outputs` is the single
place that touches the output directory.
"""
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import math
import os
import time

import numpy as np

from ._validation import ConfigError, InfeasibleParameterError
from .bounds import locc_threshold, mdiep_expected, simon_duan_expected, symmetric_threshold
from .calibration import fit_calibration
from .config import ALIASES, PARAMS, STR_PARAMS, ew_config, memory_config
from .oracle import combined_z, oracle_ew_witness, oracle_memory_witness
from .protocols import estimate_mdiew, estimate_mdiep, estimate_simon_duan
from .region import region_grid, spot_check
from .streams import Streams

ORACLE_SIGMA = 4.0

ESTIMATE_COLUMNS = ["value", "std_error", "threshold", "sigma_star"]


def _param_columns(protocol):
    return [k for k in PARAMS[protocol] if k not in STR_PARAMS]


def run_columns(protocol):
    tail = {
        "ew": ["expected", "violated", "n_total"],
        "memory": ["expected_plus", "expected_minus", "violated", "n_total"],
        "simon-duan": ["expected", "violated", "n_total"],
    }[protocol]
    return ["point"] + _param_columns(protocol) + ESTIMATE_COLUMNS + tail


def oracle_columns(protocol):
    cols = ["point"] + _param_columns(protocol)
    cols += ["engine_value", "engine_std_error", "oracle_value", "oracle_std_error", "combined_se", "z", "pass"]
    if protocol == "memory":
        cols += ["expected_plus", "expected_minus", "z_plus", "z_minus", "variant"]
    else:
        cols += ["expected"]
    return cols


REGION_COLUMNS = ["i", "j", "x1", "x2", "margin", "expected", "threshold"]
CONTOUR_COLUMNS = ["contour", "vertex", "x1", "x2", "margin"]
CALIBRATION_COLUMNS = ["alpha_x", "alpha_p", "v_im", "v_pm", "replay_x", "replay_p"]


def _point_streams(seed, index):
    return Streams(seed).child(index)


def _resolved_params(protocol, params):
    """Parameter values as written to CSV (``epsilon="opt"`` resolved)."""
    out = {k: params[k] for k in _param_columns(protocol)}
    if protocol == "ew":
        out["epsilon"] = ew_config(params, 0).epsilon
    return out


def _run_point(protocol, params, seed, index, k, workers=None):
    streams = _point_streams(seed, index)
    row = {"point": index, **_resolved_params(protocol, params)}
    if protocol == "ew":
        cfg = ew_config(params, seed)
        est = estimate_mdiew(cfg, streams, k=k, workers=workers)
        row["expected"] = cfg.expected()
    elif protocol == "memory":
        cfg = memory_config(params, seed)
        est = estimate_mdiep(cfg, streams, k=k, workers=workers)
        row["expected_plus"] = mdiep_expected(cfg.eta, cfg.xi, "plus")
        row["expected_minus"] = mdiep_expected(cfg.eta, cfg.xi, "minus")
    else:
        est = estimate_simon_duan(params["r"], params["eta"], params["epsilon"], params["n_rounds"], streams, k=k)
        row["expected"] = simon_duan_expected(params["r"], params["eta"], params["epsilon"])
    row.update({c: getattr(est, c) for c in ESTIMATE_COLUMNS})
    row["violated"] = est.violated
    row["n_total"] = est.n_total
    return row


def _map_points(func, jobs, threads):
    """Run ``func(*job)`` for every job, in order; parallel across points when
    there are several, otherwise inside the single point."""
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, *zip(*jobs)))
    inner = threads if threads and threads > 1 else None
    return [func(*job, workers=inner) for job in jobs]


def _check_points(cfg):
    if cfg.protocol is None:
        raise ConfigError("this command needs 'protocol'", key="protocol")
    points = cfg.points()
    # build every protocol config up front so infeasible points fail before any work
    for p in points:
        if cfg.protocol == "ew":
            ew_config(p, cfg.seed)
        elif cfg.protocol == "memory":
            memory_config(p, cfg.seed)
        else:
            simon_duan_expected(p["r"], p["eta"], p["epsilon"])
    return points


def run(cfg, threads=None):
    points = _check_points(cfg)
    start = time.perf_counter()
    jobs = [(cfg.protocol, p, cfg.seed, i, cfg.violation_k) for i, p in enumerate(points)]
    rows = _map_points(_run_point, jobs, threads)
    summary = {
        "command": "run",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "wall_time_s": time.perf_counter() - start,
        "n_points": len(rows),
        "n_violated": sum(r["violated"] for r in rows),
        "points": [{k: r[k] for k in ("point", *ESTIMATE_COLUMNS, "violated", "n_total")} for r in rows],
    }
    if len(rows) == 1:
        summary["estimate"] = summary["points"][0]
    return rows, summary


def _oracle_point(protocol, params, seed, index, k, workers=None):
    streams = _point_streams(seed, index)
    row = {"point": index, **_resolved_params(protocol, params)}
    if protocol == "ew":
        cfg = ew_config(params, seed)
        eng = estimate_mdiew(cfg, streams, k=k, workers=workers)
        orc = oracle_ew_witness(cfg, streams.named("oracle"), k=k)
    else:
        cfg = memory_config(params, seed)
        eng = estimate_mdiep(cfg, streams, k=k, workers=workers)
        orc = oracle_memory_witness(cfg, streams.named("oracle"), k=k)
    se = math.hypot(eng.std_error, orc.std_error)
    z = combined_z(eng, orc)
    row.update(
        engine_value=eng.value,
        engine_std_error=eng.std_error,
        oracle_value=orc.value,
        oracle_std_error=orc.std_error,
        combined_se=se,
        z=z,
    )
    row["pass"] = bool(z <= ORACLE_SIGMA)
    if protocol == "memory":
        plus = mdiep_expected(cfg.eta, cfg.xi, "plus")
        minus = mdiep_expected(cfg.eta, cfg.xi, "minus")
        z_plus = abs(orc.value - plus) / orc.std_error
        z_minus = abs(orc.value - minus) / orc.std_error
        row.update(expected_plus=plus, expected_minus=minus, z_plus=z_plus, z_minus=z_minus)
        if cfg.xi == 0:
            row["variant"] = "both"
        else:
            row["variant"] = "plus" if z_plus < z_minus else "minus"
    else:
        row["expected"] = cfg.expected()
    return row


def oracle_check(cfg, threads=None):
    if cfg.protocol not in ("ew", "memory"):
        raise ConfigError("oracle-check supports protocol 'ew' or 'memory'", key="protocol")
    points = _check_points(cfg)
    start = time.perf_counter()
    jobs = [(cfg.protocol, p, cfg.seed, i, cfg.violation_k) for i, p in enumerate(points)]
    rows = _map_points(_oracle_point, jobs, threads)
    summary = {
        "command": "oracle-check",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "wall_time_s": time.perf_counter() - start,
        "tolerance_se": ORACLE_SIGMA,
        "passed": all(r["pass"] for r in rows),
        "points": rows,
    }
    return rows, summary


def _region_fixed(cfg):
    p = cfg.params
    if cfg.protocol == "ew":
        if p["eta_a"] != p["eta_b"]:
            raise ConfigError("region maps need eta_a == eta_b", key="eta_b")
        prior = ew_config(p, cfg.seed)
        sigma_star = locc_threshold(prior.prior_a, prior.prior_b).sigma_star
        return {
            "epsilon": p["epsilon"],
            "sigma_star": sigma_star,
            "r": p["r"],
            "eta": p["eta_a"],
            "var_theta1": p["phase_var_1"],
            "var_theta2": p["phase_var_2"],
            "var_theta3": p["phase_var_3"],
        }
    m = memory_config(p, cfg.seed)
    return {
        "sigma_star": locc_threshold(m.prior, m.prior).sigma_star,
        "eta": p["eta"],
        "xi": p["xi"],
        "variant": p["variant"],
    }


def region(cfg, threads=None):
    if cfg.region is None:
        raise ConfigError("region command needs a 'region' block", key="region")
    a1, a2 = cfg.region.axes
    start = time.perf_counter()
    try:
        grid = region_grid(cfg.protocol, a1.param, a1.values(), a2.param, a2.values(), **_region_fixed(cfg))
    except ValueError as exc:
        if isinstance(exc, (ConfigError, InfeasibleParameterError)):
            raise
        raise ConfigError(str(exc), key="region") from None
    checks = []
    for n, (i, j) in enumerate(cfg.region.spot_checks):
        checks.append(
            spot_check(
                grid,
                i,
                j,
                n_alphabet=cfg.params["n_alphabet"],
                n_copies=cfg.params["n_copies"],
                seed=cfg.seed,
                k=cfg.violation_k,
                nu=cfg.params.get("nu", 1.0),
                workers=threads,
            )
        )
    rows = []
    for i, x1 in enumerate(grid.axis1_values):
        for j, x2 in enumerate(grid.axis2_values):
            margin = grid.values[i, j]
            rows.append({"i": i, "j": j, "x1": x1, "x2": x2, "margin": margin})
    thresholds = _thresholds(grid)
    for row in rows:
        t = thresholds[row["i"], row["j"]]
        row["threshold"] = t
        row["expected"] = row["margin"] + t
    contour_rows = []
    for c, (pts, res) in enumerate(zip(grid.contours, grid.residuals)):
        for v, ((x1, x2), m) in enumerate(zip(pts, res)):
            contour_rows.append({"contour": c, "vertex": v, "x1": x1, "x2": x2, "margin": m})
    summary = {
        "command": "region",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "witness": cfg.protocol,
        "axis1": a1.param,
        "axis2": a2.param,
        "shape": list(grid.values.shape),
        "fixed": grid.fixed,
        "min_margin": float(grid.values.min()),
        "n_negative": grid.n_negative,
        "n_contours": len(grid.contours),
        "max_contour_residual": grid.max_residual,
        "spot_checks": checks,
        "wall_time_s": time.perf_counter() - start,
    }
    return grid, rows, contour_rows, summary


def _thresholds(grid):
    s = grid.fixed.get("sigma_star")
    if grid.axis1 == "sigma_star":
        s = grid.axis1_values[:, None]
    elif grid.axis2 == "sigma_star":
        s = grid.axis2_values[None, :]
    return np.broadcast_to(symmetric_threshold(s), grid.values.shape)


def calibrate(cfg):
    if cfg.calibration is None:
        raise ConfigError("calibrate command needs a 'calibration' block", key="calibration")
    model = fit_calibration(cfg.calibration["samples"])
    rows = []
    targets = np.asarray(cfg.calibration["targets"], dtype=float).reshape(-1, 2)
    if len(targets):
        volts = model.invert(targets)
        replay = model.predict(volts)
        for t, v, r in zip(targets, volts, replay):
            rows.append(dict(zip(CALIBRATION_COLUMNS, (*t, *v, *r))))
    summary = {"command": "calibrate", "config": cfg.to_dict(), "fit": model.summary()}
    return rows, summary


# -- output -----------------------------------------------------------------------

def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def run_plot_script(cfg):
    x = "point"
    if cfg.sweep:
        cols = run_columns(cfg.protocol)
        name = cfg.sweep[0].param
        x = ALIASES[cfg.protocol].get(name, (name,))[0]
        xcol = cols.index(x) + 1
    else:
        xcol = 1
    cols = run_columns(cfg.protocol)
    c = {name: cols.index(name) + 1 for name in cols}
    expected = c.get("expected", c.get("expected_plus"))
    lines = [
        'set datafile separator ","',
        f'set xlabel "{x}"',
        'set ylabel "witness"',
        "set key top left",
        f"plot 'results.csv' using {xcol}:{c['value']}:{c['std_error']} skip 1 with yerrorbars title 'Monte Carlo', \\",
        f"     '' using {xcol}:{c['threshold']} skip 1 with linespoints title 'threshold', \\",
        f"     '' using {xcol}:{expected} skip 1 with lines title 'closed form'",
    ]
    return "\n".join(lines) + "\n"


def region_plot_script(summary):
    lines = [
        'set datafile separator ","',
        f'set xlabel "{summary["axis1"]}"',
        f'set ylabel "{summary["axis2"]}"',
        'set cblabel "witness - threshold"',
        "set palette defined (-1 'blue', 0 'white', 1 'red')",
        "set cbrange [-1:1]",
        "plot 'region.csv' using 3:4:5 skip 1 with image notitle, \\",
        "     'contour.csv' using 3:4 skip 1 with points pt 7 ps 0.3 lc rgb 'black' title 'zero contour'",
    ]
    return "\n".join(lines) + "\n"


def output_dir(cfg, override=None):
    """``--out`` beats the ``CVMDI_OUT`` environment variable, which beats the config."""
    return override or os.environ.get("CVMDI_OUT") or cfg.output


def write_outputs(directory, files):
    """Write ``{name: (kind, payload)}`` into ``directory`` after all work is done."""
    os.makedirs(directory, exist_ok=True)
    for name, (kind, payload) in files.items():
        path = os.path.join(directory, name)
        if kind == "csv":
            write_csv(path, *payload)
        elif kind == "json":
            write_json(path, payload)
        else:
            with open(path, "w") as fh:
                fh.write(payload)
