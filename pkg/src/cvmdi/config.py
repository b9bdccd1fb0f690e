"""JSON run configuration.

A config is one JSON object. Protocol parameters sit at the top level next to
``protocol``, ``seed``, ``violation_k``, ``output`` and the optional
``sweep``, ``region`` and ``calibration`` blocks. Unknown keys are rejected.
See SCHEMA.md for the full key list.
"""
from dataclasses import dataclass
import itertools
import json
import math
import re

import numpy as np

from ._validation import ConfigError
from .bounds import PriorSpec, epsilon_opt, locc_threshold
from .protocols import DEFAULT_K, EwConfig, MemoryConfig

PROTOCOLS = ("ew", "memory", "simon-duan")

PARAMS = {
    "ew": {
        "r": 0.0,
        "eta_a": 1.0,
        "eta_b": 1.0,
        "sigma_x_a": 1.0,
        "sigma_p_a": 1.0,
        "sigma_x_b": 1.0,
        "sigma_p_b": 1.0,
        "epsilon": 1.0,
        "phase_var_1": 0.0,
        "phase_var_2": 0.0,
        "phase_var_3": 0.0,
        "n_alphabet": 1000,
        "n_copies": 100,
    },
    "memory": {
        "eta": 1.0,
        "xi": 0.0,
        "nu": 1.0,
        "sigma_x": 1.0,
        "sigma_p": 1.0,
        "n_alphabet": 1000,
        "n_copies": 100,
        "convention": "diff",
        "beta_matching": "postprocess",
        "variant": "plus",
    },
    "simon-duan": {
        "r": 0.0,
        "eta": 1.0,
        "epsilon": 1.0,
        "n_rounds": 100000,
    },
}

# shorthand keys that expand onto several canonical parameters
ALIASES = {
    "ew": {"sigma": ("sigma_x_a", "sigma_p_a", "sigma_x_b", "sigma_p_b"), "eta": ("eta_a", "eta_b")},
    "memory": {"sigma": ("sigma_x", "sigma_p")},
    "simon-duan": {},
}

INT_PARAMS = {"n_alphabet", "n_copies", "n_rounds"}
STR_PARAMS = {
    "convention": ("diff", "sum"),
    "beta_matching": ("postprocess", "amplifier"),
    "variant": ("plus", "minus"),
}

TOP_KEYS = {"protocol", "seed", "violation_k", "output", "sweep", "region", "calibration"}
AXIS_KEYS = {"param", "min", "max", "steps", "scale"}
REGION_KEYS = {"axes", "spot_checks"}
CALIBRATION_KEYS = {"samples", "targets"}

REGION_AXES = {"ew": ("epsilon", "sigma_star", "r", "eta"), "memory": ("sigma_star", "eta", "xi")}
REGION_DEFAULTS = {
    "epsilon": (0.0, 1.5, 151),
    "sigma_star": (0.0, 4.0, 161),
    "r": (0.0, 1.0, 101),
    "eta": (0.01, 1.0, 100),
    "xi": (0.0, 0.5, 101),
}


@dataclass(frozen=True)
class Axis:
    param: str
    min: float
    max: float
    steps: int
    scale: str = "linear"

    def values(self):
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.steps)
        return np.linspace(self.min, self.max, self.steps)

    def to_dict(self):
        return {"param": self.param, "min": self.min, "max": self.max, "steps": self.steps, "scale": self.scale}


@dataclass(frozen=True)
class RegionSpec:
    axes: tuple
    spot_checks: tuple = ()

    def to_dict(self):
        return {"axes": [a.to_dict() for a in self.axes], "spot_checks": [list(c) for c in self.spot_checks]}


@dataclass(frozen=True)
class RunConfig:
    protocol: str | None
    params: dict
    sweep: tuple = ()
    region: RegionSpec | None = None
    calibration: dict | None = None
    output: str = "results"
    seed: int = 0
    violation_k: float = DEFAULT_K

    def to_dict(self):
        d = {"protocol": self.protocol, "seed": self.seed, "violation_k": self.violation_k, "output": self.output}
        d.update(self.params)
        if self.sweep:
            d["sweep"] = [a.to_dict() for a in self.sweep]
        if self.region is not None:
            d["region"] = self.region.to_dict()
        if self.calibration is not None:
            d["calibration"] = self.calibration
        return d

    def points(self):
        """Parameter dicts for every sweep point (Cartesian product of axes)."""
        if not self.sweep:
            return [dict(self.params)]
        grids = [a.values() for a in self.sweep]
        out = []
        for combo in itertools.product(*grids):
            p = dict(self.params)
            for axis, value in zip(self.sweep, combo):
                for key in ALIASES[self.protocol].get(axis.param, (axis.param,)):
                    p[key] = int(round(value)) if key in INT_PARAMS else float(value)
            out.append(p)
        return out


def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key=key)
    if not math.isfinite(value):
        raise ConfigError("number must be finite", key=key)
    return value


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError("expected a JSON object", key=where or None)
    for k in obj:
        if k not in allowed:
            path = f"{where}.{k}" if where else k
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", key=path)


def _parse_axis(obj, where, allowed_params, defaults=None):
    _check_keys(obj, AXIS_KEYS, where)
    if "param" not in obj:
        raise ConfigError("axis needs 'param'", key=where)
    param = obj["param"]
    if param not in allowed_params:
        raise ConfigError(f"cannot sweep '{param}' (allowed: {', '.join(sorted(allowed_params))})", key=f"{where}.param")
    lo, hi, steps = (defaults or {}).get(param, (None, None, None))
    lo = _number(obj.get("min", lo), f"{where}.min") if obj.get("min", lo) is not None else None
    hi = _number(obj.get("max", hi), f"{where}.max") if obj.get("max", hi) is not None else None
    steps = obj.get("steps", steps)
    if lo is None or hi is None or steps is None:
        raise ConfigError("axis needs 'min', 'max' and 'steps'", key=where)
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 2:
        raise ConfigError("steps must be an integer >= 2", key=f"{where}.steps")
    scale = obj.get("scale", "linear")
    if scale not in ("linear", "log"):
        raise ConfigError("scale must be 'linear' or 'log'", key=f"{where}.scale")
    if scale == "log" and (lo <= 0 or hi <= 0):
        raise ConfigError("log axis needs positive bounds", key=where)
    return Axis(param, float(lo), float(hi), steps, scale)


def parse_config(obj):
    """Validate a decoded JSON object and return a :class:`RunConfig`."""
    if not isinstance(obj, dict):
        raise ConfigError("top level must be a JSON object")
    protocol = obj.get("protocol")
    if protocol is not None and protocol not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}", key="protocol")
    params_spec = PARAMS.get(protocol, {})
    aliases = ALIASES.get(protocol, {})
    _check_keys(obj, TOP_KEYS | set(params_spec) | set(aliases), "")

    seed = obj.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)", key="seed")
    k = float(_number(obj.get("violation_k", DEFAULT_K), "violation_k"))
    output = obj.get("output", "results")
    if not isinstance(output, str):
        raise ConfigError("output must be a string path", key="output")

    params = dict(params_spec)
    for alias, targets in aliases.items():
        if alias in obj:
            for t in targets:
                params[t] = obj[alias]
    for key in params_spec:
        if key in obj:
            params[key] = obj[key]
    for key, value in params.items():
        if key in STR_PARAMS:
            if value not in STR_PARAMS[key]:
                raise ConfigError(f"must be one of {STR_PARAMS[key]}", key=key)
        elif key in INT_PARAMS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("expected an integer", key=key)
        elif key == "epsilon" and value == "opt":
            pass
        else:
            params[key] = float(_number(value, key))

    sweep_obj = obj.get("sweep", [])
    if not isinstance(sweep_obj, list):
        raise ConfigError("sweep must be a list of axes", key="sweep")
    sweepable = (set(params_spec) - set(STR_PARAMS)) | set(aliases)
    sweep = tuple(_parse_axis(a, f"sweep[{i}]", sweepable) for i, a in enumerate(sweep_obj))
    names = [a.param for a in sweep]
    if len(set(names)) != len(names):
        raise ConfigError("parameter swept twice", key="sweep")

    region = None
    if "region" in obj:
        if protocol not in REGION_AXES:
            raise ConfigError("region needs protocol 'ew' or 'memory'", key="region")
        robj = obj["region"]
        _check_keys(robj, REGION_KEYS, "region")
        axes_obj = robj.get("axes")
        if not isinstance(axes_obj, list) or len(axes_obj) != 2:
            raise ConfigError("region needs exactly two axes", key="region.axes")
        axes = tuple(
            _parse_axis(a, f"region.axes[{i}]", set(REGION_AXES[protocol]), REGION_DEFAULTS)
            for i, a in enumerate(axes_obj)
        )
        if axes[0].param == axes[1].param:
            raise ConfigError("region axes must differ", key="region.axes")
        checks = robj.get("spot_checks", [])
        if not isinstance(checks, list) or not all(
            isinstance(c, list) and len(c) == 2 and all(isinstance(i, int) and not isinstance(i, bool) for i in c)
            for c in checks
        ):
            raise ConfigError("spot_checks must be a list of [i, j] index pairs", key="region.spot_checks")
        for c in checks:
            if not (0 <= c[0] < axes[0].steps and 0 <= c[1] < axes[1].steps):
                raise ConfigError(f"spot check {c} outside the grid", key="region.spot_checks")
        region = RegionSpec(axes, tuple(tuple(c) for c in checks))

    calibration = None
    if "calibration" in obj:
        cobj = obj["calibration"]
        _check_keys(cobj, CALIBRATION_KEYS, "calibration")
        samples = cobj.get("samples")
        if not isinstance(samples, list) or not all(isinstance(s, list) and len(s) == 4 for s in samples):
            raise ConfigError("samples must be rows of [V_IM, V_PM, alpha_x, alpha_p]", key="calibration.samples")
        targets = cobj.get("targets", [])
        if not isinstance(targets, list) or not all(isinstance(t, list) and len(t) == 2 for t in targets):
            raise ConfigError("targets must be rows of [alpha_x, alpha_p]", key="calibration.targets")
        for i, row in enumerate(samples + targets):
            for v in row:
                _number(v, "calibration")
        calibration = {"samples": samples, "targets": targets}

    return RunConfig(protocol, params, sweep, region, calibration, output, seed, k)


def load_config(path):
    """Read and validate a JSON config file; JSON syntax errors report the line."""
    with open(path) as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno) from None
    try:
        return parse_config(obj)
    except ConfigError as exc:
        if exc.key is None or exc.line is not None:
            raise
        line = _find_key_line(text, re.findall(r"[A-Za-z_]+", exc.key)[-1])
        if line is None:
            raise
        message = str(exc).split("] ", 1)[-1]
        raise ConfigError(message, key=exc.key, line=line) from None


def _find_key_line(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


# -- building protocol configs from parameter dicts ---------------------------------

def ew_config(p, seed):
    prior_a = PriorSpec(p["sigma_x_a"], p["sigma_p_a"])
    prior_b = PriorSpec(p["sigma_x_b"], p["sigma_p_b"])
    eps = p["epsilon"]
    if eps == "opt":
        eps = epsilon_opt(locc_threshold(prior_a, prior_b).sigma_star, p["r"])
    return EwConfig(
        r=p["r"],
        eta_a=p["eta_a"],
        eta_b=p["eta_b"],
        prior_a=prior_a,
        prior_b=prior_b,
        epsilon=float(eps),
        phase_var_1=p["phase_var_1"],
        phase_var_2=p["phase_var_2"],
        phase_var_3=p["phase_var_3"],
        n_alphabet=p["n_alphabet"],
        n_copies=p["n_copies"],
        seed=seed,
    )


def memory_config(p, seed):
    return MemoryConfig(
        eta=p["eta"],
        xi=p["xi"],
        nu=p["nu"],
        prior=PriorSpec(p["sigma_x"], p["sigma_p"]),
        n_alphabet=p["n_alphabet"],
        n_copies=p["n_copies"],
        seed=seed,
        convention=p["convention"],
        beta_matching=p["beta_matching"],
    )
