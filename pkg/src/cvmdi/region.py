"""Witness-minus-threshold maps over two parameters and their zero contours."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq
from skimage.measure import find_contours

from .bounds import (
    PriorSpec,
    epsilon_opt,
    mdiep_expected,
    phase_noise_error_expected,
    symmetric_threshold,
)
from .protocols import DEFAULT_K, EwConfig, MemoryConfig, estimate_mdiew, estimate_mdiep
from .streams import Streams

WITNESSES = {"ew": ("epsilon", "sigma_star", "r", "eta"), "memory": ("sigma_star", "eta", "xi")}

EW_DEFAULTS = {"epsilon": 1.0, "sigma_star": 1.0, "r": 0.0, "eta": 1.0, "var_theta1": 0.0, "var_theta2": 0.0, "var_theta3": 0.0}
MEMORY_DEFAULTS = {"sigma_star": 1.0, "eta": 1.0, "xi": 0.0, "variant": "plus"}

# grid nodes closer to zero than this count as on the boundary, not inside it
NEGATIVE_TOL = 1e-12


def witness_margin(witness, **params):
    """Closed-form expected witness minus the symmetric threshold.

    Arguments broadcast. For ``witness="ew"`` an ``epsilon`` of ``"opt"`` uses the
    optimal rescaling at each ``(sigma_star, r)``.
    """
    if witness == "ew":
        p = {**EW_DEFAULTS, **params}
        eps = p["epsilon"]
        if isinstance(eps, str):
            if eps != "opt":
                raise ValueError(f"epsilon must be a number or 'opt', got {eps!r}")
            eps = epsilon_opt(p["sigma_star"], p["r"])
        value = phase_noise_error_expected(
            eps, p["r"], p["eta"], p["var_theta1"], p["var_theta2"], p["var_theta3"], p["sigma_star"]
        )
    elif witness == "memory":
        p = {**MEMORY_DEFAULTS, **params}
        value = mdiep_expected(p["eta"], p["xi"], p["variant"])
    else:
        raise ValueError(f"witness must be one of {tuple(WITNESSES)}, got {witness!r}")
    return value - symmetric_threshold(p["sigma_star"])


@dataclass
class RegionGrid:
    """``values[i, j]`` is the margin at ``(axis1_values[i], axis2_values[j])``.

    ``contours`` holds one ``(m, 2)`` array per zero-level polyline in
    parameter coordinates and ``residuals`` the margin at each of its vertices.
    """

    witness: str
    axis1: str
    axis1_values: np.ndarray
    axis2: str
    axis2_values: np.ndarray
    values: np.ndarray
    fixed: dict
    contours: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def n_negative(self):
        return int(np.count_nonzero(self.values < -NEGATIVE_TOL))

    @property
    def max_residual(self):
        if not self.residuals:
            return 0.0
        return float(max(np.max(np.abs(r)) for r in self.residuals))

    def margin(self, a1, a2):
        return witness_margin(self.witness, **{**self.fixed, self.axis1: a1, self.axis2: a2})


def _refine(grid, row, col):
    """Move one interpolated contour vertex onto the exact zero along its grid edge."""
    v1, v2 = grid.axis1_values, grid.axis2_values
    r0, c0 = math.floor(row), math.floor(col)
    row_on_node = abs(row - round(row)) < 1e-9
    col_on_node = abs(col - round(col)) < 1e-9
    if row_on_node and col_on_node:
        a1, a2 = v1[round(row)], v2[round(col)]
        return a1, a2
    if row_on_node:
        a1 = v1[round(row)]
        lo, hi = v2[c0], v2[min(c0 + 1, len(v2) - 1)]
        guess = lo + (col - c0) * (hi - lo)
        f = lambda a2: grid.margin(a1, a2)
        if f(lo) * f(hi) < 0:
            return a1, brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return a1, guess
    a2 = v2[round(col)] if col_on_node else v2[c0]
    lo, hi = v1[r0], v1[min(r0 + 1, len(v1) - 1)]
    guess = lo + (row - r0) * (hi - lo)
    f = lambda a1: grid.margin(a1, a2)
    if f(lo) * f(hi) < 0:
        return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps), a2
    return guess, a2


def region_grid(witness, axis1, values1, axis2, values2, **fixed):
    """Evaluate the margin on the grid and extract refined zero contours."""
    allowed = WITNESSES.get(witness)
    if allowed is None:
        raise ValueError(f"witness must be one of {tuple(WITNESSES)}, got {witness!r}")
    for name in (axis1, axis2):
        if name not in allowed:
            raise ValueError(f"axis {name!r} not available for {witness} (allowed: {', '.join(allowed)})")
    if axis1 == axis2:
        raise ValueError("axes must differ")
    values1 = np.asarray(values1, dtype=float)
    values2 = np.asarray(values2, dtype=float)
    if values1.ndim != 1 or values2.ndim != 1 or len(values1) < 2 or len(values2) < 2:
        raise ValueError("each axis needs at least two values")
    fixed = {k: v for k, v in fixed.items() if k not in (axis1, axis2)}
    values = witness_margin(witness, **{**fixed, axis1: values1[:, None], axis2: values2[None, :]})
    values = np.broadcast_to(values, (len(values1), len(values2))).astype(float)
    if not np.all(np.isfinite(values)):
        raise ValueError("margin is not finite everywhere on the grid")
    grid = RegionGrid(witness, axis1, values1, axis2, values2, values, fixed)
    for path in find_contours(values, 0.0):
        pts = np.array([_refine(grid, row, col) for row, col in path])
        grid.contours.append(pts)
        grid.residuals.append(np.asarray(grid.margin(pts[:, 0], pts[:, 1]), dtype=float))
    return grid


def spot_check(grid, i, j, n_alphabet=1000, n_copies=100, seed=0, k=DEFAULT_K, nu=1.0, workers=None):
    """Monte Carlo estimate at grid cell ``(i, j)`` next to its closed form."""
    p = {**(EW_DEFAULTS if grid.witness == "ew" else MEMORY_DEFAULTS), **grid.fixed}
    p[grid.axis1] = float(grid.axis1_values[i])
    p[grid.axis2] = float(grid.axis2_values[j])
    prior = PriorSpec.symmetric(p["sigma_star"])
    streams = Streams(seed).child(i, j)
    if grid.witness == "ew":
        eps = epsilon_opt(p["sigma_star"], p["r"]) if p["epsilon"] == "opt" else p["epsilon"]
        cfg = EwConfig(
            r=p["r"], eta_a=p["eta"], eta_b=p["eta"], prior_a=prior, prior_b=prior, epsilon=float(eps),
            phase_var_1=p["var_theta1"], phase_var_2=p["var_theta2"], phase_var_3=p["var_theta3"],
            n_alphabet=n_alphabet, n_copies=n_copies, seed=seed,
        )
        est = estimate_mdiew(cfg, streams, k=k, workers=workers)
    else:
        cfg = MemoryConfig(
            eta=p["eta"], xi=p["xi"], nu=nu, prior=prior, n_alphabet=n_alphabet, n_copies=n_copies, seed=seed
        )
        est = estimate_mdiep(cfg, streams, k=k, workers=workers)
    expected = float(grid.values[i, j]) + est.threshold
    return {
        "i": i,
        "j": j,
        grid.axis1: p[grid.axis1],
        grid.axis2: p[grid.axis2],
        "value": est.value,
        "std_error": est.std_error,
        "expected": expected,
        "threshold": est.threshold,
        "z": (est.value - expected) / est.std_error if est.std_error > 0 else 0.0,
    }
