"""Closed-form estimation bounds and expected witness values.

All functions are pure and accept numpy arrays wherever a scalar parameter is
documented, broadcasting in the usual way; scalars in give floats out.

Alphabet widths follow the prior density
``P(alpha) ∝ exp(-alpha_x**2 / sigma_x**2 - alpha_p**2 / sigma_p**2)``, so the
amplitude ``alpha_x`` has variance ``sigma_x**2 / 2`` and the quadrature mean
``sqrt(2) * alpha_x`` has variance ``sigma_x**2``.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._validation import InfeasibleParameterError, check_range

VARIANTS = ("plus", "minus")


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class PriorSpec:
    """Gaussian alphabet widths of one party's coherent-state source."""

    sigma_x: float
    sigma_p: float

    def __post_init__(self):
        for name in ("sigma_x", "sigma_p"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise InfeasibleParameterError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def symmetric(cls, sigma):
        return cls(sigma, sigma)

    def sample(self, rng, size=None):
        """Draw complex amplitudes ``alpha`` from the prior."""
        ax = rng.normal(0.0, self.sigma_x / math.sqrt(2.0), size)
        ap = rng.normal(0.0, self.sigma_p / math.sqrt(2.0), size)
        return ax + 1j * ap


@dataclass(frozen=True)
class BoundReport:
    v_alice: float
    v_bob: float
    threshold: float
    sigma_star: float


def error_bound(sigma_x, sigma_p):
    """Minimum summed squared error for estimating both amplitudes of ``|alpha>``."""
    check_range("sigma_x", sigma_x, 0.0, low_open=True)
    check_range("sigma_p", sigma_p, 0.0, low_open=True)
    sx = np.asarray(sigma_x, dtype=float)
    sp = np.asarray(sigma_p, dtype=float)
    return _out(1.0 / (1.0 + 0.5 / sx**2 + 0.5 / sp**2))


def min_error_bound(prior):
    return error_bound(prior.sigma_x, prior.sigma_p)


def symmetric_threshold(sigma):
    """``2 v(sigma, sigma) = 2 sigma^2 / (1 + sigma^2)``; zero at ``sigma = 0``."""
    check_range("sigma", sigma, 0.0)
    s2 = np.asarray(sigma, dtype=float) ** 2
    return _out(2.0 * s2 / (1.0 + s2))


def sigma_star_from_threshold(threshold):
    check_range("threshold", threshold, 0.0, 2.0, high_open=True)
    t = np.asarray(threshold, dtype=float)
    return _out(np.sqrt(t / (2.0 - t)))


def locc_threshold(prior_a, prior_b):
    """Error floor for estimating the joint amplitudes with 1-LOCC measurements."""
    va = min_error_bound(prior_a)
    vb = min_error_bound(prior_b)
    threshold = va + vb
    if not 0.0 < threshold < 2.0:
        raise InfeasibleParameterError(f"threshold {threshold} outside (0, 2)")
    return BoundReport(va, vb, threshold, sigma_star_from_threshold(threshold))


# -- entanglement witness -----------------------------------------------------

def mdiew_expected(r, eta):
    """Expected witness for a lossy TMSV, honest stations."""
    check_range("r", r, 0.0)
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    r = np.asarray(r, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _out(2.0 + eta * np.expm1(-2.0 * r))


def ew_detectable(r, eta, sigma):
    check_range("sigma", sigma, 0.0, low_open=True)
    lhs = np.asarray(eta, dtype=float) * -np.expm1(-2.0 * np.asarray(r, dtype=float))
    check_range("r", r, 0.0)
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    out = lhs > 2.0 / (1.0 + np.asarray(sigma, dtype=float) ** 2)
    return bool(out) if out.ndim == 0 else out


def rescaled_error_expected(epsilon, sigma_star, r):
    """Summed error when all four outcomes are multiplied by ``epsilon`` (lossless)."""
    check_range("epsilon", epsilon, 0.0)
    check_range("sigma_star", sigma_star, 0.0)
    check_range("r", r, 0.0)
    e = np.asarray(epsilon, dtype=float)
    s = np.asarray(sigma_star, dtype=float)
    r = np.asarray(r, dtype=float)
    return _out(e**2 * np.exp(-2.0 * r) + e**2 + 2.0 * (e - 1.0) ** 2 * s**2)


def epsilon_opt(sigma_star, r):
    """Rescaling factor minimising :func:`rescaled_error_expected`."""
    check_range("sigma_star", sigma_star, 0.0)
    check_range("r", r, 0.0)
    s2 = 2.0 * np.asarray(sigma_star, dtype=float) ** 2
    return _out(s2 / (s2 + np.exp(-2.0 * np.asarray(r, dtype=float)) + 1.0))


def simon_duan_rescaled(epsilon):
    check_range("epsilon", epsilon, 0.0)
    return _out(2.0 * np.asarray(epsilon, dtype=float) ** 2)


def simon_duan_expected(r, eta, epsilon=1.0):
    """``Var(e x1 - e x2) + Var(e p1 + e p2)`` on a TMSV with loss ``eta`` on both arms."""
    check_range("r", r, 0.0)
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    check_range("epsilon", epsilon, 0.0)
    e = np.asarray(epsilon, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _out(2.0 * e**2 * (eta * np.exp(-2.0 * np.asarray(r, dtype=float)) + 1.0 - eta))


def phase_noise_error_expected(epsilon, r, eta, var_theta1, var_theta2, var_theta3, sigma):
    """Rescaled, lossy witness averaged over Gaussian phase noise.

    ``var_theta1``: common phase between the TMSV and the detectors,
    ``var_theta2``: common phase between the coherent inputs and the detectors,
    ``var_theta3``: relative phase between the two squeezers (all in rad^2).
    """
    for name, v in (("var_theta1", var_theta1), ("var_theta2", var_theta2), ("var_theta3", var_theta3)):
        check_range(name, v, 0.0)
    check_range("epsilon", epsilon, 0.0)
    check_range("r", r, 0.0)
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    check_range("sigma", sigma, 0.0)
    e = np.asarray(epsilon, dtype=float)
    r = np.asarray(r, dtype=float)
    eta = np.asarray(eta, dtype=float)
    v1, v2, v3 = (np.asarray(v, dtype=float) for v in (var_theta1, var_theta2, var_theta3))
    s2 = np.asarray(sigma, dtype=float) ** 2
    ch, sh = np.cosh(2 * r), np.sinh(2 * r)
    d1 = np.exp(-2.0 * v1)
    d3 = np.exp(-v3 / 2.0)
    squeezed = 0.5 * (1 + d1) * (ch - d3 * sh) + 0.5 * (1 - d1) * (ch + d3 * sh)
    value = (
        e**2 * eta * squeezed
        + (1.0 - eta) * e**2
        + e**2
        + 2.0 * s2 * (1.0 + e**2 - 2.0 * e * np.exp(-v2 / 2.0))
    )
    return _out(value)


def ew_error_expected(
    epsilon, r, eta_a, eta_b, prior_a, prior_b, var_theta1=0.0, var_theta2=0.0, var_theta3=0.0
):
    """Expected witness for asymmetric arm losses and alphabets.

    Reduces to :func:`phase_noise_error_expected` when ``eta_a == eta_b`` and
    all four widths are equal.
    """
    for name, v in (("var_theta1", var_theta1), ("var_theta2", var_theta2), ("var_theta3", var_theta3)):
        check_range(name, v, 0.0)
    check_range("epsilon", epsilon, 0.0)
    check_range("r", r, 0.0)
    check_range("eta_a", eta_a, 0.0, 1.0, low_open=True)
    check_range("eta_b", eta_b, 0.0, 1.0, low_open=True)
    c, s = 0.5 * math.cosh(2 * r), 0.5 * math.sinh(2 * r)
    cross = 2.0 * math.sqrt(eta_a * eta_b) * s * math.exp(-var_theta3 / 2.0)
    base = (eta_a + eta_b) * c + 0.5 * (2.0 - eta_a - eta_b)
    # Var(x_A - x_B) and Var(p_A - p_B) after the relative squeezer phase
    v_corr, v_anti = base - cross, base + cross
    cos2 = 0.5 * (1.0 + math.exp(-2.0 * var_theta1))
    v_tmsv = cos2 * v_corr + (1.0 - cos2) * v_anti
    prior_var = 0.5 * (prior_a.sigma_x**2 + prior_b.sigma_x**2 + prior_a.sigma_p**2 + prior_b.sigma_p**2)
    e = float(epsilon)
    return e**2 * (1.0 + v_tmsv) + prior_var * (1.0 + e**2 - 2.0 * e * math.exp(-var_theta2 / 2.0))


# -- memory witness -------------------------------------------------------------

def mdiep_expected(eta, xi, variant="plus"):
    """Expected memory witness for a lossy channel with excess noise.

    ``variant="plus"`` gives ``(2 + xi + eta xi) / (2 eta)``, ``"minus"`` gives
    ``(2 + xi - eta xi) / (2 eta)``. The minus form is what the Bell-measurement
    variance chain produces term by term; both agree at ``xi = 0``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    check_range("xi", xi, 0.0)
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sign = 1.0 if variant == "plus" else -1.0
    return _out((2.0 + xi + sign * eta * xi) / (2.0 * eta))


def ep_detectable(eta, xi, sigma, variant="plus"):
    check_range("sigma", sigma, 0.0, low_open=True)
    out = np.asarray(mdiep_expected(eta, xi, variant)) < np.asarray(symmetric_threshold(sigma))
    return bool(out) if out.ndim == 0 else out
