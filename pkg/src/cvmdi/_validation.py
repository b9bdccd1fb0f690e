"""Argument checks shared across the package."""
import math

import numpy as np


class InfeasibleParameterError(ValueError):
    """A physical parameter lies outside the domain of the model."""


class ConfigError(ValueError):
    """A run configuration is malformed.

    ``key`` names the offending entry (dotted path) and ``line`` the JSON line
    when the error comes from parsing.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


def check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InfeasibleParameterError(f"{name} must be finite, got {value!r}")
    return value


def check_range(name, value, low=-math.inf, high=math.inf, low_open=False, high_open=False):
    """Raise unless every entry of ``value`` lies in the given interval."""
    arr = np.asarray(value, dtype=float)
    if np.any(np.isnan(arr)):
        raise InfeasibleParameterError(f"{name} is NaN")
    bad_low = arr <= low if low_open else arr < low
    bad_high = arr >= high if high_open else arr > high
    if np.any(bad_low) or np.any(bad_high):
        lb = "(" if low_open else "["
        hb = ")" if high_open else "]"
        raise InfeasibleParameterError(f"{name}={value!r} outside {lb}{low}, {high}{hb}")
    return value


def check_positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise InfeasibleParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
