"""Squeezing spectrum of a below-threshold OPO and the loss budget feeding it."""
import math

import numpy as np

from ._validation import InfeasibleParameterError, check_range

# Stage efficiencies of the entanglement-witness setup. The measured fiber
# transmission to the detectors already contains the fiber coupling loss of
# the OPO outputs, so coupling is listed for reference but not multiplied in.
ESCAPE = {"opo1": 0.975, "opo2": 0.944}
FIBER_COUPLING = {"opo1": 0.87, "opo2": 0.84}
TRANSMISSION = {"hd1": 0.20, "hd2": 0.22, "hd3": 0.21, "hd4": 0.21}
DETECTION = {"hd1": 0.95, "hd2": 0.96, "hd3": 0.94, "hd4": 0.95}
UNKNOWN_LOSS = 0.8

CAVITY_BANDWIDTH_MHZ = 8.35
SIDEBAND_MHZ = 3.1
PUMP_RATIO = 0.40


def opo_variances(bandwidth, sideband, pump_ratio, eta):
    """Squeezed and anti-squeezed quadrature variances (vacuum = 1/2).

    Parameters
    ----------
    bandwidth : float
        Cavity bandwidth ``Omega`` (any frequency unit, same as ``sideband``).
    sideband : float
        Detection sideband frequency ``omega``.
    pump_ratio : float
        ``P / P_thr`` in ``[0, 1)``.
    eta : float
        Total detection efficiency in ``[0, 1]``.

    Returns
    -------
    (float, float)
        ``1/2 - 2 eta Omega zeta / ((Omega + zeta)^2 + omega^2)`` and
        ``1/2 + 2 eta Omega zeta / ((Omega - zeta)^2 + omega^2)`` with
        ``zeta = Omega sqrt(P / P_thr)``.
    """
    check_range("bandwidth", bandwidth, 0.0, low_open=True)
    check_range("sideband", sideband, 0.0)
    check_range("eta", eta, 0.0, 1.0)
    if not 0.0 <= pump_ratio < 1.0:
        raise InfeasibleParameterError(f"pump_ratio must be in [0, 1) (below threshold), got {pump_ratio}")
    zeta = bandwidth * math.sqrt(pump_ratio)
    num = 2.0 * eta * bandwidth * zeta
    squeezed = 0.5 - num / ((bandwidth + zeta) ** 2 + sideband**2)
    antisqueezed = 0.5 + num / ((bandwidth - zeta) ** 2 + sideband**2)
    return squeezed, antisqueezed


def efficiency_budget(factors):
    """Product of named stage efficiencies.

    ``factors`` is a mapping ``name -> efficiency`` or a sequence of
    ``(name, efficiency)`` pairs; each efficiency must lie in ``(0, 1]``.
    Returns ``(total, stages)`` where ``stages`` lists the validated pairs.
    """
    items = list(factors.items()) if hasattr(factors, "items") else list(factors)
    stages = []
    total = 1.0
    for name, value in items:
        value = float(value)
        if not 0.0 < value <= 1.0:
            raise InfeasibleParameterError(f"efficiency of stage {name!r} must be in (0, 1], got {value}")
        stages.append((str(name), value))
        total *= value
    return total, stages


def setup_budget(extra_loss=False):
    """Stage list of the entanglement-witness setup, averaged over the two
    OPOs and the four homodyne detectors."""
    stages = [
        ("escape", float(np.mean(list(ESCAPE.values())))),
        ("transmission", float(np.mean(list(TRANSMISSION.values())))),
        ("detection", float(np.mean(list(DETECTION.values())))),
    ]
    if extra_loss:
        stages.append(("unknown_loss", UNKNOWN_LOSS))
    return stages
