import numpy as np
import pytest
from sklearn.base import clone

from cvmdi._validation import InfeasibleParameterError
from cvmdi.calibration import ModulatorCalibration, fit_calibration


def _data(response, offset, n=20, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    volts = rng.uniform(-1, 1, size=(n, 2))
    amps = volts @ np.asarray(response).T + offset + rng.normal(0, noise, size=(n, 2))
    return volts, amps


def test_exact_recovery_of_diagonal_response():
    volts, amps = _data(np.diag([1.3, 0.7]), [0.05, -0.02])
    fit = fit_calibration(np.column_stack([volts, amps]))
    np.testing.assert_allclose(fit.response_, np.diag([1.3, 0.7]), atol=1e-10)
    np.testing.assert_allclose(fit.offset_, [0.05, -0.02], atol=1e-10)
    assert fit.residual_rms_ < 1e-12


def test_invert_removes_cross_coupling():
    response = np.array([[1.2, 0.0], [0.05, 0.9]])
    volts, amps = _data(response, [0.0, 0.0])
    fit = ModulatorCalibration().fit(volts, amps)
    targets = np.array([[1.0, 0.0], [0.5, 0.0], [-0.7, 0.0]])
    replay = fit.invert(targets) @ response.T
    assert np.max(np.abs(replay[:, 1])) < 1e-9
    np.testing.assert_allclose(replay[:, 0], targets[:, 0], atol=1e-9)


def test_noisy_slopes_within_three_standard_errors():
    response = np.array([[1.1, 0.03], [0.05, 0.95]])
    volts, amps = _data(response, [0.01, 0.0], n=100, noise=0.01, seed=4)
    fit = ModulatorCalibration().fit(volts, amps)
    assert np.all(np.abs(fit.response_ - response) < 3 * fit.response_se_)
    assert fit.residual_rms_ == pytest.approx(0.01, rel=0.25)


def test_collinear_voltages_rejected():
    volts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with pytest.raises(InfeasibleParameterError):
        ModulatorCalibration().fit(volts, volts)
    with pytest.raises(InfeasibleParameterError):
        fit_calibration([[0, 0, 0, 0], [1, 0, 1, 0]])


def test_estimator_protocol():
    est = ModulatorCalibration(fit_intercept=False)
    assert est.get_params() == {"fit_intercept": False}
    assert clone(est).get_params() == est.get_params()
    volts, amps = _data(np.eye(2), [0, 0])
    est.fit(volts, amps)
    assert est.score(volts, amps) == pytest.approx(1.0)
    assert set(est.summary()) >= {"response", "offset", "residual_rms"}
