"""Linear response of the coherent-state modulators.

Driving the intensity modulator also leaks a small modulation into the p
quadrature (and the phase modulator into x). The response is linear, so a
2x2 matrix plus offsets maps drive voltages to amplitudes, and inverting it
gives compensated voltages for any target amplitude.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import InfeasibleParameterError


class ModulatorCalibration(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``amplitudes = voltages @ response_.T + offset_``.

    ``X`` holds ``(V_IM, V_PM)`` rows and ``y`` the measured
    ``(alpha_x, alpha_p)``.

    Attributes
    ----------
    response_ : ndarray of shape (2, 2)
        ``response_[i, j]`` is d(amplitude i)/d(voltage j).
    offset_ : ndarray of shape (2,)
    response_se_, offset_se_ : ndarray
        Standard errors from the residual variance; zero for exact data.
    residual_rms_ : float
    """

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def _design(self, X):
        if self.fit_intercept:
            return np.column_stack([X, np.ones(len(X))])
        return X

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if X.shape[1] != 2 or y.ndim != 2 or y.shape[1] != 2:
            raise ValueError("expected two voltages and two amplitudes per sample")
        A = self._design(X)
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise InfeasibleParameterError("calibration voltages are collinear; design matrix is rank deficient")
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        dof = len(A) - A.shape[1]
        sigma2 = (resid**2).sum(axis=0) / dof if dof > 0 else np.zeros(2)
        cov_unit = np.linalg.inv(A.T @ A)
        se = np.sqrt(np.outer(np.diag(cov_unit), sigma2))
        self.response_ = coef[:2].T
        self.response_se_ = se[:2].T
        self.offset_ = coef[2] if self.fit_intercept else np.zeros(2)
        self.offset_se_ = se[2] if self.fit_intercept else np.zeros(2)
        self.residual_rms_ = float(np.sqrt(np.mean(resid**2)))
        self.n_samples_ = len(A)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X)
        return X @ self.response_.T + self.offset_

    def invert(self, amplitudes):
        """Voltages producing the requested ``(alpha_x, alpha_p)`` rows."""
        check_is_fitted(self)
        amplitudes = check_array(amplitudes)
        return np.linalg.solve(self.response_, (amplitudes - self.offset_).T).T

    def summary(self):
        check_is_fitted(self)
        return {
            "response": self.response_.tolist(),
            "response_se": self.response_se_.tolist(),
            "offset": self.offset_.tolist(),
            "offset_se": self.offset_se_.tolist(),
            "residual_rms": self.residual_rms_,
            "n_samples": self.n_samples_,
        }


def fit_calibration(samples):
    """Fit from rows ``(V_IM, V_PM, alpha_x, alpha_p)``; needs three non-collinear voltage points."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValueError("calibration samples must be rows of (V_IM, V_PM, alpha_x, alpha_p)")
    if len(data) < 3:
        raise InfeasibleParameterError("need at least 3 calibration points")
    return ModulatorCalibration().fit(data[:, :2], data[:, 2:])
