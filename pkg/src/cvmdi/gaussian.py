"""Multimode Gaussian states described by first and second moments.

Conventions: hbar = 1, quadratures ordered ``(x1, p1, ..., xn, pn)`` and the
vacuum covariance is ``I / 2``. A coherent state ``|alpha>`` has quadrature
means ``sqrt(2) * (Re alpha, Im alpha)``.

States are immutable; every operation returns a new :class:`GaussianState`.
Physicality (all symplectic eigenvalues >= 1/2) is enforced on construction.
"""
from dataclasses import dataclass
import enum
import functools
import math

import numpy as np

from ._validation import InfeasibleParameterError, check_range

SYMMETRY_RTOL = 1e-12
PHYSICALITY_ATOL = 1e-9


class Quadrature(enum.Enum):
    X = 0
    P = 1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown quadrature {value!r}; expected 'x' or 'p'") from None


@functools.lru_cache(maxsize=16)
def _omega(n_modes):
    w = np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    w.setflags(write=False)
    return w


def symplectic_form(n_modes):
    return _omega(int(n_modes)).copy()


def symplectic_eigenvalues(cov):
    """Symplectic eigenvalues of a ``2n x 2n`` covariance matrix, ascending."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(_omega(n) @ cov))
    # eigenvalues of Omega V come in pairs +-i nu
    return np.sort(ev)[::2]


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an ``n``-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        dim = mean.shape[0]
        if dim == 0 or dim % 2:
            raise ValueError(f"mean must have even, non-zero length, got {dim}")
        if cov.shape != (dim, dim):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {dim}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("state moments must be finite")
        scale = max(np.max(np.abs(cov)), 1.0)
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InfeasibleParameterError("covariance matrix is not positive definite") from None
        nu_min = symplectic_eigenvalues(cov)[0]
        if nu_min < 0.5 - PHYSICALITY_ATOL:
            raise InfeasibleParameterError(
                f"unphysical state: smallest symplectic eigenvalue {nu_min:.3g} < 1/2"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def _from_channel(cls, mean, cov):
        """Output of a channel applied to a validated state.

        Channels with in-range parameters map physical states to physical
        states, so the eigenvalue check is skipped here; the property tests
        exercise that guarantee.
        """
        state = object.__new__(cls)
        mean = np.asarray(mean, dtype=float)
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(state, "mean", mean)
        object.__setattr__(state, "cov", cov)
        return state

    @property
    def n_modes(self):
        return self.mean.shape[0] // 2

    def symplectic_eigenvalues(self):
        return symplectic_eigenvalues(self.cov)

    def reduced(self, modes):
        """Marginal state on the listed modes, in the order given."""
        idx = _quad_indices(modes, self.n_modes)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def allclose(self, other, atol=1e-12):
        return (
            self.n_modes == other.n_modes
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"GaussianState(n_modes={self.n_modes}, mean={self.mean.tolist()})"


def _quad_indices(modes, n_modes):
    idx = []
    for m in modes:
        _check_mode(m, n_modes)
        idx += [2 * m, 2 * m + 1]
    return idx


def _check_mode(i, n_modes):
    if not isinstance(i, (int, np.integer)) or isinstance(i, bool) or not 0 <= i < n_modes:
        raise ValueError(f"mode index {i!r} out of range for {n_modes} modes")


# -- state preparation ------------------------------------------------------

def vacuum(n=1):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"number of modes must be >= 1, got {n!r}")
    return GaussianState(np.zeros(2 * n), 0.5 * np.eye(2 * n))


def coherent(alpha):
    alpha = complex(alpha)
    return GaussianState(math.sqrt(2.0) * np.array([alpha.real, alpha.imag]), 0.5 * np.eye(2))


def tmsv(r):
    """Two-mode squeezed vacuum with x-correlations and p-anticorrelations."""
    check_range("r", r, 0.0)
    c = 0.5 * math.cosh(2 * r)
    s = 0.5 * math.sinh(2 * r)
    cov = np.array(
        [
            [c, 0, s, 0],
            [0, c, 0, -s],
            [s, 0, c, 0],
            [0, -s, 0, c],
        ]
    )
    return GaussianState(np.zeros(4), cov)


def product(*states):
    """Tensor product; modes are concatenated in argument order."""
    if not states:
        raise ValueError("product of zero states")
    mean = np.concatenate([s.mean for s in states])
    dim = mean.shape[0]
    cov = np.zeros((dim, dim))
    k = 0
    for s in states:
        d = s.mean.shape[0]
        cov[k:k + d, k:k + d] = s.cov
        k += d
    return GaussianState._from_channel(mean, cov)


# -- channels ---------------------------------------------------------------

def _apply(state, S, noise=None):
    """Apply ``mean -> S mean``, ``cov -> S cov S^T + noise``."""
    cov = S @ state.cov @ S.T
    if noise is not None:
        cov = cov + noise
    return GaussianState._from_channel(S @ state.mean, cov)


def _embed(n_modes, blocks):
    """Identity on 2n dims with the given ``{(row_mode, col_mode): 2x2}`` blocks."""
    S = np.eye(2 * n_modes)
    for (i, j), block in blocks.items():
        S[2 * i:2 * i + 2, 2 * j:2 * j + 2] = block
    return S


def apply_beamsplitter(state, i, j, t=0.5):
    """Mix modes ``i`` and ``j`` on a beamsplitter of power transmissivity ``t``.

    ``out_i = sqrt(t) in_i + sqrt(1-t) in_j`` and
    ``out_j = sqrt(t) in_j - sqrt(1-t) in_i``, identically for x and p.
    The inverse of ``apply_beamsplitter(s, i, j, t)`` is
    ``apply_beamsplitter(s, j, i, t)``.
    """
    n = state.n_modes
    _check_mode(i, n)
    _check_mode(j, n)
    if i == j:
        raise ValueError("beamsplitter needs two distinct modes")
    check_range("t", t, 0.0, 1.0)
    a, b = math.sqrt(t), math.sqrt(1.0 - t)
    I2 = np.eye(2)
    S = _embed(n, {(i, i): a * I2, (i, j): b * I2, (j, j): a * I2, (j, i): -b * I2})
    return _apply(state, S)


def rotation_matrix(theta):
    """``x -> cos x + sin p``, ``p -> cos p - sin x``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def apply_phase(state, i, theta):
    _check_mode(i, state.n_modes)
    return _apply(state, _embed(state.n_modes, {(i, i): rotation_matrix(float(theta))}))


def apply_loss(state, i, eta, xi=0.0):
    """Lossy channel of transmissivity ``eta`` whose environment has variance ``(1 + xi)/2``."""
    _check_mode(i, state.n_modes)
    check_range("eta", eta, 0.0, 1.0, low_open=True)
    check_range("xi", xi, 0.0)
    n = state.n_modes
    S = _embed(n, {(i, i): math.sqrt(eta) * np.eye(2)})
    noise = np.zeros((2 * n, 2 * n))
    noise[2 * i:2 * i + 2, 2 * i:2 * i + 2] = (1.0 - eta) * 0.5 * (1.0 + xi) * np.eye(2)
    return _apply(state, S, noise)


def apply_amplifier(state, i, nu):
    """Phase-insensitive amplifier of gain ``nu`` with a vacuum idler."""
    _check_mode(i, state.n_modes)
    check_range("nu", nu, 1.0)
    check_range("nu", nu, high=math.inf, high_open=True)
    n = state.n_modes
    S = _embed(n, {(i, i): math.sqrt(nu) * np.eye(2)})
    noise = np.zeros((2 * n, 2 * n))
    noise[2 * i:2 * i + 2, 2 * i:2 * i + 2] = (nu - 1.0) * 0.5 * np.eye(2)
    return _apply(state, S, noise)


# -- measurement ------------------------------------------------------------

class QuadratureSelection:
    """Commuting set of quadratures: at most one of x/p per mode.

    >>> QuadratureSelection([(0, "x"), (2, "p")]).indices(3)
    [0, 5]
    """

    def __init__(self, items):
        self.items = tuple((int(m), Quadrature.parse(q)) for m, q in items)
        modes = [m for m, _ in self.items]
        if not self.items:
            raise ValueError("empty quadrature selection")
        if len(set(modes)) != len(modes):
            raise ValueError(f"mode selected twice in {modes}; outcomes would not commute")

    def indices(self, n_modes):
        out = []
        for m, q in self.items:
            _check_mode(m, n_modes)
            out.append(2 * m + q.value)
        return out

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        return "QuadratureSelection([%s])" % ", ".join(f"({m}, {q.name})" for m, q in self.items)


def sample_quadratures(state, selection, rng, size=None):
    """Draw joint homodyne outcomes for commuting quadratures.

    Gaussian states have positive Wigner functions, so outcomes of commuting
    quadratures are distributed as the corresponding marginal normal law.

    Returns an array of shape ``(len(selection),)`` when ``size`` is None,
    else ``(size, len(selection))``.
    """
    if not isinstance(selection, QuadratureSelection):
        selection = QuadratureSelection(selection)
    idx = selection.indices(state.n_modes)
    mu = state.mean[idx]
    sub = state.cov[np.ix_(idx, idx)]
    chol = np.linalg.cholesky(sub)
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, len(idx)))
    out = mu + z @ chol.T
    return out[0] if size is None else out
