"""Independent phase-space check of the protocol simulations.

Every state used by the protocols is Gaussian, so its Wigner function is a
proper normal density. For linear optics the Wigner function is transported
along the classical input-output relations of the quadratures, and a
homodyne outcome of commuting quadratures has exactly the marginal law of the
corresponding phase-space coordinates. Sampling input points and pushing
them through scalar beamsplitter, loss, gain and rotation relations therefore
reproduces the joint outcome distribution without any covariance algebra.

Nothing here imports :mod:`cvmdi.gaussian`; only the random streams and the
prior description are shared with the engine path.
"""
import math

import numpy as np

from .bounds import locc_threshold
from .protocols import BLOCK_SIZE, DEFAULT_K, summarize
from .streams import Streams, as_streams

ORACLE_KEY = 1


def oracle_streams(rng, seed):
    """Oracle family of streams, disjoint from the engine family of the same seed."""
    return as_streams(rng, seed).named("oracle").child(ORACLE_KEY)


def _vac(rng, shape, var=0.5):
    return rng.normal(0.0, math.sqrt(var), shape)


def _coherent(rng, amp, shape):
    """Wigner samples of |amp>: mean sqrt2*(Re, Im), variance 1/2."""
    amp = np.asarray(amp)[:, None]
    x = math.sqrt(2.0) * amp.real + _vac(rng, shape)
    p = math.sqrt(2.0) * amp.imag + _vac(rng, shape)
    return x, p


def _tmsv(rng, r, shape):
    """Two squeezed vacua interfered on a balanced splitter."""
    x1, x2, p1, p2 = (_vac(rng, shape) for _ in range(4))
    g, h = math.exp(r), math.exp(-r)
    xa = (g * x1 + h * x2) / math.sqrt(2.0)
    xb = (g * x1 - h * x2) / math.sqrt(2.0)
    pa = (h * p1 + g * p2) / math.sqrt(2.0)
    pb = (h * p1 - g * p2) / math.sqrt(2.0)
    return xa, pa, xb, pb


def _rotate(x, p, theta):
    c, s = np.cos(theta), np.sin(theta)
    return c * x + s * p, c * p - s * x


def _lose(rng, x, p, eta, xi=0.0):
    var = 0.5 * (1.0 + xi)
    return (
        math.sqrt(eta) * x + math.sqrt(1.0 - eta) * _vac(rng, x.shape, var),
        math.sqrt(eta) * p + math.sqrt(1.0 - eta) * _vac(rng, p.shape, var),
    )


def _amplify(rng, x, p, nu):
    # the idler enters phase-conjugated
    return (
        math.sqrt(nu) * x + math.sqrt(nu - 1.0) * _vac(rng, x.shape),
        math.sqrt(nu) * p - math.sqrt(nu - 1.0) * _vac(rng, p.shape),
    )


def _prior_draw(prior, rng, n):
    ax = rng.normal(0.0, prior.sigma_x / math.sqrt(2.0), n)
    ap = rng.normal(0.0, prior.sigma_p / math.sqrt(2.0), n)
    return ax + 1j * ap


def _ew_block(cfg, streams, block, n_pairs):
    alphabet = streams.generator("alphabet", block)
    noise = streams.generator("quantum", block)
    phase_rng = streams.generator("phase", block)
    alpha = _prior_draw(cfg.prior_a, alphabet, n_pairs)
    beta = _prior_draw(cfg.prior_b, alphabet, n_pairs)
    th = [
        phase_rng.normal(0.0, math.sqrt(v), (n_pairs, 1)) if v > 0 else np.zeros((n_pairs, 1))
        for v in cfg.phase_vars
    ]
    shape = (n_pairs, cfg.n_copies)

    xa, pa = _coherent(noise, alpha, shape)
    xb, pb = _coherent(noise, beta, shape)
    xA, pA, xB, pB = _tmsv(noise, cfg.r, shape)
    xB, pB = _rotate(xB, pB, th[2])
    xA, pA = _lose(noise, xA, pA, cfg.eta_a)
    xB, pB = _lose(noise, xB, pB, cfg.eta_b)
    xA, pA = _rotate(xA, pA, th[0])
    xB, pB = _rotate(xB, pB, th[0])
    xa, pa = _rotate(xa, pa, th[1])
    xb, pb = _rotate(xb, pb, th[1])

    e = cfg.epsilon / math.sqrt(2.0)
    a1, a2 = e * (xA + xa), e * (pa - pA)
    b1, b2 = e * (xB + xb), e * (pb - pB)
    gx = (alpha.real - beta.real)[:, None]
    gp = (alpha.imag + beta.imag)[:, None]
    return ((a1 - b1 - gx) ** 2 + (a2 + b2 - gp) ** 2).mean(axis=1)


def _memory_block(cfg, streams, block, n_pairs):
    alphabet = streams.generator("alphabet", block)
    noise = streams.generator("quantum", block)
    alpha = _prior_draw(cfg.prior, alphabet, n_pairs)
    beta = _prior_draw(cfg.prior, alphabet, n_pairs)
    shape = (n_pairs, cfg.n_copies)
    nu = cfg.physical_gain
    eta = cfg.eta

    xa, pa = _coherent(noise, alpha, shape)
    sign = -1.0 if cfg.convention == "diff" else 1.0
    xb, pb = _coherent(noise, sign * beta, shape)
    # memory, then Eve's gain
    xa, pa = _lose(noise, xa, pa, eta, cfg.xi)
    if nu > 1.0:
        xa, pa = _amplify(noise, xa, pa, nu)
    match = nu * eta
    if match < 1.0:
        xb, pb = _lose(noise, xb, pb, match)
    elif match > 1.0:
        xb, pb = _amplify(noise, xb, pb, match)
    norm = 1.0 / math.sqrt(2.0 * match)
    gx_out = norm * (xa + xb)
    gp_out = norm * (pa - pb)
    if cfg.convention == "diff":
        tx, tp = alpha.real - beta.real, alpha.imag + beta.imag
    else:
        tx, tp = alpha.real + beta.real, alpha.imag - beta.imag
    return ((gx_out - tx[:, None]) ** 2 + (gp_out - tp[:, None]) ** 2).mean(axis=1)


def _collect(block_fn, cfg, streams):
    parts = []
    for b in range(-(-cfg.n_alphabet // BLOCK_SIZE)):
        n = min(BLOCK_SIZE, cfg.n_alphabet - b * BLOCK_SIZE)
        parts.append(block_fn(cfg, streams, b, n))
    return np.concatenate(parts)


def oracle_ew_witness(cfg, rng=None, k=DEFAULT_K):
    """Entanglement-witness estimate from direct Wigner sampling.

    Same estimand and block structure as :func:`cvmdi.protocols.estimate_mdiew`,
    but drawn from the oracle stream family by default.
    """
    streams = oracle_streams(rng, cfg.seed) if not isinstance(rng, Streams) else rng
    means = _collect(_ew_block, cfg, streams)
    report = locc_threshold(cfg.prior_a, cfg.prior_b)
    return summarize(means, report.threshold, report.sigma_star, cfg.n_alphabet * cfg.n_copies, k)


def oracle_memory_witness(cfg, rng=None, k=DEFAULT_K):
    streams = oracle_streams(rng, cfg.seed) if not isinstance(rng, Streams) else rng
    means = _collect(_memory_block, cfg, streams)
    report = locc_threshold(cfg.prior, cfg.prior)
    return summarize(means, report.threshold, report.sigma_star, cfg.n_alphabet * cfg.n_copies, k)


def combined_z(a, b):
    """Separation of two estimates in units of their combined standard error."""
    se = math.hypot(a.std_error, b.std_error)
    return abs(a.value - b.value) / se if se > 0 else (0.0 if a.value == b.value else math.inf)
