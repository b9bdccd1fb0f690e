"""Monte Carlo simulation of the MDI entanglement and memory witnesses.

Both protocols run on the covariance-matrix engine in :mod:`cvmdi.gaussian`.
An estimate is built from ``n_alphabet`` independently drawn coherent-state
pairs, each measured ``n_copies`` times with fresh quantum noise. The standard
error is computed from the spread of the per-pair means, since rounds sharing
a pair are not independent with respect to the prior.

Work is split into fixed blocks of pairs; every block draws from its own
deterministic sub-streams, so results do not depend on the number of workers.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from . import gaussian as g
from ._validation import InfeasibleParameterError, check_positive_int, check_range
from .bounds import (
    PriorSpec,
    ew_error_expected,
    locc_threshold,
    mdiep_expected,
)
from .streams import as_streams

BLOCK_SIZE = 32
DEFAULT_K = 3.0
CONVENTIONS = ("diff", "sum")
BETA_MATCHING = ("postprocess", "amplifier")


@dataclass(frozen=True)
class EwConfig:
    """One MDI entanglement-witness experiment.

    Phase noise is Gaussian with the given variances (rad^2) and is redrawn
    for every alphabet pair, i.e. it is constant over the copies of a pair.
    """

    r: float
    eta_a: float = 1.0
    eta_b: float = 1.0
    prior_a: PriorSpec = field(default_factory=lambda: PriorSpec(1.0, 1.0))
    prior_b: PriorSpec = field(default_factory=lambda: PriorSpec(1.0, 1.0))
    epsilon: float = 1.0
    phase_var_1: float = 0.0
    phase_var_2: float = 0.0
    phase_var_3: float = 0.0
    n_alphabet: int = 1000
    n_copies: int = 100
    seed: int = 0

    def __post_init__(self):
        check_range("r", self.r, 0.0)
        check_range("eta_a", self.eta_a, 0.0, 1.0, low_open=True)
        check_range("eta_b", self.eta_b, 0.0, 1.0, low_open=True)
        check_range("epsilon", self.epsilon, 0.0)
        for name in ("phase_var_1", "phase_var_2", "phase_var_3"):
            check_range(name, getattr(self, name), 0.0)
        check_positive_int("n_alphabet", self.n_alphabet)
        check_positive_int("n_copies", self.n_copies)
        if not isinstance(self.prior_a, PriorSpec) or not isinstance(self.prior_b, PriorSpec):
            raise TypeError("priors must be PriorSpec instances")

    @property
    def phase_vars(self):
        return (self.phase_var_1, self.phase_var_2, self.phase_var_3)

    def expected(self):
        return ew_error_expected(
            self.epsilon, self.r, self.eta_a, self.eta_b, self.prior_a, self.prior_b, *self.phase_vars
        )


@dataclass(frozen=True)
class MemoryConfig:
    """One MDI memory-certification experiment.

    ``convention`` picks the joint variables: ``"diff"`` targets
    ``(alpha_x - beta_x, alpha_p + beta_p)``, ``"sum"`` targets
    ``(alpha_x + beta_x, alpha_p - beta_p)``.

    ``beta_matching`` controls gains with ``nu * eta > 1``. With
    ``"postprocess"`` the physical amplifier is capped at ``1 / eta`` and the
    remaining gain is a noiseless rescaling of the recorded outcomes, which
    the final ``1 / sqrt(nu eta)`` normalisation cancels. With
    ``"amplifier"`` the reference arm is amplified to gain ``nu * eta``
    instead, which adds idler noise and makes the witness depend on ``nu``.
    """

    eta: float
    xi: float = 0.0
    nu: float = 1.0
    prior: PriorSpec = field(default_factory=lambda: PriorSpec(1.0, 1.0))
    n_alphabet: int = 1000
    n_copies: int = 100
    seed: int = 0
    convention: str = "diff"
    beta_matching: str = "postprocess"

    def __post_init__(self):
        check_range("eta", self.eta, 0.0, 1.0, low_open=True)
        check_range("xi", self.xi, 0.0)
        check_range("nu", self.nu, 1.0)
        check_positive_int("n_alphabet", self.n_alphabet)
        check_positive_int("n_copies", self.n_copies)
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if self.beta_matching not in BETA_MATCHING:
            raise ValueError(f"beta_matching must be one of {BETA_MATCHING}")
        if not isinstance(self.prior, PriorSpec):
            raise TypeError("prior must be a PriorSpec instance")

    @property
    def physical_gain(self):
        if self.beta_matching == "postprocess":
            return min(self.nu, 1.0 / self.eta)
        return self.nu

    def expected(self, variant="minus"):
        return mdiep_expected(self.eta, self.xi, variant)


@dataclass(frozen=True)
class WitnessEstimate:
    value: float
    std_error: float
    threshold: float
    sigma_star: float
    n_total: int
    k: float = DEFAULT_K

    @property
    def violated(self):
        return self.value + self.k * self.std_error < self.threshold

    def as_dict(self):
        d = asdict(self)
        d["violated"] = self.violated
        return d


def summarize(per_pair_means, threshold, sigma_star, n_total, k=DEFAULT_K):
    """Mean and standard error from per-pair means."""
    m = np.asarray(per_pair_means, dtype=float)
    se = float(np.std(m, ddof=1) / math.sqrt(m.size)) if m.size > 1 else math.inf
    return WitnessEstimate(float(np.mean(m)), se, float(threshold), float(sigma_star), int(n_total), float(k))


def _blocks(n_alphabet):
    return [(b, min(BLOCK_SIZE, n_alphabet - b * BLOCK_SIZE)) for b in range(-(-n_alphabet // BLOCK_SIZE))]


def _run_blocks(func, cfg, streams, workers):
    blocks = _blocks(cfg.n_alphabet)
    args = [(cfg, streams, b, n) for b, n in blocks]
    if workers and workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, *zip(*args)))
    else:
        parts = [func(*a) for a in args]
    return np.concatenate(parts)


# -- entanglement witness -------------------------------------------------------

def sample_pair(prior_a, prior_b, rng):
    """Draw ``(alpha, beta)`` independently from the two priors."""
    return complex(prior_a.sample(rng)), complex(prior_b.sample(rng))


def sample_phases(cfg, rng):
    return tuple(float(rng.normal(0.0, math.sqrt(v))) if v > 0 else 0.0 for v in cfg.phase_vars)


# mode layout of one entanglement-witness round
_EW_A, _EW_TA, _EW_TB, _EW_B = 0, 1, 2, 3
_EW_SELECTION = g.QuadratureSelection([(_EW_TA, "x"), (_EW_A, "p"), (_EW_TB, "x"), (_EW_B, "p")])


def ew_output_state(cfg, alpha, beta, phases=(0.0, 0.0, 0.0)):
    """Four-mode state just before the station detectors."""
    th1, th2, th3 = phases
    state = g.product(g.coherent(alpha), g.tmsv(cfg.r), g.coherent(beta))
    if th3:
        state = g.apply_phase(state, _EW_TB, th3)
    state = g.apply_loss(state, _EW_TA, cfg.eta_a)
    state = g.apply_loss(state, _EW_TB, cfg.eta_b)
    if th1:
        state = g.apply_phase(state, _EW_TA, th1)
        state = g.apply_phase(state, _EW_TB, th1)
    if th2:
        state = g.apply_phase(state, _EW_A, th2)
        state = g.apply_phase(state, _EW_B, th2)
    # TMSV mode enters the transmitted port: x on (T + c)/sqrt2, p on (c - T)/sqrt2
    state = g.apply_beamsplitter(state, _EW_TA, _EW_A, 0.5)
    state = g.apply_beamsplitter(state, _EW_TB, _EW_B, 0.5)
    return state


def run_ew_round(cfg, alpha, beta, rng, size=None, phases=None):
    """Outcomes ``(a1, a2, b1, b2)`` of one round, or ``size`` rounds sharing
    the same pair and phases.

    With ``epsilon = 1`` and no noise, ``E[a1 - b1] = alpha_x - beta_x`` and
    ``E[a2 + b2] = alpha_p + beta_p``.
    """
    if phases is None:
        phases = sample_phases(cfg, rng)
    state = ew_output_state(cfg, alpha, beta, phases)
    return cfg.epsilon * g.sample_quadratures(state, _EW_SELECTION, rng, size)


def ew_squared_errors(outcomes, alpha, beta):
    a1, a2, b1, b2 = np.moveaxis(np.asarray(outcomes), -1, 0)
    gx = alpha.real - beta.real
    gp = alpha.imag + beta.imag
    return (a1 - b1 - gx) ** 2 + (a2 + b2 - gp) ** 2


def _linear_response(build, selection, *fixed):
    """Output means per unit input amplitude, plus the zero-input state.

    Every channel here is linear in the means and leaves the covariance
    independent of the inputs, so one state serves a whole block.
    """
    zero = build(*fixed, 0j, 0j)
    idx = selection.indices(zero.n_modes)
    units = ((1, 0), (1j, 0), (0, 1), (0, 1j))
    gain = np.column_stack([build(*fixed, a, b).mean[idx] for a, b in units])
    return gain, zero


def _ew_block(cfg, streams, block, n_pairs):
    alphabet = streams.generator("alphabet", block)
    quantum = streams.generator("quantum", block)
    phase = streams.generator("phase", block)
    means = np.empty(n_pairs)
    if any(cfg.phase_vars):
        for k in range(n_pairs):
            alpha, beta = sample_pair(cfg.prior_a, cfg.prior_b, alphabet)
            out = run_ew_round(cfg, alpha, beta, quantum, size=cfg.n_copies, phases=sample_phases(cfg, phase))
            means[k] = ew_squared_errors(out, alpha, beta).mean()
        return means
    gain, zero = _linear_response(lambda a, b: ew_output_state(cfg, a, b), _EW_SELECTION)
    for k in range(n_pairs):
        alpha, beta = sample_pair(cfg.prior_a, cfg.prior_b, alphabet)
        noise = g.sample_quadratures(zero, _EW_SELECTION, quantum, cfg.n_copies)
        shift = gain @ [alpha.real, alpha.imag, beta.real, beta.imag]
        means[k] = ew_squared_errors(cfg.epsilon * (noise + shift), alpha, beta).mean()
    return means


def estimate_mdiew(cfg, rng=None, k=DEFAULT_K, workers=None):
    """Monte Carlo estimate of the summed error of the joint-amplitude estimators.

    ``rng`` may be a :class:`~cvmdi.streams.Streams`, an integer seed or
    ``None`` (use ``cfg.seed``).
    """
    streams = as_streams(rng, cfg.seed)
    means = _run_blocks(_ew_block, cfg, streams, workers)
    report = locc_threshold(cfg.prior_a, cfg.prior_b)
    return summarize(means, report.threshold, report.sigma_star, cfg.n_alphabet * cfg.n_copies, k)


# -- memory witness -------------------------------------------------------------

def memory_output_state(cfg, alpha, beta):
    """Two-mode state at the Bell measurement: mode 0 reference arm, mode 1 memory arm."""
    nu = cfg.physical_gain
    eta = cfg.eta
    a = g.apply_loss(g.coherent(alpha), 0, eta, cfg.xi)
    if nu > 1.0:
        a = g.apply_amplifier(a, 0, nu)
    b = g.coherent(beta)
    if cfg.convention == "diff":
        b = g.apply_phase(b, 0, math.pi)
    match = nu * eta
    if match < 1.0:
        b = g.apply_loss(b, 0, match)
    elif match > 1.0:
        b = g.apply_amplifier(b, 0, match)
    # x read on (b + a)/sqrt2, p on (a - b)/sqrt2
    return g.apply_beamsplitter(g.product(b, a), 0, 1, 0.5)


_MEM_SELECTION = g.QuadratureSelection([(0, "x"), (1, "p")])


def memory_targets(cfg, alpha, beta):
    if cfg.convention == "diff":
        return alpha.real - beta.real, alpha.imag + beta.imag
    return alpha.real + beta.real, alpha.imag - beta.imag


def run_memory_round(cfg, alpha, beta, rng, size=None):
    """Bell-measurement outcomes ``(g_x, g_p)`` normalised to the joint amplitudes."""
    state = memory_output_state(cfg, alpha, beta)
    scale = 1.0 / math.sqrt(cfg.physical_gain * cfg.eta)
    return scale * g.sample_quadratures(state, _MEM_SELECTION, rng, size)


def _memory_block(cfg, streams, block, n_pairs):
    alphabet = streams.generator("alphabet", block)
    quantum = streams.generator("quantum", block)
    means = np.empty(n_pairs)
    gain, zero = _linear_response(lambda a, b: memory_output_state(cfg, a, b), _MEM_SELECTION)
    scale = 1.0 / math.sqrt(cfg.physical_gain * cfg.eta)
    for k in range(n_pairs):
        alpha, beta = sample_pair(cfg.prior, cfg.prior, alphabet)
        noise = g.sample_quadratures(zero, _MEM_SELECTION, quantum, cfg.n_copies)
        out = scale * (noise + gain @ [alpha.real, alpha.imag, beta.real, beta.imag])
        gx, gp = memory_targets(cfg, alpha, beta)
        means[k] = ((out[:, 0] - gx) ** 2 + (out[:, 1] - gp) ** 2).mean()
    return means


def estimate_mdiep(cfg, rng=None, k=DEFAULT_K, workers=None):
    streams = as_streams(rng, cfg.seed)
    means = _run_blocks(_memory_block, cfg, streams, workers)
    report = locc_threshold(cfg.prior, cfg.prior)
    return summarize(means, report.threshold, report.sigma_star, cfg.n_alphabet * cfg.n_copies, k)


# -- device-dependent baseline -----------------------------------------------------

def estimate_simon_duan(r, eta, epsilon, n_rounds, rng=None, k=DEFAULT_K):
    """Trusted-homodyne Simon-Duan sum on a lossy TMSV with rescaled outcomes.

    Half the rounds read x on both modes, the other half p on both modes.
    Returns a :class:`WitnessEstimate` against the separable bound 2.
    """
    check_range("epsilon", epsilon, 0.0)
    n_rounds = check_positive_int("n_rounds", n_rounds)
    if n_rounds < 4:
        raise InfeasibleParameterError("need at least 4 rounds")
    gen = as_streams(rng, 0).generator("quantum")
    state = g.apply_loss(g.apply_loss(g.tmsv(r), 0, eta), 1, eta)
    nx = n_rounds // 2
    xs = epsilon * g.sample_quadratures(state, [(0, "x"), (1, "x")], gen, nx)
    ps = epsilon * g.sample_quadratures(state, [(0, "p"), (1, "p")], gen, n_rounds - nx)
    u = xs[:, 0] - xs[:, 1]
    v = ps[:, 0] + ps[:, 1]
    value = 0.0
    var_se = 0.0
    for w in (u, v):
        dev2 = (w - w.mean()) ** 2
        value += dev2.sum() / (w.size - 1)
        var_se += dev2.var(ddof=1) / w.size
    return WitnessEstimate(float(value), math.sqrt(var_se), 2.0, math.inf, n_rounds, k)
