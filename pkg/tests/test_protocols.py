import math

import numpy as np
import pytest

from cvmdi import bounds as b
from cvmdi import protocols as pr
from cvmdi.bounds import PriorSpec
from cvmdi.streams import Streams


def sym(sigma):
    return PriorSpec.symmetric(sigma)


def ew(r=0.0, eta=1.0, sigma=1.0, **kw):
    return pr.EwConfig(r=r, eta_a=eta, eta_b=eta, prior_a=sym(sigma), prior_b=sym(sigma), **kw)


def within(est, target, n_se):
    return abs(est.value - target) < n_se * est.std_error


# -- alphabet ---------------------------------------------------------------------

def test_sample_pair_degenerate_prior():
    a, c = pr.sample_pair(sym(1e-9), sym(1e-9), np.random.default_rng(0))
    assert abs(a) < 1e-7 and abs(c) < 1e-7


def test_sample_pair_statistics():
    rng = np.random.default_rng(5)
    pa, pb = PriorSpec(1.5, 0.7), PriorSpec(2.0, 1.0)
    pairs = np.array([pr.sample_pair(pa, pb, rng) for _ in range(20_000)])
    ax, bp = pairs[:, 0].real, pairs[:, 1].imag
    n = len(pairs)
    target = 1.5**2 / 2
    assert abs(ax.var() - target) < 4 * target * math.sqrt(2 / n)
    cov = np.mean((ax - ax.mean()) * (bp - bp.mean()))
    assert abs(cov) < 4 * ax.std() * bp.std() / math.sqrt(n)


# -- entanglement witness rounds ---------------------------------------------------

def test_ew_round_vacuum_statistics():
    out = pr.run_ew_round(ew(), 0j, 0j, np.random.default_rng(1), size=100_000)
    a1, b1 = out[:, 0], out[:, 2]
    se = math.sqrt(0.5 / len(out))
    assert abs(a1.mean()) < 4 * se and abs(b1.mean()) < 4 * se
    d = a1 - b1
    assert abs(d.var() - 1.0) < 4 * math.sqrt(2 / len(d))


def test_ew_round_estimators_are_unbiased():
    alpha, beta = 0.7 - 0.2j, -0.4 + 0.9j
    state = pr.ew_output_state(ew(r=0.5, eta=0.7), alpha, beta)
    idx = pr._EW_SELECTION.indices(state.n_modes)
    a1, a2, b1, b2 = state.mean[idx]
    assert a1 - b1 == pytest.approx(alpha.real - beta.real, abs=1e-14)
    assert a2 + b2 == pytest.approx(alpha.imag + beta.imag, abs=1e-14)


def test_ew_round_zero_rescaling():
    alpha, beta = 0.3 + 0.4j, -0.2 + 0.1j
    out = pr.run_ew_round(ew(r=0.4, epsilon=0.0), alpha, beta, np.random.default_rng(0), size=10)
    assert np.all(out == 0)
    err = pr.ew_squared_errors(out, alpha, beta)
    np.testing.assert_allclose(err, (alpha.real - beta.real) ** 2 + (alpha.imag + beta.imag) ** 2)


def test_separable_round_hits_boundary():
    est = pr.estimate_mdiew(ew(r=0.0, sigma=1.0, n_alphabet=500, n_copies=200), 3)
    assert within(est, 2.0, 3)


# -- entanglement witness estimates -------------------------------------------------

def test_estimate_mdiew_lossy_tmsv():
    est = pr.estimate_mdiew(ew(r=0.2, eta=0.8, sigma=3.0, n_alphabet=1000, n_copies=100), 11)
    assert within(est, b.mdiew_expected(0.2, 0.8), 3)
    assert est.threshold == pytest.approx(1.8)
    assert est.sigma_star == pytest.approx(3.0)
    assert est.n_total == 100_000


@pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
def test_separable_never_violates(sigma):
    est = pr.estimate_mdiew(ew(r=0.0, sigma=sigma, n_alphabet=400, n_copies=100), 2)
    assert within(est, 2.0, 3)
    assert not est.violated


@pytest.mark.parametrize("sigma,r", [(1.0, 0.0), (2.0, 0.3)])
def test_optimal_rescaling_matches_closed_form(sigma, r):
    eps = b.epsilon_opt(sigma, r)
    est = pr.estimate_mdiew(ew(r=r, sigma=sigma, epsilon=eps, n_alphabet=1000, n_copies=100), 6)
    assert within(est, b.rescaled_error_expected(eps, sigma, r), 3)


def test_asymmetric_configuration_matches_closed_form():
    cfg = pr.EwConfig(
        r=0.4, eta_a=0.9, eta_b=0.6, prior_a=PriorSpec(2.0, 1.2), prior_b=PriorSpec(0.8, 1.5),
        epsilon=0.8, phase_var_1=0.02, phase_var_2=0.01, phase_var_3=0.03, n_alphabet=2000, n_copies=100,
    )
    est = pr.estimate_mdiew(cfg, 8)
    assert within(est, cfg.expected(), 4)


@pytest.mark.parametrize("r,eta,sigma", [(0.3, 0.9, 3.0), (0.8, 0.6, 2.0)])
def test_detectable_points_are_detected(r, eta, sigma):
    assert b.ew_detectable(r, eta, sigma)
    est = pr.estimate_mdiew(ew(r=r, eta=eta, sigma=sigma, n_alphabet=10_000, n_copies=100), 21)
    assert est.violated


def test_violation_is_derived():
    est = pr.WitnessEstimate(1.0, 0.1, 1.35, 1.2, 100, k=3)
    assert est.violated
    assert not pr.WitnessEstimate(1.0, 0.1, 1.3, 1.2, 100, k=3).violated
    assert est.as_dict()["violated"] is True


def test_config_validation():
    from cvmdi._validation import InfeasibleParameterError

    with pytest.raises(InfeasibleParameterError):
        ew(r=-0.1)
    with pytest.raises(InfeasibleParameterError):
        ew(eta=0.0)
    with pytest.raises(InfeasibleParameterError):
        ew(n_alphabet=0)
    with pytest.raises(InfeasibleParameterError):
        pr.MemoryConfig(eta=0.8, nu=0.5)
    with pytest.raises(ValueError):
        pr.MemoryConfig(eta=0.8, convention="other")


# -- memory witness ------------------------------------------------------------------

def test_memory_round_ideal_channel():
    cfg = pr.MemoryConfig(eta=1.0)
    out = pr.run_memory_round(cfg, 0j, 0j, np.random.default_rng(2), size=100_000)
    total = out[:, 0].var() + out[:, 1].var()
    assert abs(total - 1.0) < 4 * math.sqrt(1 / len(out))


def test_memory_round_targets():
    alpha, beta = 0.5 + 0.3j, -0.2 + 0.6j
    for conv in pr.CONVENTIONS:
        cfg = pr.MemoryConfig(eta=0.7, xi=0.1, nu=2.0, convention=conv)
        state = pr.memory_output_state(cfg, alpha, beta)
        scale = 1 / math.sqrt(cfg.physical_gain * cfg.eta)
        means = scale * state.mean[pr._MEM_SELECTION.indices(2)]
        np.testing.assert_allclose(means, pr.memory_targets(cfg, alpha, beta), atol=1e-14)


def test_memory_witness_lossy():
    est = pr.estimate_mdiep(pr.MemoryConfig(eta=0.8, prior=sym(10.0), n_alphabet=1000, n_copies=100), 4)
    assert within(est, 1.25, 3)
    assert est.threshold == pytest.approx(2 * 100 / 101)
    assert est.violated


@pytest.mark.parametrize("sigma", [0.5, 2.0, 20.0])
def test_memory_witness_too_lossy(sigma):
    est = pr.estimate_mdiep(pr.MemoryConfig(eta=0.45, prior=sym(sigma), n_alphabet=400, n_copies=100), 4)
    assert est.value == pytest.approx(1 / 0.45, abs=4 * est.std_error)
    assert not est.violated


def test_memory_witness_uninformative_prior():
    est = pr.estimate_mdiep(pr.MemoryConfig(eta=1.0, prior=sym(0.01), n_alphabet=200, n_copies=50), 4)
    assert not est.violated


def test_memory_gain_invariance():
    values = [
        pr.estimate_mdiep(pr.MemoryConfig(eta=0.8, nu=nu, prior=sym(2.0), n_alphabet=1000, n_copies=100), 9)
        for nu in (1.0, 1.5, 2.0, 4.0)
    ]
    se = max(v.std_error for v in values)
    assert max(v.value for v in values) - min(v.value for v in values) < 4 * se


def test_amplified_reference_arm_depends_on_gain():
    base = pr.estimate_mdiep(pr.MemoryConfig(eta=0.8, nu=2.0, prior=sym(2.0), n_alphabet=500, n_copies=100), 9)
    amp = pr.estimate_mdiep(
        pr.MemoryConfig(eta=0.8, nu=2.0, prior=sym(2.0), n_alphabet=500, n_copies=100, beta_matching="amplifier"), 9
    )
    assert amp.value - base.value > 4 * math.hypot(amp.std_error, base.std_error)


def test_memory_conventions_agree():
    kw = dict(eta=0.7, xi=0.1, prior=sym(1.5), n_alphabet=1000, n_copies=100)
    d = pr.estimate_mdiep(pr.MemoryConfig(convention="diff", **kw), 12)
    s = pr.estimate_mdiep(pr.MemoryConfig(convention="sum", **kw), 13)
    assert abs(d.value - s.value) < 4 * math.hypot(d.std_error, s.std_error)


# -- device-dependent baseline -------------------------------------------------------------

def test_simon_duan_vacuum():
    est = pr.estimate_simon_duan(0.0, 1.0, 1.0, 200_000, 1)
    assert within(est, 2.0, 3)
    assert not est.violated


def test_simon_duan_false_positive():
    est = pr.estimate_simon_duan(0.0, 1.0, 0.9, 200_000, 1)
    assert within(est, 1.62, 3)
    assert est.violated


def test_simon_duan_lossy_tmsv():
    est = pr.estimate_simon_duan(0.5, 0.8, 1.0, 200_000, 1)
    assert within(est, b.simon_duan_expected(0.5, 0.8), 3)


# -- reproducibility and statistics ------------------------------------------------------------

def test_same_seed_same_estimate():
    cfg = ew(r=0.3, eta=0.9, sigma=2.0, phase_var_1=0.01, n_alphabet=100, n_copies=20, seed=77)
    assert pr.estimate_mdiew(cfg) == pr.estimate_mdiew(cfg)
    assert pr.estimate_mdiew(cfg) == pr.estimate_mdiew(cfg, workers=2)
    assert pr.estimate_mdiew(cfg) != pr.estimate_mdiew(cfg, 78)


def test_blocks_match_regardless_of_split():
    cfg = pr.MemoryConfig(eta=0.8, n_alphabet=70, n_copies=10)
    s = Streams(3)
    serial = pr._run_blocks(pr._memory_block, cfg, s, None)
    parallel = pr._run_blocks(pr._memory_block, cfg, s, 3)
    assert np.array_equal(serial, parallel)


def test_standard_error_coverage():
    cfg = ew(r=0.2, eta=0.8, sigma=1.5, n_alphabet=100, n_copies=20)
    target = cfg.expected()
    hits = [abs(e.value - target) < 2 * e.std_error for e in (pr.estimate_mdiew(cfg, s) for s in range(50))]
    assert 0.90 <= np.mean(hits) <= 0.99
