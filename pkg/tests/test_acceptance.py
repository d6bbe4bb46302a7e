"""Acceptance suite: one test per release criterion, at the stated tolerance.

Each test prints a single [ACCEPTANCE] pass line on success (visible with
``pytest -s`` or in the captured output); a failure of any assertion is the
corresponding criterion failing.
"""

import math
import time

import numpy as np
import pytest

from moranswitch.chain import (
    ChainParams,
    RateFunctions,
    SimConfig,
    distribution_moments,
    estimate_fpt,
    mfpt_exact,
    rate_tables,
    simulate,
    stationary_exact,
    total_variation,
)
from moranswitch.deterministic import (
    bistable_triple,
    critical_mus_case1,
    fixed_points,
)
from moranswitch.escape import (
    Quasipotential,
    compare_quasipotentials,
    mfpt_diffusion,
    mfpt_wkb,
    phi_prime,
    phi_second,
    psi_prime,
    psi_second,
    series_bound_check,
)
from moranswitch.games import PayoffMatrix
from moranswitch.moments import corrected_moments, lna_variance, skew_sign_case1

from conftest import random_positive_matrices

P11 = PayoffMatrix(4, 1, 3, 2)
MU1 = 1.0 / 12.0
MU2 = (6.0 - 4.0 * math.sqrt(2.0)) / 4.0


def _report(name: str) -> None:
    print(f"[ACCEPTANCE] {name}: PASS")


@pytest.fixture(scope="module")
def exact_pi_03():
    return stationary_exact(ChainParams(P11, 2000, 0.3))


@pytest.fixture(scope="module")
def mc_fpt_200():
    xm, _, xp = bistable_triple(P11, 0.06)
    params = ChainParams(P11, 200, 0.06)
    start, target = round(200 * xm), round(200 * xp)
    exact = mfpt_exact(params, start, target)
    est = estimate_fpt(params, start, target, realizations=1000, seed=7)
    return exact, est


def test_critical_mutation_rates():
    t0 = time.perf_counter()
    crit = critical_mus_case1(P11)
    assert crit.mu1 == pytest.approx(MU1, abs=1e-14)
    assert crit.mu2 == pytest.approx(MU2, abs=1e-14)
    # bracket the 3 -> 1 equilibrium-count change by bisection on mu
    lo, hi = 0.083, 0.087
    assert len(fixed_points(P11, lo)) == 3
    assert len(fixed_points(P11, hi)) == 1
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        if len(fixed_points(P11, mid)) == 3:
            lo = mid
        else:
            hi = mid
    elapsed = time.perf_counter() - t0
    assert hi - lo <= 1e-4
    assert lo <= MU2 <= hi
    assert elapsed < 1.0
    _report("critical mutation rates (closed forms + 3->1 scan bracket)")


def test_small_chain_oracles():
    neutral = ChainParams(PayoffMatrix(1, 1, 1, 1), 2, 0.5)
    pi = stationary_exact(neutral).probs
    assert np.max(np.abs(pi - np.array([0.25, 0.5, 0.25]))) <= 1e-12
    assert abs(mfpt_exact(neutral, 0, 2) - 8.0) <= 1e-12
    assert abs(mfpt_exact(neutral, 1, 2) - 6.0) <= 1e-12
    _report("small-chain oracle agreement (pi and hitting times)")


def test_monte_carlo_vs_exact(mc_fpt_200):
    exact, est = mc_fpt_200
    assert est.n_samples >= 1000
    assert est.ci_low <= exact <= est.ci_high
    params = ChainParams(P11, 200, 0.06)
    cfg = SimConfig(rounds=200_000, burn_in=20_000, realizations=100, seed=42)
    hist = simulate(params, cfg)
    tv = total_variation(hist, stationary_exact(params))
    assert tv <= 0.05
    _report(f"Monte Carlo vs exact (CI contains exact; TV={tv:.4f} <= 0.05)")


def test_asymptotics_error_shrinks_with_n():
    errors = []
    for n in (250, 500, 1000, 2000):
        xm, _, xp = bistable_triple(P11, 0.06)
        log_exact = math.log(mfpt_exact(ChainParams(P11, n, 0.06),
                                        round(n * xm), round(n * xp)))
        log_wkb = math.log(mfpt_wkb(P11, 0.06, n).tau_minus)
        errors.append(abs(log_wkb - log_exact) / log_exact)
    assert all(b < a for a, b in zip(errors, errors[1:])), errors
    _report("asymptotics vs exact: relative log error decreases in N "
            f"({', '.join(f'{e:.3f}' for e in errors)})")


def test_diffusion_wkb_indistinguishable():
    for mu in (0.06, 0.07, 0.08):
        log_d = math.log(mfpt_diffusion(P11, mu, 1000).tau_minus)
        log_w = math.log(mfpt_wkb(P11, mu, 1000).tau_minus)
        assert abs(log_d - log_w) <= 0.01 * log_w
    _report("diffusion vs WKB switching times indistinguishable (<= 1% in log)")


def test_quasipotential_closeness():
    xm, x0, _ = bistable_triple(P11, 0.05)
    grid = np.linspace(xm, x0, 501)
    table = compare_quasipotentials(P11, 0.05, grid)
    gap = np.abs(table["diff"]).max()
    scale = np.abs(table["psi"]).max()
    assert gap <= 1e-3 * scale
    applicable, ok = series_bound_check(P11, 0.05, grid)
    assert np.array_equal(applicable & ok, applicable)
    _report(f"quasipotential closeness (max|Phi-Psi|/max|Psi| = {gap/scale:.2e}; "
            "third-order derivative bound holds)")


def test_lna_and_corrected_moments(exact_pi_03):
    mean_exact, var_exact, _ = distribution_moments(exact_pi_03)
    lna = lna_variance(P11, 0.3, 2000, 0.5)
    corr = corrected_moments(P11, 0.3, 2000, 0.5)
    assert abs(lna.variance - var_exact) <= 0.10 * var_exact
    assert abs(corr.mean - mean_exact) < abs(lna.mean - mean_exact)
    _report("LNA variance within 10% of exact; corrected mean strictly better")


def test_skew_sign_table(exact_pi_03):
    third_03 = distribution_moments(exact_pi_03)[2]
    third_07 = distribution_moments(
        stationary_exact(ChainParams(P11, 2000, 0.7)))[2]
    assert np.sign(third_03) == -1 == skew_sign_case1(P11, 0.3)
    assert np.sign(third_07) == +1 == skew_sign_case1(P11, 0.7)
    _report("skew-sign table (exact third moments match the closed form)")


def test_symmetry_suite():
    sym = PayoffMatrix(2, 1, 1, 2)
    n, mu = 100, 0.08  # tau ~ 2e4 rounds keeps the Monte Carlo leg affordable
    params = ChainParams(sym, n, mu)
    pi = stationary_exact(params)
    assert np.max(np.abs(pi.probs - pi.probs[::-1])) <= 1e-12
    assert abs(distribution_moments(pi)[2]) <= 1e-12

    xm, _, xp = bistable_triple(sym, mu)
    start, target = round(n * xm), round(n * xp)
    tau_minus = mfpt_exact(params, start, target)
    tau_plus = mfpt_exact(params, target, start)
    assert tau_minus == pytest.approx(tau_plus, rel=1e-12)
    for method in (mfpt_diffusion, mfpt_wkb):
        rep = method(sym, mu, n)
        assert rep.tau_minus == pytest.approx(rep.tau_plus, rel=1e-9)
    est_minus = estimate_fpt(params, start, target, realizations=400, seed=3)
    est_plus = estimate_fpt(params, target, start, realizations=400, seed=4)
    assert est_minus.ci_low <= tau_minus <= est_minus.ci_high
    assert est_plus.ci_low <= tau_plus <= est_plus.ci_high

    # relabel invariance of the full pipeline on an asymmetric matrix
    mirrored = P11.relabeled()
    pa = ChainParams(P11, 120, 0.06)
    pb = ChainParams(mirrored, 120, 0.06)
    up_a, dn_a = rate_tables(pa)
    up_b, dn_b = rate_tables(pb)
    assert np.allclose(up_a, dn_b[::-1], atol=1e-15)
    assert np.allclose(stationary_exact(pa).probs,
                       stationary_exact(pb).probs[::-1], atol=1e-14)
    assert mfpt_exact(pa, 20, 85) == pytest.approx(
        mfpt_exact(pb, 100, 35), rel=1e-12)
    ra, rb = mfpt_wkb(P11, 0.06, 120), mfpt_wkb(mirrored, 0.06, 120)
    assert ra.tau_minus == pytest.approx(rb.tau_plus, rel=1e-9)
    _report("symmetry suite (case 1.3 mirror + full A<->B relabel invariance)")


def test_derivative_validation():
    h = 1e-5
    grid = np.linspace(0.01, 0.99, 101)
    rng = np.random.default_rng(424242)
    for payoff in random_positive_matrices(10, seed=31):
        mu = float(rng.uniform(0.03, 0.5))
        rf = RateFunctions(payoff, mu)
        checks = [
            (rf.up_dx, rf.up),
            (rf.dn_dx, rf.dn),
            (rf.drift_dx, rf.drift),
            (rf.drift_dxx, rf.drift_dx),
            (rf.sigma_dx, rf.sigma),
            (lambda x: psi_second(payoff, mu, x), lambda x: psi_prime(payoff, mu, x)),
            (lambda x: phi_second(payoff, mu, x), lambda x: phi_prime(payoff, mu, x)),
        ]
        for analytic, base in checks:
            an = np.asarray([analytic(float(x)) for x in grid])
            fd = np.asarray([(base(float(x) + h) - base(float(x) - h)) / (2 * h)
                             for x in grid])
            assert np.all(np.abs(fd - an) <= 1e-6 * (1.0 + np.abs(an)))
    _report("derivative validation (all analytic derivatives vs finite differences)")
