import math

import numpy as np
import pytest

from moranswitch.chain import (
    ChainParams,
    Distribution,
    FptEstimate,
    RateFunctions,
    RoundCapExceeded,
    SimConfig,
    distribution_moments,
    estimate_fpt,
    heatmap,
    mfpt_exact,
    rate_down,
    rate_tables,
    rate_up,
    simulate,
    stationary_exact,
    total_variation,
)
from moranswitch.games import PayoffMatrix

from conftest import finite_difference, random_positive_matrices

NEUTRAL = ChainParams(PayoffMatrix(1, 1, 1, 1), 2, 0.5)


# -- rates ---------------------------------------------------------------------


def test_rate_boundaries():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 10, 0.07)
    assert rate_up(params, 0) == 0.07
    assert rate_down(params, 0) == 0.0
    assert rate_down(params, 10) == 0.07
    assert rate_up(params, 10) == 0.0


def test_rate_value_example():
    # fA = fB = 2.5 at i=2, N=4, so w_up = (5/10)*(2/4) = 1/4
    rf = RateFunctions(PayoffMatrix(4, 1, 3, 2), 0.0)
    assert rf.up(0.5) == pytest.approx(0.25, abs=1e-15)
    assert rf.dn(0.5) == pytest.approx(0.25, abs=1e-15)


def test_rate_range_invariants():
    for payoff in random_positive_matrices(10):
        for mu in (0.02, 0.5, 0.93):
            params = ChainParams(payoff, 57, mu)
            up, dn = rate_tables(params)
            assert np.all(up >= 0) and np.all(dn >= 0)
            assert np.all(up + dn <= 1 + 1e-14)
            assert up[-1] == 0.0 and dn[0] == 0.0


def test_scaling_law_exact():
    # one round = one time unit: w(i) and Omega(i/N) are the same quantity
    for payoff in random_positive_matrices(5, seed=5):
        params = ChainParams(payoff, 101, 0.04)
        rf = RateFunctions(payoff, 0.04)
        up, dn = rate_tables(params)
        for i in range(params.N + 1):
            assert abs(up[i] - rf.up(i / params.N)) <= 1e-14
            assert abs(dn[i] - rf.dn(i / params.N)) <= 1e-14


def test_scaled_rate_boundary_examples():
    rf = RateFunctions(PayoffMatrix(4, 1, 3, 2), 0.11)
    assert rf.up(0.0) == 0.11
    assert rf.dn(1.0) == 0.11


def test_rate_derivatives_match_finite_differences():
    rf = RateFunctions(PayoffMatrix(4, 1, 3, 2), 0.07)
    for x in np.linspace(0.05, 0.95, 19):
        assert rf.up_dx(x) == pytest.approx(finite_difference(rf.up, x), rel=1e-6, abs=1e-9)
        assert rf.dn_dx(x) == pytest.approx(finite_difference(rf.dn, x), rel=1e-6, abs=1e-9)
        assert rf.sigma_dx(x) == pytest.approx(finite_difference(rf.sigma, x), rel=1e-6, abs=1e-9)


def test_state_validation():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 10, 0.1)
    with pytest.raises(ValueError):
        rate_up(params, 11)
    with pytest.raises(ValueError):
        rate_down(params, -1)


def test_params_validation():
    with pytest.raises(ValueError):
        ChainParams(PayoffMatrix(4, 1, 3, 2), 1, 0.1)
    with pytest.raises(ValueError):
        ChainParams(PayoffMatrix(4, 1, 3, 2), 10, 0.0)
    with pytest.raises(ValueError):
        ChainParams(PayoffMatrix(4, 0.0, 3, 2), 10, 0.1)


# -- stationary oracle -----------------------------------------------------------


def test_stationary_neutral_hand_value():
    pi = stationary_exact(NEUTRAL)
    assert np.allclose(pi.probs, [0.25, 0.5, 0.25], atol=1e-15)


def test_stationary_detailed_balance():
    for payoff in random_positive_matrices(6, seed=17):
        params = ChainParams(payoff, 60, 0.13)
        pi = stationary_exact(params).probs
        up, dn = rate_tables(params)
        flux_up = pi[:-1] * up[:-1]
        flux_dn = pi[1:] * dn[1:]
        scale = np.maximum(flux_up, flux_dn)
        assert np.all(np.abs(flux_up - flux_dn) <= 1e-10 * scale)


def test_stationary_symmetry_case13():
    pi = stationary_exact(ChainParams(PayoffMatrix(2, 1, 1, 2), 40, 0.04)).probs
    assert np.allclose(pi, pi[::-1], atol=1e-14)


def test_stationary_modes_match_branches():
    from moranswitch.deterministic import case1_branches

    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 2000, 0.02)
    pi = stationary_exact(params).probs
    br = case1_branches(params.payoff, 0.02)
    mid = 1000
    mode_lo = np.argmax(pi[:mid]) / params.N
    mode_hi = (mid + np.argmax(pi[mid:])) / params.N
    # the finite-size prefactor shifts the argmax a fixed number of cells
    # (measured ~2.3 here), so the modes track the branches at O(1/N)
    assert abs(mode_lo - br.x_minus) <= 4 / params.N
    assert abs(mode_hi - br.x_plus) <= 4 / params.N


def test_relabel_invariance_of_chain():
    payoff = PayoffMatrix(4, 1, 3, 2)
    params = ChainParams(payoff, 37, 0.09)
    mirrored = ChainParams(payoff.relabeled(), 37, 0.09)
    up, dn = rate_tables(params)
    up_m, dn_m = rate_tables(mirrored)
    assert np.allclose(up, dn_m[::-1], atol=1e-15)
    assert np.allclose(dn, up_m[::-1], atol=1e-15)
    pi = stationary_exact(params).probs
    pi_m = stationary_exact(mirrored).probs
    assert np.allclose(pi, pi_m[::-1], atol=1e-14)
    t = mfpt_exact(params, 5, 30)
    t_m = mfpt_exact(mirrored, 37 - 5, 37 - 30)
    assert t == pytest.approx(t_m, rel=1e-12)


# -- mfpt oracle ------------------------------------------------------------------


def test_mfpt_neutral_hand_values():
    assert mfpt_exact(NEUTRAL, 0, 2) == pytest.approx(8.0, abs=1e-12)
    assert mfpt_exact(NEUTRAL, 1, 2) == pytest.approx(6.0, abs=1e-12)


def test_mfpt_forced_single_step():
    # from state 0 the only move is up, so the wait is geometric: 1/w_up(0) = 1/mu
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 12, 0.25)
    assert mfpt_exact(params, 0, 1) == pytest.approx(1.0 / 0.25, rel=1e-12)


def test_mfpt_validation():
    with pytest.raises(ValueError):
        mfpt_exact(NEUTRAL, 1, 1)
    with pytest.raises(ValueError):
        mfpt_exact(NEUTRAL, 0, 5)


def test_mfpt_downhill_direction():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 30, 0.1)
    assert mfpt_exact(params, 25, 3) > 0
    # additivity along the chain: h(a->c) = h(a->b) + h(b->c) for a<b<c
    h_ac = mfpt_exact(params, 2, 20)
    h_ab = mfpt_exact(params, 2, 11)
    h_bc = mfpt_exact(params, 11, 20)
    assert h_ac == pytest.approx(h_ab + h_bc, rel=1e-12)


def test_mfpt_huge_values_stable():
    # the escape time at N=2000, mu=0.05 is ~9e20; the positive recurrence
    # must not lose it to cancellation
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 2000, 0.05)
    tau = mfpt_exact(params, 260, 1540)
    assert 1e19 < tau < 1e22
    assert math.isfinite(tau)


# -- Monte Carlo -------------------------------------------------------------------


def test_simulate_deterministic_given_seed():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 30, 0.08)
    cfg = SimConfig(rounds=4000, burn_in=500, realizations=3, seed=42)
    h1 = simulate(params, cfg).probs
    h2 = simulate(params, cfg).probs
    assert np.array_equal(h1, h2)
    h3 = simulate(params, SimConfig(rounds=4000, burn_in=500, realizations=3, seed=43)).probs
    assert not np.array_equal(h1, h3)


def test_simulate_matches_exact_neutral():
    cfg = SimConfig(rounds=60_000, burn_in=2_000, realizations=4, seed=11)
    hist = simulate(NEUTRAL, cfg)
    assert total_variation(hist, stationary_exact(NEUTRAL)) <= 0.02


def test_simulate_bimodal_tv():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 100, 0.06)
    cfg = SimConfig(rounds=150_000, burn_in=15_000, realizations=30, seed=2024)
    hist = simulate(params, cfg)
    pi = stationary_exact(params)
    assert total_variation(hist, pi) <= 0.05
    # bimodality: a local max on each side of the unstable midpoint
    mid = int(0.5 * params.N)
    assert hist.probs[:mid].max() > hist.probs[mid]
    assert hist.probs[mid:].max() > hist.probs[mid]


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(rounds=10, burn_in=10, realizations=1, seed=0)
    with pytest.raises(ValueError):
        SimConfig(rounds=10, burn_in=1, realizations=0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(rounds=10, burn_in=1, realizations=1, seed=-4)


def test_estimate_fpt_neutral():
    est = estimate_fpt(NEUTRAL, 0, 2, realizations=10_000, seed=31)
    assert est.ci_low <= 8.0 <= est.ci_high
    assert est.n_samples == 10_000
    assert est.ci_low <= est.mean <= est.ci_high


def test_estimate_fpt_geometric_wait():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 12, 0.25)
    est = estimate_fpt(params, 0, 1, realizations=8_000, seed=3)
    assert est.ci_low <= 4.0 <= est.ci_high


def test_estimate_fpt_deterministic_and_validated():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 20, 0.2)
    a = estimate_fpt(params, 3, 15, realizations=50, seed=9)
    b = estimate_fpt(params, 3, 15, realizations=50, seed=9)
    assert a == b
    with pytest.raises(ValueError):
        estimate_fpt(params, 3, 15, realizations=1, seed=9)


def test_estimate_fpt_round_cap():
    params = ChainParams(PayoffMatrix(4, 1, 3, 2), 200, 0.06)
    with pytest.raises(RoundCapExceeded) as excinfo:
        estimate_fpt(params, 34, 142, realizations=40, seed=5, round_cap=2000)
    err = excinfo.value
    assert err.cap == 2000
    assert 0 <= err.completed < 40
    if err.partial is not None:
        assert err.partial.n_samples == err.completed


# -- distributions and moments -------------------------------------------------------


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Distribution(np.array([-0.1, 1.1]))


def test_distribution_moments_hand_values():
    dist = Distribution(np.array([0.25, 0.5, 0.25]))
    mean, var, third = distribution_moments(dist)
    assert mean == pytest.approx(0.5, abs=1e-15)
    assert var == pytest.approx(0.125, abs=1e-15)
    assert third == pytest.approx(0.0, abs=1e-15)


def test_distribution_moments_symmetric_third_zero():
    pi = stationary_exact(ChainParams(PayoffMatrix(2, 1, 1, 2), 200, 0.3))
    assert abs(distribution_moments(pi)[2]) <= 1e-12


def test_distribution_moments_window():
    dist = Distribution(np.array([0.25, 0.5, 0.25]))
    mean, var, _ = distribution_moments(dist, window=(1, 2))
    # renormalized to (2/3, 1/3) on x in {0.5, 1.0}
    assert mean == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(ValueError):
        distribution_moments(dist, window=(1, 5))
    zero_mass = Distribution(np.array([0.5, 0.5, 0.0]))
    with pytest.raises(ValueError):
        distribution_moments(zero_mass, window=(2, 2))


def test_skew_sign_single_mode_regime():
    pi = stationary_exact(ChainParams(PayoffMatrix(4, 1, 3, 2), 2000, 0.3))
    assert distribution_moments(pi)[2] < 0


# -- heatmap ---------------------------------------------------------------------------


def test_heatmap_exact_mode_matches_oracle():
    payoff = PayoffMatrix(4, 1, 3, 2)
    mus = [0.02, 0.05, 0.1]
    cfg = SimConfig(rounds=100, burn_in=10, realizations=1, seed=0)
    grid = heatmap(payoff, 50, mus, cfg, exact=True)
    assert grid.shape == (51, 3)
    for j, mu in enumerate(mus):
        pi = stationary_exact(ChainParams(payoff, 50, mu)).probs
        assert np.allclose(grid[:, j], np.log(pi + 1e-12), atol=0)


def test_heatmap_monte_carlo_columns_deterministic():
    payoff = PayoffMatrix(4, 1, 3, 2)
    cfg = SimConfig(rounds=2000, burn_in=100, realizations=2, seed=8)
    g1 = heatmap(payoff, 20, [0.1, 0.2], cfg)
    g2 = heatmap(payoff, 20, [0.1, 0.2], cfg)
    assert np.array_equal(g1, g2)
    assert np.all(np.isfinite(g1))
