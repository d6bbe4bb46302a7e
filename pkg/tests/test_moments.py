import numpy as np
import pytest

from moranswitch.chain import ChainParams, distribution_moments, stationary_exact
from moranswitch.deterministic import drift_dxx
from moranswitch.games import PayoffMatrix
from moranswitch.moments import (
    corrected_moments,
    lna_variance,
    noise_amplitude,
    noise_amplitude_dx,
    skew_sign_case1,
)

from conftest import finite_difference, random_case1_matrices

P11 = PayoffMatrix(4, 1, 3, 2)
P13 = PayoffMatrix(2, 1, 1, 2)


def test_noise_amplitude_boundaries_and_midpoint():
    assert noise_amplitude(P11, 0.12, 0.0) == 0.12
    assert noise_amplitude(P11, 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)
    xs = np.linspace(0.01, 0.99, 33)
    assert np.all(noise_amplitude(P11, 0.05, xs) > 0)


def test_noise_amplitude_relabel_symmetry():
    xs = np.linspace(0.0, 1.0, 21)
    s = noise_amplitude(P11, 0.07, xs)
    s_rel = noise_amplitude(P11.relabeled(), 0.07, 1.0 - xs)
    assert np.allclose(s, s_rel, atol=1e-14)


def test_noise_amplitude_derivative():
    for x in np.linspace(0.1, 0.9, 9):
        fd = finite_difference(lambda t: noise_amplitude(P11, 0.2, t), x)
        assert noise_amplitude_dx(P11, 0.2, x) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_lna_variance_scales_as_inverse_n():
    v1 = lna_variance(P11, 0.3, 1000, 0.5).variance
    v2 = lna_variance(P11, 0.3, 2000, 0.5).variance
    assert v1 == pytest.approx(2.0 * v2, rel=1e-14)


def test_lna_rejects_unstable_point():
    # x0 = 1/2 is unstable below mu1
    with pytest.raises(ValueError):
        lna_variance(P11, 0.02, 2000, 0.5)
    with pytest.raises(ValueError):
        lna_variance(P11, 0.3, 2000, 0.3)  # not a fixed point at all


def test_lna_variance_against_exact_unimodal():
    pi = stationary_exact(ChainParams(P11, 2000, 0.3))
    _, exact_var, _ = distribution_moments(pi)
    report = lna_variance(P11, 0.3, 2000, 0.5)
    assert report.mean == 0.5
    assert report.third_central == 0.0
    assert abs(report.variance - exact_var) <= 0.10 * exact_var


def test_lna_relabel_invariance():
    v = lna_variance(P11, 0.3, 500, 0.5).variance
    v_rel = lna_variance(P11.relabeled(), 0.3, 500, 0.5).variance
    assert v == pytest.approx(v_rel, rel=1e-12)


def test_corrected_moments_case13_symmetric():
    report = corrected_moments(P13, 0.3, 400, 0.5)
    assert report.mean == pytest.approx(0.5, abs=1e-15)
    assert report.third_central == pytest.approx(0.0, abs=1e-18)


def test_corrected_moments_signs_follow_table():
    low = corrected_moments(P11, 0.3, 2000, 0.5)
    high = corrected_moments(P11, 0.7, 2000, 0.5)
    assert low.third_central < 0
    assert high.third_central > 0


def test_corrected_improves_mean_vs_exact():
    pi = stationary_exact(ChainParams(P11, 2000, 0.3))
    exact_mean, _, _ = distribution_moments(pi)
    lna = lna_variance(P11, 0.3, 2000, 0.5)
    corr = corrected_moments(P11, 0.3, 2000, 0.5)
    assert abs(corr.mean - exact_mean) < abs(lna.mean - exact_mean)


def test_corrections_vanish_at_large_n():
    # the N^-2 variance terms and the mean shift are O(1/N) relative
    for n in (100, 1000, 10_000):
        lna = lna_variance(P11, 0.3, n, 0.5)
        corr = corrected_moments(P11, 0.3, n, 0.5)
        rel_var_gap = (corr.variance - lna.variance) / lna.variance
        mean_shift = abs(corr.mean - 0.5)
        assert rel_var_gap <= 20.0 / n
        assert mean_shift <= 20.0 / n
    v1 = corrected_moments(P11, 0.3, 1000, 0.5)
    v2 = corrected_moments(P11, 0.3, 2000, 0.5)
    assert abs(v2.variance - lna_variance(P11, 0.3, 2000, 0.5).variance) < \
        abs(v1.variance - lna_variance(P11, 0.3, 1000, 0.5).variance)


def test_skew_sign_table():
    assert skew_sign_case1(P11, 0.3) == -1           # a > d, mu < 1/2
    assert skew_sign_case1(P11, 0.7) == +1           # a > d, mu > 1/2
    assert skew_sign_case1(P11, 0.5) == 0            # factor (2 mu - 1)
    assert skew_sign_case1(PayoffMatrix(2, 3, 1, 4), 0.3) == +1   # a < d
    assert skew_sign_case1(PayoffMatrix(2, 3, 1, 4), 0.7) == -1
    assert skew_sign_case1(P13, 0.3) == 0            # a = d
    with pytest.raises(ValueError):
        skew_sign_case1(PayoffMatrix(4, 2, 1, 4), 0.3)


def test_skew_sign_matches_drift_dxx():
    for payoff in random_case1_matrices(25):
        for mu in (0.2, 0.45, 0.55, 0.8):
            closed = skew_sign_case1(payoff, mu)
            direct = drift_dxx(payoff, mu, 0.5)
            a, b, c, d = payoff.entries
            factored = 32 * (c + d) * (a - c) * (a - d) * (2 * mu - 1) / (a + b + c + d) ** 3
            assert factored == pytest.approx(direct, rel=1e-10, abs=1e-12)
            if abs(direct) > 1e-12:
                assert closed == np.sign(direct)


def test_skew_sign_matches_exact_third_moment():
    for mu, expected in ((0.2, -1), (0.3, -1), (0.7, +1)):
        pi = stationary_exact(ChainParams(P11, 2000, mu))
        third = distribution_moments(pi)[2]
        assert np.sign(third) == expected
        assert skew_sign_case1(P11, mu) == expected
