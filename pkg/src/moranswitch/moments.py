"""Finite-N moment approximations around a stable equilibrium.

The linear-noise (van Kampen) level gives a Gaussian with variance
sigma(x*)/(2N|f'(x*)|); the next order in 1/N shifts the mean by
f''(x*)sigma/(4N f'^2) and produces a third central moment whose sign, for
balanced matrices above the fold, is the sign of f''(1/2) - which factors
as 32(c+d)(a-c)(a-d)(2mu-1)/(a+b+c+d)^3.  That sign is the finite-size bias
between two strategies the deterministic limit cannot tell apart.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chain import RateFunctions
from .games import PayoffMatrix
from .deterministic import _require_case1

__all__ = [
    "MomentReport",
    "noise_amplitude",
    "noise_amplitude_dx",
    "lna_variance",
    "corrected_moments",
    "skew_sign_case1",
]

_FIXED_POINT_TOL = 1e-8


@dataclass(frozen=True)
class MomentReport:
    """Approximate stationary moments around the equilibrium ``x_star``."""

    x_star: float
    mean: float
    variance: float
    third_central: float
    order: str              # "lna" | "corrected"

    def __post_init__(self):
        if self.variance <= 0.0:
            raise ValueError("variance must be positive")
        if self.order == "lna" and self.third_central != 0.0:
            raise ValueError("the linear-noise level is Gaussian: skew must be 0")
        if self.order not in ("lna", "corrected"):
            raise ValueError(f"unknown order {self.order!r}")

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star,
            "mean": self.mean,
            "variance": self.variance,
            "third_central": self.third_central,
            "order": self.order,
        }


def noise_amplitude(payoff: PayoffMatrix, mu: float, x):
    """sigma(x) = Omega+(x) + Omega-(x), the local jump activity."""
    return RateFunctions(payoff, mu).sigma(x)


def noise_amplitude_dx(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).sigma_dx(x)


def _stable_point_rates(payoff: PayoffMatrix, mu: float, x_star: float) -> RateFunctions:
    rf = RateFunctions(payoff, mu)
    if abs(rf.drift(x_star)) > _FIXED_POINT_TOL:
        raise ValueError(f"x={x_star} is not an equilibrium: |f| = {abs(rf.drift(x_star)):.3g}")
    if rf.drift_dx(x_star) >= 0.0:
        # The variance formula divides by |f'| with an attraction sign
        # convention; an unstable point has no stationary Gaussian around it.
        raise ValueError(f"x={x_star} is not attracting (f' = {rf.drift_dx(x_star):.3g})")
    return rf


def lna_variance(payoff: PayoffMatrix, mu: float, n: int, x_star: float) -> MomentReport:
    """Linear-noise level: mean x*, variance sigma(x*)/(2N|f'(x*)|), zero skew."""
    rf = _stable_point_rates(payoff, mu, x_star)
    variance = rf.sigma(x_star) / (2.0 * n * abs(rf.drift_dx(x_star)))
    return MomentReport(x_star, x_star, variance, 0.0, "lna")


def corrected_moments(payoff: PayoffMatrix, mu: float, n: int, x_star: float) -> MomentReport:
    """First corrections beyond linear noise.

    mean  = x* + f'' s / (4 N f'^2)
    var   = s/(2N|f'|) + f''^2 s^2/(8 N^2 f'^4) + s'^2/(16 N^2 f'^2)
    skew3 = f''^3 s^3/(8 N^3 f'^6) + 3 s'^2 f'' s/(32 N^3 f'^4)

    with s = sigma(x*), all derivatives at x*.  Relative to the linear-noise
    level the extra terms are O(1/N), vanishing in the infinite-population
    limit.
    """
    rf = _stable_point_rates(payoff, mu, x_star)
    fp = rf.drift_dx(x_star)
    fpp = rf.drift_dxx(x_star)
    s = rf.sigma(x_star)
    sp = rf.sigma_dx(x_star)

    mean = x_star + fpp * s / (4.0 * n * fp**2)
    variance = (s / (2.0 * n * abs(fp))
                + fpp**2 * s**2 / (8.0 * n**2 * fp**4)
                + sp**2 / (16.0 * n**2 * fp**2))
    third = (fpp**3 * s**3 / (8.0 * n**3 * fp**6)
             + 3.0 * sp**2 * fpp * s / (32.0 * n**3 * fp**4))
    return MomentReport(x_star, mean, variance, third, "corrected")


def skew_sign_case1(payoff: PayoffMatrix, mu: float) -> int:
    """Sign of the stationary skew around x0 = 1/2 for a balanced matrix.

    Valid in the single-equilibrium regime (mu > mu2), where the third
    central moment reduces to f''(1/2)^3/(64 N^3 f'(1/2)^6): only the sign
    of f''(1/2) matters, and for a+b = c+d it factors as

        f''(1/2) = 32 (c+d)(a-c)(a-d)(2 mu - 1) / (a+b+c+d)^3.

    Returns -1, 0, or +1; the strategy with the better self-interaction is
    favored below mu = 1/2 and penalized above it.
    """
    _require_case1(payoff)
    a, b, c, d = payoff.entries
    product = (c + d) * (a - c) * (a - d) * (2.0 * mu - 1.0)
    if product > 0.0:
        return 1
    if product < 0.0:
        return -1
    return 0
