"""Quasipotentials and metastable switching-time asymptotics.

Two effective potentials govern escape from a stable mixture:

    Phi'(x) = -2 (Omega+ - Omega-) / (Omega+ + Omega-)   (diffusion approx.)
    Psi'(x) = ln(Omega- / Omega+)                        (WKB on the master eq.)

Both vanish exactly at the drift's fixed points, and their Taylor series in
q - 1 (q = Omega-/Omega+) agree through second order, differing first at
(q-1)^3/12 - which is why the two switching-time predictions are numerically
indistinguishable wherever the rates stay close.

Escape-time formulas (tau in the master-equation time normalization, one
unit = N rounds; multiply by ``rounds_per_unit`` to compare against the exact
or Monte Carlo round counts):

    tau_minus = 2 pi / (Omega+(x-) sqrt(Q''(x-) |Q''(x0)|)) * exp(N (Q(x0)-Q(x-)))

with Q = Phi or Psi and the mirrored expression for tau_plus.  At a fixed
point the curvatures reduce analytically to Phi'' = -2 f'/sigma and
Psi'' = -f'/Omega+, which coincide there because sigma = 2 Omega+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .chain import Distribution, RateFunctions
from .deterministic import bistable_triple
from .games import PayoffMatrix

__all__ = [
    "Quasipotential",
    "EscapeReport",
    "WkbProfiles",
    "QuadratureError",
    "phi",
    "psi",
    "phi_prime",
    "psi_prime",
    "phi_second",
    "psi_second",
    "curvature",
    "stationary_diffusion",
    "mfpt_diffusion",
    "mfpt_wkb",
    "wkb_profiles",
    "compare_quasipotentials",
    "series_bound_check",
    "simulate_sde",
]

QUAD_ABS_TOL = 1e-12
_FIXED_POINT_TOL = 1e-8


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")


def _quad(fun: Callable[[float], float], lo: float, hi: float) -> float:
    if lo == hi:
        return 0.0
    out = quad(fun, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-11,
               limit=200, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 1e-9 * max(1.0, abs(value)):
        raise QuadratureError(str(out[3]), abserr)
    return value


@dataclass
class Quasipotential:
    """Evaluator for Phi (kind="diffusion") or Psi (kind="wkb").

    Values are integrals of the analytic derivative from ``base``; only
    differences ever enter the escape formulas, so the base is conventional.
    The base defaults to the left stable point, which keeps the logarithmic
    endpoint singularity of Psi' (Omega-(0) = 0) out of every quadrature
    path.
    """

    payoff: PayoffMatrix
    mu: float
    kind: str
    base: float

    def __post_init__(self):
        if self.kind not in ("diffusion", "wkb"):
            raise ValueError(f"unknown quasipotential kind {self.kind!r}")
        self._rf = RateFunctions(self.payoff, self.mu)
        lo, hi = (0.0, 1.0) if self.kind == "diffusion" else (0.0, 1.0)
        if self.kind == "wkb" and not 0.0 < self.base < 1.0:
            raise ValueError("the WKB potential needs an interior base point")
        if not lo <= self.base <= hi:
            raise ValueError(f"base point {self.base} outside [{lo}, {hi}]")

    def derivative(self, x):
        if self.kind == "diffusion":
            return self._rf.phi_prime(x)
        return self._rf.log_q(x)

    def second_derivative(self, x):
        rf = self._rf
        if self.kind == "diffusion":
            f = rf.drift(x)
            s = rf.sigma(x)
            return -2.0 * (rf.drift_dx(x) * s - f * rf.sigma_dx(x)) / (s * s)
        return rf.dn_dx(x) / rf.dn(x) - rf.up_dx(x) / rf.up(x)

    def value(self, x: float) -> float:
        """Q(x) - Q(base) by adaptive quadrature of the analytic derivative."""
        if self.kind == "wkb" and not 0.0 < x < 1.0:
            raise ValueError("the WKB potential is evaluated on the open interval (0,1)")
        return _quad(self.derivative, self.base, x)

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Cumulative quadrature over a sorted grid (one segment per interval)."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and np.any(np.diff(xs) < 0):
            raise ValueError("grid must be sorted ascending")
        out = np.empty(xs.size)
        # integrate outward from the base in both directions
        right = np.searchsorted(xs, self.base)
        acc = 0.0
        prev = self.base
        for i in range(right, xs.size):
            acc += _quad(self.derivative, prev, xs[i])
            out[i] = acc
            prev = xs[i]
        acc = 0.0
        prev = self.base
        for i in range(right - 1, -1, -1):
            acc += _quad(self.derivative, prev, xs[i])
            out[i] = acc
            prev = xs[i]
        return out

    def curvature_at(self, x_f: float) -> float:
        """Second derivative at a fixed point via the analytic reduction.

        Phi''(x_f) = -2 f'(x_f)/sigma(x_f); Psi''(x_f) = -f'(x_f)/Omega+(x_f).
        Raises if x_f is not actually an equilibrium.
        """
        rf = self._rf
        if abs(rf.drift(x_f)) > _FIXED_POINT_TOL:
            raise ValueError(
                f"x={x_f} is not a fixed point: |f| = {abs(rf.drift(x_f)):.3g}")
        if self.kind == "diffusion":
            return -2.0 * rf.drift_dx(x_f) / rf.sigma(x_f)
        return -rf.drift_dx(x_f) / rf.up(x_f)


# -- functional forms ------------------------------------------------------------


def phi(payoff: PayoffMatrix, mu: float, x: float, base: float) -> float:
    """Diffusion quasipotential Phi(x) relative to Phi(base)."""
    return Quasipotential(payoff, mu, "diffusion", base).value(x)


def psi(payoff: PayoffMatrix, mu: float, x: float, base: float) -> float:
    """WKB quasipotential Psi(x) relative to Psi(base); x, base in (0,1)."""
    return Quasipotential(payoff, mu, "wkb", base).value(x)


def phi_prime(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).phi_prime(x)


def psi_prime(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).log_q(x)


def phi_second(payoff: PayoffMatrix, mu: float, x):
    return Quasipotential(payoff, mu, "diffusion", 0.0).second_derivative(x)


def psi_second(payoff: PayoffMatrix, mu: float, x):
    return Quasipotential(payoff, mu, "wkb", 0.5).second_derivative(x)


def curvature(payoff: PayoffMatrix, mu: float, x_f: float, kind: str) -> float:
    """Quasipotential curvature at a fixed point (analytic reduction)."""
    return Quasipotential(payoff, mu, kind, 0.5).curvature_at(x_f)


# -- stationary density and escape times ------------------------------------------


def stationary_diffusion(payoff: PayoffMatrix, mu: float, n: int) -> Distribution:
    """Fokker-Planck stationary law P_s(x) ~ exp(-N Phi(x))/sigma(x) on x=i/N.

    Normalized with trapezoid weights after a log-space shift; for large N
    its maxima sit at the stable fixed points and minima at the unstable
    ones, mirroring the exact chain's modes.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("need mu in (0,1)")
    rf = RateFunctions(payoff, mu)
    xs = np.arange(n + 1) / n
    pot = Quasipotential(payoff, mu, "diffusion", 0.0)
    log_dens = -n * pot.values(xs) - np.log(rf.sigma(xs))
    weights = np.full(n + 1, 1.0 / n)
    weights[[0, -1]] *= 0.5
    log_mass = log_dens + np.log(weights)
    log_mass -= log_mass.max()
    p = np.exp(log_mass)
    return Distribution(p / p.sum())


@dataclass(frozen=True)
class EscapeReport:
    """Switching times tau_minus (escape from x-) and tau_plus (from x+).

    Asymptotic methods (diffusion, wkb) report in the master-equation time
    normalization, where tau = prefactor * exp(exponent) with
    exponent = N * (Q(x0) - Q(x_from)); exact and monte_carlo methods count
    rounds directly.  ``rounds_per_unit`` converts: multiply the taus by it
    to put every method on the rounds scale.
    """

    method: str
    tau_minus: float
    tau_plus: float
    exponent: Optional[float]
    prefactor: Optional[float]
    rounds_per_unit: float

    def __post_init__(self):
        if not (self.tau_minus > 0.0 and self.tau_plus > 0.0):
            raise ValueError("switching times must be positive")

    @property
    def tau_minus_rounds(self) -> float:
        return self.tau_minus * self.rounds_per_unit

    @property
    def tau_plus_rounds(self) -> float:
        return self.tau_plus * self.rounds_per_unit

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "tau_minus": self.tau_minus,
            "tau_plus": self.tau_plus,
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "rounds_per_unit": self.rounds_per_unit,
            "tau_minus_rounds": self.tau_minus_rounds,
            "tau_plus_rounds": self.tau_plus_rounds,
        }


def _mfpt_asymptotic(payoff: PayoffMatrix, mu: float, n: int, kind: str) -> EscapeReport:
    x_minus, x_zero, x_plus = bistable_triple(payoff, mu)
    rf = RateFunctions(payoff, mu)
    pot = Quasipotential(payoff, mu, kind, x_minus)
    barrier_minus = pot.value(x_zero)
    barrier_plus = pot.value(x_zero) - pot.value(x_plus)
    curv_minus = pot.curvature_at(x_minus)
    curv_zero = pot.curvature_at(x_zero)
    curv_plus = pot.curvature_at(x_plus)
    pref_minus = 2.0 * math.pi / (rf.up(x_minus) * math.sqrt(curv_minus * abs(curv_zero)))
    pref_plus = 2.0 * math.pi / (rf.dn(x_plus) * math.sqrt(curv_plus * abs(curv_zero)))
    tau_minus = pref_minus * math.exp(n * barrier_minus)
    tau_plus = pref_plus * math.exp(n * barrier_plus)
    return EscapeReport(
        method=kind,
        tau_minus=tau_minus,
        tau_plus=tau_plus,
        exponent=n * barrier_minus,
        prefactor=pref_minus,
        rounds_per_unit=float(n),
    )


def mfpt_diffusion(payoff: PayoffMatrix, mu: float, n: int) -> EscapeReport:
    """Laplace-method escape times from the diffusion approximation (Phi)."""
    return _mfpt_asymptotic(payoff, mu, n, "diffusion")


def mfpt_wkb(payoff: PayoffMatrix, mu: float, n: int) -> EscapeReport:
    """Matched-asymptotics escape times from the WKB expansion (Psi)."""
    return _mfpt_asymptotic(payoff, mu, n, "wkb")


# -- WKB profiles -------------------------------------------------------------------


@dataclass(frozen=True)
class WkbProfiles:
    """Quasistationary WKB solutions around the x- basin.

    ``activation`` is A exp(-N Psi)/sqrt(Omega+ Omega-) on (0, x0), normalized
    to unit trapezoid mass on its grid; ``relaxation`` is B/(Omega+ - Omega-)
    on (x0, 1], with B fixed by flux matching through the boundary layer at
    x0 (it diverges at x+ where the drift vanishes - an intrinsic feature of
    the outer solution, kept as a diagnostic).  ``boundary_layer_width`` is
    sqrt(2 Omega+(x0) / (N f'(x0))).
    """

    activation_x: np.ndarray
    activation: np.ndarray
    relaxation_x: np.ndarray
    relaxation: np.ndarray
    boundary_layer_width: float


def wkb_profiles(payoff: PayoffMatrix, mu: float, n: int,
                 points: int = 512) -> WkbProfiles:
    x_minus, x_zero, x_plus = bistable_triple(payoff, mu)
    rf = RateFunctions(payoff, mu)
    pot = Quasipotential(payoff, mu, "wkb", x_minus)

    eps = 1.0 / n
    act_x = np.linspace(eps, x_zero - eps, points)
    log_act = -n * pot.values(act_x) - 0.5 * (np.log(rf.up(act_x)) + np.log(rf.dn(act_x)))
    shift = log_act.max()
    act = np.exp(log_act - shift)
    mass = np.trapezoid(act, act_x)
    act /= mass
    # normalization constant A on the shifted scale: act = A' exp(log_act - shift)
    log_a = -math.log(mass) - shift  # log A with the true (unshifted) density

    # Flux matching at x0 ties the relaxation constant to the activation
    # amplitude: B = J0 = A sqrt(|Psi''(x0)| / (2 pi N)) exp(-N Psi(x0)).
    psi_x0 = pot.value(x_zero)
    curv_zero = abs(pot.curvature_at(x_zero))
    log_b = log_a + 0.5 * math.log(curv_zero / (2.0 * math.pi * n)) - n * psi_x0
    rel_x = np.linspace(x_zero + eps, 1.0 - eps, points)
    rel = math.exp(log_b) / rf.drift(rel_x)

    width = math.sqrt(2.0 * rf.up(x_zero) / (n * rf.drift_dx(x_zero)))
    return WkbProfiles(act_x, act, rel_x, rel, width)


# -- quasipotential comparison -------------------------------------------------------


def compare_quasipotentials(payoff: PayoffMatrix, mu: float,
                            grid: np.ndarray) -> dict:
    """Tabulate both potentials from a common base at x- over ``grid``.

    Columns: x, phi, psi, diff = phi - psi, and the local rate ratio
    q = Omega-/Omega+.  Use :func:`series_bound_check` for the third-order
    closeness bound.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid.min() <= 0.0 or grid.max() >= 1.0:
        raise ValueError("comparison grid must lie strictly inside (0,1)")
    x_minus, _, _ = bistable_triple(payoff, mu)
    rf = RateFunctions(payoff, mu)
    phi_vals = Quasipotential(payoff, mu, "diffusion", x_minus).values(grid)
    psi_vals = Quasipotential(payoff, mu, "wkb", x_minus).values(grid)
    return {
        "x": grid,
        "phi": phi_vals,
        "psi": psi_vals,
        "diff": phi_vals - psi_vals,
        "q": rf.q(grid),
    }


def series_bound_check(payoff: PayoffMatrix, mu: float, xs: np.ndarray,
                       coefficient: float = 0.1, q_window: float = 0.2
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Check |Phi' - Psi'| <= coefficient * |q-1|^3 pointwise.

    Returns (applicable, ok): ``applicable`` marks points with
    |q-1| <= q_window, ``ok`` those applicable points satisfying the bound
    up to a 1e-13 roundoff floor (at the fixed points both sides are
    mathematically zero but evaluate to ~1e-16 in floats).  The true leading
    coefficient is 1/12; the margin to 0.1 absorbs the next-order term on
    the q > 1 side, while for q-1 below about -0.11 the (q-1)^4/8 term
    pushes the ratio past 0.1, so callers decide the domain.
    """
    xs = np.asarray(xs, dtype=float)
    rf = RateFunctions(payoff, mu)
    e = rf.q(xs) - 1.0
    gap = np.abs(rf.phi_prime(xs) - rf.log_q(xs))
    applicable = np.abs(e) <= q_window
    ok = applicable & (gap <= coefficient * np.abs(e) ** 3 + 1e-13)
    return applicable, ok


# -- SDE simulation -------------------------------------------------------------------


def simulate_sde(payoff: PayoffMatrix, mu: float, n: int, x0: float,
                 t_end: float, dt: float, seed: int,
                 noise: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama path of dx = f dt + sqrt(sigma/N) dW, reflected into [0,1].

    Time is in the master-equation normalization (one unit = N rounds).
    With ``noise=False`` this is a fixed-step solve of the deterministic
    drift equation.  Deterministic given ``seed``.
    """
    if dt <= 0.0 or t_end <= dt:
        raise ValueError("need 0 < dt < t_end")
    if n < 1:
        raise ValueError("population size must be positive")
    rf = RateFunctions(payoff, mu)
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    xs = np.empty(steps + 1)
    xs[0] = x0
    if noise:
        shocks = np.random.default_rng(np.random.SeedSequence((seed,))).standard_normal(steps)
    sqrt_dt = math.sqrt(dt)
    x = x0
    for k in range(steps):
        step = rf.drift(x) * dt
        if noise:
            step += math.sqrt(rf.sigma(x) / n) * sqrt_dt * shocks[k]
        x += step
        if x < 0.0:
            x = -x
        if x > 1.0:
            x = 2.0 - x
        x = min(max(x, 0.0), 1.0)
        xs[k + 1] = x
    return times, xs
