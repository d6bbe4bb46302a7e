"""Infinite-population drift, its equilibria, and bifurcations in mu.

The mean of the chain obeys dx/dt = f(x; mu) = Omega+(x) - Omega-(x), a
cubic-over-quadratic rational function with at most three roots in [0, 1].
For balanced matrices (a+b = c+d) f factors through the constant root
x0 = 1/2 and the outer equilibria have closed forms, with a transcritical
bifurcation at mu1 = (d-b)/(2(a+d)) and a fold at
mu2 = (d-b)(a+d-2*sqrt(a*d))/(d-a)^2.  Unbalanced matrices are handled by a
sign-scan root solver and natural-parameter continuation with fold detection;
the fold locus itself is located by a 2-d Newton solve on {f=0, f_x=0}
rather than a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import RateFunctions
from .games import PayoffMatrix, RegimeCase, classify_regime

__all__ = [
    "FixedPoint",
    "Case1Branches",
    "CriticalMus",
    "Branch",
    "BifurcationDiagram",
    "NotBistableError",
    "drift",
    "drift_dx",
    "drift_dxx",
    "drift_dmu",
    "case1_branches",
    "critical_mus_case1",
    "fixed_points",
    "bistable_triple",
    "x_star_case2",
    "continue_diagram",
]

RESIDUAL_TOL = 1e-10
MARGINAL_TOL = 1e-8
DEFAULT_SCAN_POINTS = 2048


class NotBistableError(ValueError):
    """Raised when an operation requires the three-equilibrium regime."""


@dataclass(frozen=True)
class FixedPoint:
    """A root of f(.; mu) in [0, 1] with its linear stability."""

    x: float
    stability: str          # "stable" | "unstable" | "marginal"
    residual: float

    def __post_init__(self):
        if self.residual > RESIDUAL_TOL:
            raise ValueError(f"fixed point residual {self.residual} above tolerance")
        if self.stability not in ("stable", "unstable", "marginal"):
            raise ValueError(f"unknown stability {self.stability!r}")


@dataclass(frozen=True)
class Case1Branches:
    """Closed-form equilibria of a balanced matrix at one mu.

    The outer pair turns complex past the fold; then ``complex_pair`` is set
    and x_minus/x_plus are None.
    """

    x_minus: Optional[float]
    x_zero: float
    x_plus: Optional[float]
    complex_pair: bool


@dataclass(frozen=True)
class CriticalMus:
    """Case 1 critical mutation rates: transcritical mu1 and fold mu2."""

    mu1: float
    mu2: float

    def __post_init__(self):
        if not 0.0 < self.mu1 <= self.mu2 < 1.0:
            raise ValueError(f"need 0 < mu1 <= mu2 < 1, got {self.mu1}, {self.mu2}")


@dataclass
class Branch:
    """One continuation branch: parallel arrays of (mu, x, stability)."""

    mus: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    stabilities: list = field(default_factory=list)

    def add(self, mu: float, x: float, stability: str) -> None:
        self.mus.append(mu)
        self.xs.append(x)
        self.stabilities.append(stability)


@dataclass
class BifurcationDiagram:
    branches: list
    folds: list              # [(mu, x), ...]
    transcritical_points: list


# -- drift and derivatives ------------------------------------------------------


def drift(payoff: PayoffMatrix, mu: float, x):
    """f(x; mu) = Omega+(x) - Omega-(x)."""
    return RateFunctions(payoff, mu).drift(x)


def drift_dx(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).drift_dx(x)


def drift_dxx(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).drift_dxx(x)


def drift_dmu(payoff: PayoffMatrix, mu: float, x):
    return RateFunctions(payoff, mu).drift_dmu(x)


def _require_case1(payoff: PayoffMatrix) -> RegimeCase:
    regime = classify_regime(payoff)
    if not regime.is_case1:
        raise ValueError(f"operation requires a balanced matrix (case 1), got {regime}")
    return regime


# -- closed forms ----------------------------------------------------------------


def case1_branches(payoff: PayoffMatrix, mu: float) -> Case1Branches:
    """Closed-form equilibria x_-(mu) <= x_0 = 1/2 <= or >= x_+(mu) for case 1."""
    _require_case1(payoff)
    a, b, c, d = payoff.entries
    x_zero = 0.5
    radicand = (4 * (b - c) ** 2 * mu**2
                + 8 * (b - d) * (a + d) * mu
                + 4 * (b - d) ** 2)
    if radicand < 0.0:
        return Case1Branches(None, x_zero, None, True)
    linear = 0.5 + (d - a) / (2 * (d - b)) * mu
    spread = math.sqrt(radicand) / (4 * (d - b))
    return Case1Branches(linear - spread, x_zero, linear + spread, False)


def critical_mus_case1(payoff: PayoffMatrix) -> CriticalMus:
    """Transcritical and fold mutation rates for a balanced matrix.

    mu1 = (d-b)/(2(a+d)) is where the moving outer branch crosses x0 = 1/2;
    mu2 = (d-b)(a+d-2*sqrt(ad))/(d-a)^2 is where the outer pair turns
    complex.  In case 1.3 (a = d) the mu2 expression is 0/0 by symmetry and
    the two coincide, so mu2 = mu1 is returned.
    """
    regime = _require_case1(payoff)
    a, b, c, d = payoff.entries
    mu1 = (d - b) / (2 * (a + d))
    if regime is RegimeCase.CASE_1_3:
        return CriticalMus(mu1, mu1)
    mu2 = (d - b) * (a + d - 2 * math.sqrt(a * d)) / (d - a) ** 2
    return CriticalMus(mu1, mu2)


def x_star_case2(payoff: PayoffMatrix) -> float:
    """The unique root of df/dmu in (0, 1) for an unbalanced (case 2) matrix.

    df/dmu is mu-independent and quadratic (the cubic terms cancel); its
    in-range root separates equilibria pushed up by mutation from those
    pushed down.
    """
    if classify_regime(payoff) is not RegimeCase.CASE_2:
        raise ValueError("x_star formula applies to case 2 matrices")
    a, b, c, d = payoff.entries
    denom = a - b + c - d
    if denom == 0.0:
        raise ValueError("degenerate matrix: a - b + c - d = 0")
    return (-(b - c + 2 * d) + math.sqrt((b - c) ** 2 + 4 * a * d)) / (2 * denom)


# -- generic root finding ---------------------------------------------------------


def _stability(slope: float) -> str:
    if abs(slope) <= MARGINAL_TOL:
        return "marginal"
    return "stable" if slope < 0.0 else "unstable"


def _polish(rf: RateFunctions, lo: float, hi: float) -> float:
    # Bisection to 1e-12 on a sign-change bracket, then a few Newton steps.
    flo = rf.drift(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fmid = rf.drift(mid)
        if fmid == 0.0:
            lo = hi = mid
            break
        if (flo < 0.0) == (fmid < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    x = 0.5 * (lo + hi)
    for _ in range(8):
        fx = rf.drift(x)
        slope = rf.drift_dx(x)
        if slope == 0.0:
            break
        step = fx / slope
        x_new = x - step
        if not 0.0 <= x_new <= 1.0:
            break
        x = x_new
        if abs(step) < 1e-15:
            break
    return x


def fixed_points(payoff: PayoffMatrix, mu: float,
                 scan_points: int = DEFAULT_SCAN_POINTS) -> list[FixedPoint]:
    """All equilibria of f(.; mu) in [0, 1], sorted by x.

    Dense sign-change scan (f is rational with at most three roots, so the
    default 2048 intervals vastly oversamples), bisection, then Newton
    polish; stability from the sign of f'.  For mu in (0, 1) the boundary
    values f(0) = mu > 0 > -mu = f(1) guarantee at least one root.
    """
    rf = RateFunctions(payoff, mu)
    grid = np.linspace(0.0, 1.0, scan_points + 1)
    values = rf.drift(grid)
    roots = []
    for k in range(scan_points):
        left, right = values[k], values[k + 1]
        if left == 0.0:
            roots.append(grid[k])
        elif (left < 0.0) != (right < 0.0):
            roots.append(_polish(rf, grid[k], grid[k + 1]))
    if values[-1] == 0.0:
        roots.append(grid[-1])

    out = []
    for x in sorted(roots):
        if out and abs(x - out[-1].x) < 1e-9:
            continue
        out.append(FixedPoint(x, _stability(rf.drift_dx(x)), abs(rf.drift(x))))
    assert out, "drift has a root in [0,1] for every mu in (0,1)"
    return out


def bistable_triple(payoff: PayoffMatrix, mu: float) -> tuple[float, float, float]:
    """(x_minus, x_zero, x_plus) in the bistable regime, else NotBistableError."""
    fps = fixed_points(payoff, mu)
    if len(fps) != 3:
        raise NotBistableError(
            f"expected 3 equilibria, found {len(fps)} at mu={mu}")
    low, mid, high = fps
    if not (low.stability == "stable" and mid.stability == "unstable"
            and high.stability == "stable"):
        raise NotBistableError(
            f"equilibria at mu={mu} are not stable/unstable/stable: "
            f"{[fp.stability for fp in fps]}")
    return low.x, mid.x, high.x


# -- continuation ------------------------------------------------------------------


def _newton_correct(payoff: PayoffMatrix, mu: float, x0: float,
                    max_move: float = 0.05) -> Optional[float]:
    rf = RateFunctions(payoff, mu)
    x = x0
    for _ in range(30):
        fx = rf.drift(x)
        slope = rf.drift_dx(x)
        if slope == 0.0:
            return None
        x_new = x - fx / slope
        if abs(x_new - x0) > max_move or not -1e-6 <= x_new <= 1.0 + 1e-6:
            return None
        if abs(x_new - x) < 1e-14:
            x = x_new
            break
        x = x_new
    rf_final = RateFunctions(payoff, mu)
    if abs(rf_final.drift(x)) > RESIDUAL_TOL:
        return None
    return min(max(x, 0.0), 1.0)


def _fold_newton(payoff: PayoffMatrix, x0: float, mu0: float
                 ) -> Optional[tuple[float, float]]:
    # 2-d Newton on {f = 0, f_x = 0}; the Jacobian is nonsingular at generic
    # folds (f_mu != 0, f_xx != 0).
    x, mu = x0, mu0
    for _ in range(60):
        rf = RateFunctions(payoff, mu)
        g = np.array([rf.drift(x), rf.drift_dx(x)])
        jac = np.array([
            [rf.drift_dx(x), rf.drift_dmu(x)],
            [rf.drift_dxx(x), rf.drift_dxmu(x)],
        ])
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if abs(det) < 1e-14:
            return None
        dx, dmu = np.linalg.solve(jac, -g)
        x += dx
        mu += dmu
        if abs(dx) + abs(dmu) < 1e-14:
            break
    rf = RateFunctions(payoff, mu)
    if abs(rf.drift(x)) <= RESIDUAL_TOL and abs(rf.drift_dx(x)) <= 1e-8:
        return x, mu
    return None


def continue_diagram(payoff: PayoffMatrix, mu_lo: float, mu_hi: float,
                     step: float) -> BifurcationDiagram:
    """Natural-parameter continuation of every equilibrium from mu_lo to mu_hi.

    Branches are marched in mu with Newton correction; when the corrector
    stops converging the step is halved, and once it collapses the branch is
    assumed to end in a fold, which is then sharpened by the 2-d Newton solve
    on {f=0, f_x=0}.  A stability flip along a surviving branch marks a
    branch crossing; if f_mu also vanishes there it is recorded as a
    transcritical point (in case 1 the moving branch crosses the constant
    x0 = 1/2 this way).  Branches terminate at folds; continuation past them
    is deliberately not attempted.
    """
    if step <= 0.0:
        raise ValueError("continuation step must be positive")
    if not 0.0 < mu_lo < mu_hi < 1.0:
        raise ValueError("need 0 < mu_lo < mu_hi < 1")

    diagram = BifurcationDiagram([], [], [])
    min_step = step / 4096.0

    for fp in fixed_points(payoff, mu_lo):
        branch = Branch()
        rf = RateFunctions(payoff, mu_lo)
        branch.add(mu_lo, fp.x, _stability(rf.drift_dx(fp.x)))
        mu, x = mu_lo, fp.x
        h = step
        prev_slope = rf.drift_dx(fp.x)
        while mu < mu_hi - 1e-15:
            h = min(h, mu_hi - mu)
            x_next = _newton_correct(payoff, mu + h, x)
            if x_next is None:
                if h > min_step:
                    h *= 0.5
                    continue
                fold = _fold_newton(payoff, x, mu)
                if fold is not None:
                    fx, fmu = fold
                    branch.add(fmu, fx, "marginal")
                    _record(diagram.folds, (fmu, fx))
                break
            mu += h
            x = x_next
            if not -1e-9 <= x <= 1.0 + 1e-9:
                raise RuntimeError(f"branch escaped [0,1] at mu={mu}: x={x}")
            slope = RateFunctions(payoff, mu).drift_dx(x)
            if prev_slope is not None and slope * prev_slope < 0.0 \
                    and abs(prev_slope) > MARGINAL_TOL and abs(slope) > MARGINAL_TOL:
                event = _locate_stability_flip(payoff, branch.mus[-1], branch.xs[-1],
                                               mu, x)
                if event is not None:
                    e_mu, e_x, kind = event
                    if kind == "transcritical":
                        _record(diagram.transcritical_points, (e_mu, e_x))
                    else:
                        _record(diagram.folds, (e_mu, e_x))
            branch.add(mu, x, _stability(slope))
            prev_slope = slope
            h = min(step, h * 2.0)
        diagram.branches.append(branch)
    return diagram


def _locate_stability_flip(payoff: PayoffMatrix, mu_a: float, x_a: float,
                           mu_b: float, x_b: float
                           ) -> Optional[tuple[float, float, str]]:
    # Bisect on mu for the zero of f_x along the branch between two accepted
    # continuation points (hence x is always Newton-corrected).
    slope_a = RateFunctions(payoff, mu_a).drift_dx(x_a)
    for _ in range(80):
        mu_mid = 0.5 * (mu_a + mu_b)
        x_mid = _newton_correct(payoff, mu_mid, 0.5 * (x_a + x_b), max_move=0.2)
        if x_mid is None:
            return None
        slope_mid = RateFunctions(payoff, mu_mid).drift_dx(x_mid)
        if (slope_mid < 0.0) == (slope_a < 0.0):
            mu_a, x_a, slope_a = mu_mid, x_mid, slope_mid
        else:
            mu_b, x_b = mu_mid, x_mid
        if mu_b - mu_a < 1e-12:
            break
    e_mu, e_x = 0.5 * (mu_a + mu_b), 0.5 * (x_a + x_b)
    if abs(RateFunctions(payoff, e_mu).drift_dmu(e_x)) < 1e-6:
        return e_mu, e_x, "transcritical"
    refined = _fold_newton(payoff, e_x, e_mu)
    if refined is not None:
        return refined[1], refined[0], "fold"
    return e_mu, e_x, "fold"


def _record(points: list, candidate: tuple[float, float], tol: float = 1e-6) -> None:
    for mu, x in points:
        if abs(mu - candidate[0]) < tol and abs(x - candidate[1]) < tol:
            return
    points.append(candidate)
