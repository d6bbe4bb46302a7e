"""Payoff matrices, ESS structure, and regime classification for 2x2 games.

Conventions: the row player's payoffs are

          A    B
     A    a    b
     B    c    d

so ``a`` is what an A-player earns against another A, ``b`` what it earns
against a B, and the column player's payoffs are the transpose.  Strategy A
is evolutionarily stable iff a > c, strategy B iff d > b; matrices with both
support two metastable mixtures once birth-death dynamics with mutation are
put on top.

The regime of a matrix is decided by the sign of (a+b) - (c+d), i.e. which
strategy is fitter in a 50/50 population, with the balanced case split
further by the sign of a - d.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "EQUAL_TOL",
    "PayoffMatrix",
    "PDMatrix",
    "RegimeCase",
    "classify_regime",
    "ess_profile",
    "fitness",
    "fitness_counts",
    "aggregate_mixed",
    "aggregate_tft_alld",
    "tft_alld_ess_threshold",
]

# Regime branches select different code paths downstream (closed forms vs
# numerical continuation), so the equality test must be deterministic.
EQUAL_TOL = 1e-12


@dataclass(frozen=True)
class PayoffMatrix:
    """Row player's 2x2 payoff matrix (a, b, c, d)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"payoff entry {name}={v!r} is not finite")

    @property
    def entries(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def all_positive(self) -> bool:
        return min(self.entries) > 0.0

    def relabeled(self) -> "PayoffMatrix":
        """Swap the roles of the two strategies: (a,b,c,d) -> (d,c,b,a)."""
        return PayoffMatrix(self.d, self.c, self.b, self.a)

    @classmethod
    def from_string(cls, text: str) -> "PayoffMatrix":
        """Parse the CLI form ``"a,b,c,d"``."""
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 comma-separated payoffs, got {text!r}")
        return cls(*(float(p) for p in parts))

    @classmethod
    def from_dict(cls, obj: dict) -> "PayoffMatrix":
        """Parse the JSON config form ``{"a": .., "b": .., "c": .., "d": ..}``."""
        try:
            return cls(float(obj["a"]), float(obj["b"]), float(obj["c"]), float(obj["d"]))
        except KeyError as exc:
            raise ValueError(f"payoff object missing key {exc}") from exc

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class PDMatrix:
    """Single-round Prisoner's Dilemma payoffs, ordered t > r > p > s."""

    r: float
    s: float
    t: float
    p: float

    def __post_init__(self):
        if not (self.t > self.r > self.p > self.s):
            raise ValueError(
                f"not a Prisoner's Dilemma: need t > r > p > s, "
                f"got t={self.t}, r={self.r}, p={self.p}, s={self.s}"
            )


class RegimeCase(enum.Enum):
    CASE_1_1 = "case1.1"
    CASE_1_2 = "case1.2"
    CASE_1_3 = "case1.3"
    CASE_2 = "case2"
    CASE_3 = "case3"

    @property
    def is_case1(self) -> bool:
        return self in (RegimeCase.CASE_1_1, RegimeCase.CASE_1_2, RegimeCase.CASE_1_3)


def classify_regime(payoff: PayoffMatrix) -> RegimeCase:
    """Classify a payoff matrix by which strategy wins at equal proportions.

    Case 1 (a+b == c+d, within ``EQUAL_TOL``) splits by the sign of a-d:
    1.1 means A has the better self-interaction, 1.2 the mirror image, and
    1.3 the fully interchangeable matrix.  Case 2 is a+b > c+d, case 3 the
    reverse.
    """
    s = (payoff.a + payoff.b) - (payoff.c + payoff.d)
    if abs(s) <= EQUAL_TOL:
        diag = payoff.a - payoff.d
        if diag > EQUAL_TOL:
            return RegimeCase.CASE_1_1
        if diag < -EQUAL_TOL:
            return RegimeCase.CASE_1_2
        return RegimeCase.CASE_1_3
    return RegimeCase.CASE_2 if s > 0 else RegimeCase.CASE_3


def ess_profile(payoff: PayoffMatrix) -> tuple[bool, bool]:
    """Return (A_is_ess, B_is_ess): resistance to invasion by a lone mutant."""
    return payoff.a > payoff.c, payoff.d > payoff.b


def fitness(payoff: PayoffMatrix, x) -> tuple:
    """Average fitness (fA, fB) in a population with A-fraction ``x``.

    Both are affine in x: fA = a*x + b*(1-x), fB = c*x + d*(1-x).  Accepts
    scalars or numpy arrays.
    """
    fa = payoff.a * x + payoff.b * (1.0 - x)
    fb = payoff.c * x + payoff.d * (1.0 - x)
    return fa, fb


def fitness_counts(payoff: PayoffMatrix, i: int, n: int) -> tuple:
    """Count form of :func:`fitness` for i of N organisms playing A.

    Delegates to the fraction form so the two are equal bit-for-bit; every
    downstream rate evaluation goes through the same path.
    """
    if not 0 <= i <= n:
        raise ValueError(f"count i={i} outside 0..{n}")
    return fitness(payoff, i / n)


def _round_payoff(pd: PDMatrix, coop_self: float, coop_opp: float) -> float:
    # Expected single-round payoff when we cooperate w.p. coop_self against
    # an opponent cooperating w.p. coop_opp (independent choices).
    return (
        coop_self * coop_opp * pd.r
        + coop_self * (1.0 - coop_opp) * pd.s
        + (1.0 - coop_self) * coop_opp * pd.t
        + (1.0 - coop_self) * (1.0 - coop_opp) * pd.p
    )


def aggregate_mixed(pd: PDMatrix, alpha: float, beta: float, m: int) -> PayoffMatrix:
    """m-round aggregate payoffs for memoryless mixed strategies.

    Strategy A cooperates with probability ``alpha`` each round, B with
    probability ``beta``, independently of history.  The expectation is exact
    (bilinear form), not sampled, so the sign identities
    sign(a-c) = sign(beta-alpha) and sign(d-b) = sign(alpha-beta) hold
    without Monte Carlo error: neither strategy can make both hold at once,
    i.e. mixing alone never yields two ESS.
    """
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError("mixing probabilities must lie in [0, 1]")
    if m < 1:
        raise ValueError("round count m must be >= 1")
    return PayoffMatrix(
        m * _round_payoff(pd, alpha, alpha),
        m * _round_payoff(pd, alpha, beta),
        m * _round_payoff(pd, beta, alpha),
        m * _round_payoff(pd, beta, beta),
    )


def aggregate_tft_alld(pd: PDMatrix, m: int) -> tuple[PayoffMatrix, bool]:
    """Aggregate matrix for tit-for-tat (A) vs always-defect (B) over m rounds.

    TFT vs TFT cooperates throughout; AllD vs AllD defects throughout; in the
    mixed pairing TFT is suckered once and both defect afterwards.  Returns the
    matrix and whether both strategies are ESS (B always is, since p > s; A
    becomes ESS once m*r > t + (m-1)*p).
    """
    if m < 1:
        raise ValueError("round count m must be >= 1")
    payoff = PayoffMatrix(
        m * pd.r,
        pd.s + (m - 1) * pd.p,
        pd.t + (m - 1) * pd.p,
        m * pd.p,
    )
    both_ess = payoff.a > payoff.c
    return payoff, both_ess


def tft_alld_ess_threshold(pd: PDMatrix) -> int:
    """Smallest round count making TFT an ESS against AllD.

    The ESS flag flips exactly once (r > p makes m*r - t - (m-1)*p increasing
    in m), at the first integer m with m*(r-p) > t-p.
    """
    m0 = max(1, math.floor((pd.t - pd.p) / (pd.r - pd.p)) + 1)
    # Guard against float fuzz at the boundary.
    while not aggregate_tft_alld(pd, m0)[1]:
        m0 += 1
    while m0 > 1 and aggregate_tft_alld(pd, m0 - 1)[1]:
        m0 -= 1
    return m0
