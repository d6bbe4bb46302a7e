"""The finite-N birth-death chain: rates, exact oracles, and Monte Carlo.

State i in {0..N} counts the organisms playing A.  Each round one individual
reproduces with probability proportional to fitness (the offspring mutating
with probability mu) and one dies uniformly at random, so the only moves are
i -> i+1, i -> i-1, or stay.  The per-round step probabilities are

    w_up(i)   = [ x*fA*(1-x)*(1-mu) + (1-x)^2*fB*mu ] / (x*fA + (1-x)*fB)
    w_down(i) = [ (1-x)*fB*x*(1-mu) + x^2*fA*mu     ] / (x*fA + (1-x)*fB)

with x = i/N; both are ratios of cubic polynomials in x over the mean
fitness (a quadratic), which this module represents explicitly in
coefficient form so that every derivative used by the deterministic and
asymptotic layers is analytic.  One round is one unit of time throughout.

Exact oracles: the stationary distribution follows from detailed balance
(computed in log space), and mean first-passage times solve the tridiagonal
system (w_up+w_down)h(i) = 1 + w_up*h(i+1) + w_down*h(i-1) with h(target)=0,
which is simultaneously the expected-hitting-round count of the discrete
chain and the continuous-time MFPT with the same rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.polynomial.polynomial as npoly

from .games import PayoffMatrix

__all__ = [
    "ChainParams",
    "Distribution",
    "SimConfig",
    "FptEstimate",
    "RoundCapExceeded",
    "RateFunctions",
    "rate_up",
    "rate_down",
    "rate_tables",
    "scaled_rate_up",
    "scaled_rate_down",
    "scaled_rate_up_dx",
    "scaled_rate_down_dx",
    "stationary_exact",
    "mfpt_exact",
    "simulate",
    "estimate_fpt",
    "heatmap",
    "distribution_moments",
    "total_variation",
]

DEFAULT_ROUND_CAP = 10**10
HEATMAP_LOG_FLOOR = 1e-12
_CHUNK = 4096


@dataclass(frozen=True)
class ChainParams:
    """Payoff matrix, population size N >= 2, and mutation rate mu in (0,1)."""

    payoff: PayoffMatrix
    N: int
    mu: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"population size N must be an integer >= 2, got {self.N}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mutation rate must lie in (0, 1), got {self.mu}")
        if not self.payoff.all_positive:
            # Rates divide by i*fA + (N-i)*fB; positive entries keep every
            # fitness (and hence every denominator) positive.
            raise ValueError("chain payoff entries must all be positive")


@dataclass(frozen=True)
class Distribution:
    """Probability vector over states 0..N (equivalently the grid x=i/N)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("distribution needs a 1-d vector over states 0..N")
        if np.any(p < -1e-15):
            raise ValueError("distribution entries must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"distribution must sum to 1, got {p.sum()!r}")

    @property
    def N(self) -> int:
        return self.probs.size - 1

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.probs.size) / self.N

    def mean(self) -> float:
        return distribution_moments(self)[0]

    def variance(self) -> float:
        return distribution_moments(self)[1]

    def third_central(self) -> float:
        return distribution_moments(self)[2]

    def mode_x(self) -> float:
        return float(np.argmax(self.probs)) / self.N


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run lengths: rounds per realization, burn-in, ensemble size."""

    rounds: int
    burn_in: int
    realizations: int
    seed: int

    def __post_init__(self):
        if self.burn_in < 0 or self.burn_in >= self.rounds:
            raise ValueError("need 0 <= burn_in < rounds")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class FptEstimate:
    """Sample mean first-passage time with a 95% normal-approximation CI."""

    mean: float
    ci_low: float
    ci_high: float
    n_samples: int

    def __post_init__(self):
        if not self.ci_low <= self.mean <= self.ci_high:
            raise ValueError("confidence interval must bracket the mean")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n_samples,
        }


class RoundCapExceeded(RuntimeError):
    """A first-passage simulation hit its round cap before every run finished.

    Carries the partial result so callers can fail loudly without losing the
    completed samples.
    """

    def __init__(self, cap: int, completed: int, requested: int,
                 partial: Optional[FptEstimate]):
        self.cap = cap
        self.completed = completed
        self.requested = requested
        self.partial = partial
        super().__init__(
            f"round cap {cap} reached with {completed}/{requested} "
            f"realizations finished"
        )


class RateFunctions:
    """Scaled rates Omega+-(x; mu) and their analytic x/mu derivatives.

    Everything is built from three coefficient arrays (numerators ``up``,
    ``dn`` of degree 3 and the shared mean-fitness denominator ``den`` of
    degree 2), so drift, noise amplitude, and their derivatives come from
    exact polynomial quotient rules rather than finite differences.
    """

    def __init__(self, payoff: PayoffMatrix, mu: float):
        if not 0.0 <= mu <= 1.0:
            raise ValueError(f"mutation rate must lie in [0, 1], got {mu}")
        self.payoff = payoff
        self.mu = float(mu)

        a, b, c, d = payoff.entries
        fa = np.array([b, a - b])          # fA(x) = b + (a-b) x
        fb = np.array([d, c - d])
        x = np.array([0.0, 1.0])
        u = np.array([1.0, -1.0])          # 1 - x
        xu = npoly.polymul(x, u)

        self._up = npoly.polyadd((1 - mu) * npoly.polymul(xu, fa),
                                 mu * npoly.polymul(npoly.polymul(u, u), fb))
        self._dn = npoly.polyadd((1 - mu) * npoly.polymul(xu, fb),
                                 mu * npoly.polymul(npoly.polymul(x, x), fa))
        self._den = npoly.polyadd(npoly.polymul(x, fa), npoly.polymul(u, fb))

        self._num = npoly.polysub(self._up, self._dn)      # drift numerator
        self._sig = npoly.polyadd(self._up, self._dn)      # sigma numerator
        # d(num)/dmu is mu-independent: -x(1-x)(fA-fB) + (1-x)^2 fB - x^2 fA.
        self._num_mu = npoly.polysub(
            npoly.polyadd(npoly.polymul(npoly.polymul(u, u), fb),
                          -1.0 * npoly.polymul(xu, npoly.polysub(fa, fb))),
            npoly.polymul(npoly.polymul(x, x), fa))

        self._up1 = npoly.polyder(self._up)
        self._dn1 = npoly.polyder(self._dn)
        self._den1 = npoly.polyder(self._den)
        self._den2 = npoly.polyder(self._den, 2)
        self._num1 = npoly.polyder(self._num)
        self._num2 = npoly.polyder(self._num, 2)
        self._sig1 = npoly.polyder(self._sig)
        self._num_mu1 = npoly.polyder(self._num_mu)

    # -- evaluation helpers -------------------------------------------------

    @staticmethod
    def _wrap(x, value):
        if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
            return float(value)
        return value

    def _ratio(self, x, num, at0=None, at1=None):
        xa = np.asarray(x, dtype=float)
        v = npoly.polyval(xa, num) / npoly.polyval(xa, self._den)
        if at0 is not None:
            v = np.where(xa == 0.0, at0, v)
        if at1 is not None:
            v = np.where(xa == 1.0, at1, v)
        return self._wrap(x, v)

    def _quotient_dx(self, x, num, num1):
        xa = np.asarray(x, dtype=float)
        den = npoly.polyval(xa, self._den)
        v = (npoly.polyval(xa, num1) * den
             - npoly.polyval(xa, num) * npoly.polyval(xa, self._den1)) / den**2
        return self._wrap(x, v)

    # -- rates and noise ----------------------------------------------------

    def up(self, x):
        """Omega+(x): boundary-exact (mu at x=0, 0 at x=1)."""
        return self._ratio(x, self._up, at0=self.mu, at1=0.0)

    def dn(self, x):
        """Omega-(x): boundary-exact (0 at x=0, mu at x=1)."""
        return self._ratio(x, self._dn, at0=0.0, at1=self.mu)

    def up_dx(self, x):
        return self._quotient_dx(x, self._up, self._up1)

    def dn_dx(self, x):
        return self._quotient_dx(x, self._dn, self._dn1)

    def sigma(self, x):
        """Noise amplitude sigma = Omega+ + Omega-."""
        return self._ratio(x, self._sig, at0=self.mu, at1=self.mu)

    def sigma_dx(self, x):
        return self._quotient_dx(x, self._sig, self._sig1)

    def q(self, x):
        """Rate ratio q = Omega-/Omega+ (the mean-fitness factor cancels)."""
        xa = np.asarray(x, dtype=float)
        v = npoly.polyval(xa, self._dn) / npoly.polyval(xa, self._up)
        return self._wrap(x, v)

    def log_q(self, x):
        """ln(Omega-/Omega+), the WKB quasipotential derivative."""
        xa = np.asarray(x, dtype=float)
        v = np.log(npoly.polyval(xa, self._dn)) - np.log(npoly.polyval(xa, self._up))
        return self._wrap(x, v)

    # -- drift and derivatives ----------------------------------------------

    def drift(self, x):
        """f(x; mu) = Omega+ - Omega-."""
        return self._ratio(x, self._num, at0=self.mu, at1=-self.mu)

    def drift_dx(self, x):
        return self._quotient_dx(x, self._num, self._num1)

    def drift_dxx(self, x):
        xa = np.asarray(x, dtype=float)
        n = npoly.polyval(xa, self._num)
        n1 = npoly.polyval(xa, self._num1)
        n2 = npoly.polyval(xa, self._num2)
        den = npoly.polyval(xa, self._den)
        d1 = npoly.polyval(xa, self._den1)
        d2 = npoly.polyval(xa, self._den2)
        v = ((n2 * den - n * d2) * den - 2.0 * d1 * (n1 * den - n * d1)) / den**3
        return self._wrap(x, v)

    def drift_dmu(self, x):
        """df/dmu; f is affine in mu, so this is mu-independent."""
        return self._ratio(x, self._num_mu)

    def drift_dxmu(self, x):
        return self._quotient_dx(x, self._num_mu, self._num_mu1)

    def phi_prime(self, x):
        """Diffusion quasipotential derivative -2 f / sigma (denominator cancels)."""
        xa = np.asarray(x, dtype=float)
        v = -2.0 * npoly.polyval(xa, self._num) / npoly.polyval(xa, self._sig)
        return self._wrap(x, v)


# -- spec-facing rate operations ---------------------------------------------


def _check_state(params: ChainParams, i: int) -> None:
    if int(i) != i or not 0 <= i <= params.N:
        raise ValueError(f"state {i} outside 0..{params.N}")


def rate_up(params: ChainParams, i: int) -> float:
    """Per-round probability of the move i -> i+1."""
    _check_state(params, i)
    return RateFunctions(params.payoff, params.mu).up(i / params.N)


def rate_down(params: ChainParams, i: int) -> float:
    """Per-round probability of the move i -> i-1."""
    _check_state(params, i)
    return RateFunctions(params.payoff, params.mu).dn(i / params.N)


def scaled_rate_up(params: ChainParams, x) -> float:
    return RateFunctions(params.payoff, params.mu).up(x)


def scaled_rate_down(params: ChainParams, x) -> float:
    return RateFunctions(params.payoff, params.mu).dn(x)


def scaled_rate_up_dx(params: ChainParams, x) -> float:
    return RateFunctions(params.payoff, params.mu).up_dx(x)


def scaled_rate_down_dx(params: ChainParams, x) -> float:
    return RateFunctions(params.payoff, params.mu).dn_dx(x)


def rate_tables(params: ChainParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectors w_up[i], w_down[i] for all states; w_up[N] = w_down[0] = 0."""
    rf = RateFunctions(params.payoff, params.mu)
    xs = np.arange(params.N + 1) / params.N
    return rf.up(xs), rf.dn(xs)


# -- exact oracles ------------------------------------------------------------


def stationary_exact(params: ChainParams) -> Distribution:
    """Stationary law from detailed balance: pi_{i+1}/pi_i = w_up(i)/w_down(i+1).

    The running product over ~N ratios overflows long before N=2000, so the
    cumulative ratios are summed in log space and normalized with the max
    subtracted.
    """
    up, dn = rate_tables(params)
    log_ratio = np.log(up[:-1]) - np.log(dn[1:])
    log_pi = np.concatenate(([0.0], np.cumsum(log_ratio)))
    log_pi -= log_pi.max()
    pi = np.exp(log_pi)
    return Distribution(pi / pi.sum())


def mfpt_exact(params: ChainParams, start: int, target: int) -> float:
    """Expected rounds to first reach ``target`` from ``start``.

    Solves the first-step system (w_up+w_down)h(i) = 1 + w_up h(i+1)
    + w_down h(i-1), h(target) = 0, over the states on the start side of the
    target (a birth-death chain cannot pass the target without hitting it),
    with the natural reflecting closure at 0 or N.  The tridiagonal forward
    elimination is carried out in terms of the one-step gaps
    u(j) = h(j) - h(j+1), which obey w_up(j) u(j) = 1 + w_down(j) u(j-1):
    every quantity is positive, so the elimination is free of cancellation
    and stays accurate even when the answer is exponentially large (a dense
    banded solve loses all digits once the escape time passes ~1e16).  The
    same linear system is the continuous-time MFPT with rates w_up/w_down,
    so the discrete and continuous readings share this oracle.
    """
    _check_state(params, start)
    _check_state(params, target)
    if start == target:
        raise ValueError("start and target states must differ")
    up, dn = rate_tables(params)
    if start < target:
        # u[j] = E[rounds j -> j+1]; reflecting at 0 makes u[0] = 1/w_up(0).
        gap = 1.0 / up[0]
        total = gap if start == 0 else 0.0
        for j in range(1, target):
            gap = (1.0 + dn[j] * gap) / up[j]
            if j >= start:
                total += gap
        return float(total)
    # Mirror: v[j] = E[rounds j -> j-1], reflecting at N.
    n = params.N
    gap = 1.0 / dn[n]
    total = gap if start == n else 0.0
    for j in range(n - 1, target, -1):
        gap = (1.0 + up[j] * gap) / dn[j]
        if j <= start:
            total += gap
    return float(total)


# -- Monte Carlo ---------------------------------------------------------------


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    # Realization k draws from its own PCG64 stream seeded by (seed, k):
    # reductions over realizations are then order-independent.
    return [np.random.default_rng(np.random.SeedSequence((seed, k)))
            for k in range(count)]


def simulate(params: ChainParams, cfg: SimConfig,
             start_state=None) -> Distribution:
    """Occupancy histogram of the discrete-round chain after burn-in.

    Per round each realization steps +1 w.p. w_up(i), -1 w.p. w_down(i), and
    stays put otherwise; states from rounds burn_in..rounds-1 are tallied
    and averaged over realizations.  Deterministic given cfg.seed.

    ``start_state`` is round(N/2) by default; an integer starts every
    realization there, while ``"stratified"`` spreads realization k to
    round(k*N/(R-1)) so that every basin of attraction receives occupancy
    mass in metastable regimes (switching between basins is far slower than
    any realistic run length).
    """
    n = params.N
    r = cfg.realizations
    if start_state is None:
        start_state = round(n / 2)
    if start_state == "stratified":
        starts = np.array([round(k * n / max(r - 1, 1)) for k in range(r)],
                          dtype=np.int64)
    else:
        _check_state(params, start_state)
        starts = np.full(r, start_state, dtype=np.int64)
    up, dn = rate_tables(params)
    tot = up + dn

    gens = _streams(cfg.seed, cfg.realizations)
    state = starts.copy()
    counts = np.zeros(n + 1)
    done = 0
    while done < cfg.rounds:
        span = min(_CHUNK, cfg.rounds - done)
        uniforms = np.empty((span, cfg.realizations))
        for k, gen in enumerate(gens):
            uniforms[:, k] = gen.random(span)
        for s in range(span):
            u = uniforms[s]
            w_up = up[state]
            w_tot = tot[state]
            state += (u < w_up).astype(np.int64)
            state -= ((u >= w_up) & (u < w_tot)).astype(np.int64)
            if done >= cfg.burn_in:
                counts += np.bincount(state, minlength=n + 1)
            done += 1
    return Distribution(counts / counts.sum())


def estimate_fpt(params: ChainParams, start: int, target: int,
                 realizations: int, seed: int,
                 round_cap: int = DEFAULT_ROUND_CAP) -> FptEstimate:
    """Monte Carlo mean first-passage time with a 95% CI.

    All realizations advance in lock step on independent streams; finished
    ones drop out of the working set.  Escape times grow exponentially in N,
    so a configurable round cap aborts with :class:`RoundCapExceeded`
    (carrying the completed samples) instead of hanging.
    """
    if realizations < 2:
        raise ValueError("need at least 2 realizations for a CI")
    _check_state(params, start)
    _check_state(params, target)
    if start == target:
        raise ValueError("start and target states must differ")

    up, dn = rate_tables(params)
    gens = _streams(seed, realizations)
    hit = np.zeros(realizations, dtype=np.int64)
    active = np.arange(realizations)
    state = np.full(realizations, start, dtype=np.int64)
    t = 0
    while active.size:
        width = active.size
        span = min(_CHUNK, max(1, round_cap - t))
        uniforms = np.empty((span, width))
        for col, k in enumerate(active):
            uniforms[:, col] = gens[k].random(span)
        sub = state[active].copy()
        alive = np.ones(width, dtype=bool)
        for s in range(span):
            t += 1
            u = uniforms[s]
            w_up = up[sub]
            w_dn = dn[sub]
            step = (u < w_up).astype(np.int64) - ((u >= w_up) & (u < w_up + w_dn))
            sub += np.where(alive, step, 0)
            just_hit = alive & (sub == target)
            if just_hit.any():
                hit[active[just_hit]] = t
                alive &= ~just_hit
                if not alive.any():
                    break
        state[active] = sub
        active = active[alive]
        if active.size and t >= round_cap:
            finished = hit[hit > 0]
            partial = None
            if finished.size >= 2:
                partial = _fpt_estimate(finished)
            raise RoundCapExceeded(round_cap, int(finished.size), realizations, partial)
    return _fpt_estimate(hit)


def _fpt_estimate(samples: np.ndarray) -> FptEstimate:
    mean = float(samples.mean())
    half = 1.96 * float(samples.std(ddof=1)) / math.sqrt(samples.size)
    return FptEstimate(mean, mean - half, mean + half, int(samples.size))


def heatmap(payoff: PayoffMatrix, n: int, mu_grid: Sequence[float],
            cfg: SimConfig, exact: bool = False,
            start_state=None) -> np.ndarray:
    """Matrix of log-occupancy: rows are states (x bins), columns mu values.

    Column j is log(histogram at mu_j + 1e-12); the floor keeps empty bins
    finite on the log scale.  ``exact=True`` swaps the Monte Carlo histogram
    for the detailed-balance stationary law.  Columns are independent, hence
    trivially parallelizable; this implementation runs them sequentially for
    determinism.
    """
    columns = []
    for mu in mu_grid:
        params = ChainParams(payoff, n, mu)
        if exact:
            dist = stationary_exact(params)
        else:
            dist = simulate(params, cfg, start_state)
        columns.append(np.log(dist.probs + HEATMAP_LOG_FLOOR))
    return np.column_stack(columns)


# -- moments -------------------------------------------------------------------


def distribution_moments(dist: Distribution,
                         window: Optional[tuple[int, int]] = None
                         ) -> tuple[float, float, float]:
    """(mean, variance, third central moment) of x = i/N under ``dist``.

    With ``window=(lo, hi)`` the distribution is restricted to those states
    (inclusive) and renormalized, which is how conditional moments around a
    single mode are extracted from a bimodal law.
    """
    n = dist.N
    if window is None:
        lo, hi = 0, n
    else:
        lo, hi = window
        if not (0 <= lo <= hi <= n):
            raise ValueError(f"window {window} outside 0..{n}")
    p = dist.probs[lo:hi + 1]
    mass = p.sum()
    if mass <= 0.0:
        raise ValueError(f"window {window} carries zero probability mass")
    p = p / mass
    x = np.arange(lo, hi + 1) / n
    mean = float(np.dot(p, x))
    centered = x - mean
    var = float(np.dot(p, centered**2))
    third = float(np.dot(p, centered**3))
    return mean, var, third


def total_variation(a: Distribution, b: Distribution) -> float:
    """TV distance between two distributions on the same state space."""
    if a.probs.size != b.probs.size:
        raise ValueError("distributions live on different state spaces")
    return 0.5 * float(np.abs(a.probs - b.probs).sum())
