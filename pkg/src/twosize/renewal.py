"""Renewal process with increments in {theta, 1} and its first-passage times.

The consumed resources after ``n`` sampled offspring form a zero-delayed
renewal process ``S_n``.  The non-strict rule stops at the first ``n`` with
``S_n >= R`` (the population size is that ``n``); the strict rule stops at the
first ``n`` with ``S_n > R`` and keeps the generation before it.

Arithmetic versus non-arithmetic increments
-------------------------------------------
When ``theta = a / b`` is an exact ``Fraction``, every sum is tracked as an
integer multiple of ``1 / b`` so that exact hits ``S_n == R`` are decided
without rounding.  Otherwise sums are ``k_small * theta + k_large`` in double
precision and compared without tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DivisionAtBoundary, OutOfRange, StateSpaceTooLarge
from .model import SizeParams, mu, var_xi

MAX_DP_STATES = 10**7


@dataclass(frozen=True)
class Lattice:
    """Increment costs and stopping threshold in working units.

    A path stops at the first step whose cumulative cost is ``>= threshold``.
    """

    small: int | float
    large: int | float
    threshold: int | float
    exact: bool

    @classmethod
    def build(cls, params: SizeParams, strict: bool = False) -> "Lattice":
        if strict and params.R < 1:
            raise ConfigError("the strict rule needs R >= 1 so that a generation is never empty")
        if params.exact:
            a, b = params.theta.numerator, params.theta.denominator
            level = Fraction(params.resources) * b
            threshold = math.floor(level) + 1 if strict else math.ceil(level)
            return cls(a, b, int(threshold), True)
        threshold = np.nextafter(params.R, np.inf) if strict else params.R
        return cls(params.theta_float, 1.0, float(threshold), False)

    def cost(self, k_small, k_large):
        return k_small * self.small + k_large * self.large

    def safe_jump(self, deficit):
        """Number of steps that cannot reach the threshold from a given deficit."""
        if self.exact:
            return (deficit - 1) // self.large
        # two-step margin against rounding in k_small * theta + k_large
        return np.maximum(np.ceil(deficit) - 2, 0).astype(np.int64)


# ---------------------------------------------------------------------------
# single-path reference samplers


@dataclass(frozen=True)
class PassageOutcome:
    tau: int
    s_tau: float
    xi_tau: float
    overshoot: float
    k_small: int
    k_large: int


@dataclass(frozen=True)
class StrictPassageOutcome:
    """Strict-rule crossing: ``tau_bar`` and the kept pre-crossing generation."""

    tau_bar: int
    kept: int
    s_kept: float
    k_small: int
    k_large: int
    xi_rejected: float


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"p must lie in [0, 1], got {p}")


def _walk(p, lattice, rng):
    ks = kl = 0
    cost = 0
    while True:
        small = rng.random() < p
        new = cost + (lattice.small if small else lattice.large)
        if lattice.exact:
            crossed = new >= lattice.threshold
        else:
            crossed = lattice.cost(ks + small, kl + (not small)) >= lattice.threshold
        if crossed:
            return ks, kl, small
        ks += small
        kl += not small
        cost = new


def sample_passage(p: float, params: SizeParams, rng: np.random.Generator) -> PassageOutcome:
    """Draw increments one at a time until the running sum reaches ``R``."""
    _check_p(p)
    ks, kl, small = _walk(p, Lattice.build(params), rng)
    ks += small
    kl += not small
    theta = params.theta_float
    s_tau = ks * theta + kl
    return PassageOutcome(ks + kl, s_tau, theta if small else 1.0, s_tau - params.R, ks, kl)


def sample_passage_strict(p: float, params: SizeParams, rng: np.random.Generator) -> StrictPassageOutcome:
    """Draw increments until the running sum exceeds ``R``; keep the state before."""
    _check_p(p)
    ks, kl, small = _walk(p, Lattice.build(params, strict=True), rng)
    theta = params.theta_float
    return StrictPassageOutcome(ks + kl + 1, ks + kl, ks * theta + kl, ks, kl, theta if small else 1.0)


# ---------------------------------------------------------------------------
# vectorized sampler


@dataclass
class PassageBatch:
    """Stopped states of many independent walks.

    For the non-strict rule ``(k_small, k_large)`` is the state at ``tau(R)``;
    for the strict rule it is the kept state at ``tau_bar(R) - 1``.
    ``last_small`` records whether the crossing increment was small.
    """

    k_small: np.ndarray
    k_large: np.ndarray
    last_small: np.ndarray

    @property
    def size(self) -> np.ndarray:
        return self.k_small + self.k_large

    @property
    def x_freq(self) -> np.ndarray:
        return self.k_small / self.size


def sample_passages(p, params: SizeParams, size: int, rng: np.random.Generator,
                    strict: bool = False) -> PassageBatch:
    """Sample ``size`` independent first passages, ``p`` scalar or per-walk.

    While the remaining deficit exceeds one large increment, a block of ``m``
    steps cannot cross, so the number of small increments among them is drawn
    as ``Binomial(m, p)`` in one go.  Near the threshold the walk proceeds one
    increment at a time.  The law is identical to step-by-step sampling.
    """
    lat = Lattice.build(params, strict)
    p_arr = np.broadcast_to(np.asarray(p, dtype=float), (size,))
    if np.any(p_arr < 0) or np.any(p_arr > 1):
        raise OutOfRange("p must lie in [0, 1]")
    ks = np.zeros(size, dtype=np.int64)
    kl = np.zeros(size, dtype=np.int64)
    last = np.zeros(size, dtype=bool)
    active = np.arange(size)
    while active.size:
        cost = lat.cost(ks[active], kl[active])
        m = lat.safe_jump(lat.threshold - cost)
        jump = m > 0
        if jump.any():
            idx = active[jump]
            k = rng.binomial(m[jump], p_arr[idx])
            ks[idx] += k
            kl[idx] += m[jump] - k
        single = ~jump
        if single.any():
            idx = active[single]
            small = rng.random(idx.size) < p_arr[idx]
            new_ks = ks[idx] + small
            new_kl = kl[idx] + ~small
            crossed = lat.cost(new_ks, new_kl) >= lat.threshold
            move = ~crossed if strict else np.ones_like(crossed)
            ks[idx[move]] = new_ks[move]
            kl[idx[move]] = new_kl[move]
            done = idx[crossed]
            last[done] = small[crossed]
            active = np.concatenate([active[jump], idx[~crossed]])
            active.sort()
    return PassageBatch(ks, kl, last)


# ---------------------------------------------------------------------------
# exact lattice oracle


@dataclass
class DiscreteLaw:
    """Exact law of the stopped state ``(k_small, k_large)``.

    ``prob_last_small[i]`` is the part of ``prob[i]`` on which the crossing
    increment was small, so laws of the stopping summand are available too.
    """

    k_small: np.ndarray
    k_large: np.ndarray
    prob: np.ndarray
    prob_last_small: np.ndarray
    theta: Fraction | float
    R: float
    p: float
    strict: bool = False

    @property
    def size(self) -> np.ndarray:
        return self.k_small + self.k_large

    @property
    def tau(self) -> np.ndarray:
        """First-passage index: ``tau(R)`` (non-strict) or ``tau_bar(R)`` (strict)."""
        return self.size + 1 if self.strict else self.size

    @property
    def s_stop(self) -> np.ndarray:
        """Consumed resources of the stopped (kept) generation."""
        return self.k_small * float(self.theta) + self.k_large

    @property
    def x_freq(self) -> np.ndarray:
        return self.k_small / self.size

    @property
    def total(self) -> float:
        return float(self.prob.sum())

    def expect(self, values) -> float:
        return float(np.dot(self.prob, values))

    def prob_xi_theta(self) -> float:
        return float(self.prob_last_small.sum())

    def rows(self):
        return zip(self.k_small.tolist(), self.k_large.tolist(), self.prob.tolist())


def _dp_state_count(params: SizeParams) -> int:
    n_max = math.floor((params.R + 1) / params.theta_float) + 2
    return n_max * (n_max + 1) // 2


def exact_passage_law(p: float, params: SizeParams, strict: bool = False,
                      max_states: int = MAX_DP_STATES) -> DiscreteLaw:
    """Exact stopping law by forward recursion over anti-diagonals ``n = i + j``.

    ``g`` holds the probability of reaching ``(i, n - i)`` without having
    stopped.  Mass leaving through a crossing step becomes an atom at the
    post-crossing state (non-strict) or at the pre-crossing state (strict).
    """
    _check_p(p)
    if _dp_state_count(params) > max_states:
        raise StateSpaceTooLarge(f"lattice for R={params.R}, theta={params.theta} exceeds {max_states} states")
    lat = Lattice.build(params, strict)
    q = 1.0 - p
    parts = []
    g = np.array([1.0])
    n = 0
    while True:
        i = np.arange(n + 1)
        cost = lat.cost(i, n - i)
        cross_s = cost + lat.small >= lat.threshold
        cross_l = cost + lat.large >= lat.threshold
        out_s = np.where(cross_s, p * g, 0.0)
        out_l = np.where(cross_l, q * g, 0.0)
        if strict:
            parts.append((i, n - i, out_s + out_l, out_s))
        else:
            parts.append((i + 1, n - i, out_s, out_s))
            parts.append((i, n - i + 1, out_l, np.zeros_like(out_l)))
        nxt = np.zeros(n + 2)
        nxt[1:] += np.where(cross_s, 0.0, p * g)
        nxt[:-1] += np.where(cross_l, 0.0, q * g)
        if not nxt.any():
            break
        g = nxt
        n += 1
    ks = np.concatenate([a[0] for a in parts])
    kl = np.concatenate([a[1] for a in parts])
    pr = np.concatenate([a[2] for a in parts])
    pls = np.concatenate([a[3] for a in parts])
    keep = pr > 0
    ks, kl, pr, pls = ks[keep], kl[keep], pr[keep], pls[keep]
    key = ks * (int(kl.max()) + 1) + kl
    uniq, inv = np.unique(key, return_inverse=True)
    prob = np.bincount(inv, weights=pr)
    prob_small = np.bincount(inv, weights=pls)
    first = np.zeros(uniq.size, dtype=np.int64)
    first[inv] = np.arange(inv.size)
    return DiscreteLaw(ks[first].astype(np.int64), kl[first].astype(np.int64), prob, prob_small,
                       params.theta, params.R, float(p), strict)


# ---------------------------------------------------------------------------
# stopping summand and moment expansions


@dataclass(frozen=True)
class StoppingSummandLaw:
    """Limit law of the crossing increment: size-biased ``F_p``."""

    p: float
    q_theta: float

    @property
    def q_one(self) -> float:
        return 1.0 - self.q_theta


def stopping_summand_limit(p: float, theta) -> StoppingSummandLaw:
    _check_p(p)
    return StoppingSummandLaw(p, p * float(theta) / mu(p, theta))


def estimate_stopping_summand(p: float, params: SizeParams, n_sim: int,
                              rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo ``P(xi_tau == theta)`` with its binomial standard error."""
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    batch = sample_passages(p, params, n_sim, rng)
    q_hat = float(batch.last_small.mean())
    return q_hat, math.sqrt(q_hat * (1.0 - q_hat) / n_sim)


def moment_ratio_theory(p: float, theta, R: float, m: int) -> float:
    """``E[(S_tau / tau)^m]`` up to ``O(R^-2)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    mp = mu(p, theta)
    return mp**m + m * (m + 1) / 2 * mp ** (m - 1) * var_xi(p, theta) / R


def moment_ratio_exact(p: float, params: SizeParams, m: int, strict: bool = False) -> float:
    """Exact ``E[(S / n)^m]`` at the stopped (kept) generation."""
    law = exact_passage_law(p, params, strict)
    return law.expect((law.s_stop / law.size) ** m)


def renewal_window_mass(p: float, params: SizeParams, window: str = "theta") -> float:
    """Renewal measure of ``[R - theta, R)`` or ``[R - 1, R)`` via the stopping summand."""
    if window not in ("theta", "one"):
        raise ValueError("window must be 'theta' or 'one'")
    if (window == "theta" and p == 0) or (window == "one" and p == 1):
        raise DivisionAtBoundary(f"window {window!r} undefined at p={p}")
    law = exact_passage_law(p, params)
    q_theta = law.prob_xi_theta()
    if window == "theta":
        return q_theta / p
    return (law.total - q_theta) / (1.0 - p)
