"""One-generation moments ``R E_x[(X_1 - x)^n]`` and the discrete generator.

Exact values come from pushing the renewal oracle through
``X_1 = k_small / (k_small + k_large)``; Monte Carlo values from the
vectorized passage sampler.  As ``R`` grows the moments approach

    n = 1:  -(1 - theta) x (1 - x) + rho(x)   (strict rule: rho(x))
    n = 2:  x (1 - x) (1 - (1 - theta) x)
    n = 3, 4:  0
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .errors import UnsupportedOrder
from .model import RhoSpec, SizeParams, mu, rho_finite, rho_limit
from .renewal import exact_passage_law, sample_passages
from .sde import DiffusionSpec, generator_apply
from .streams import TAG_MOMENT, blocks, merge_moments, ordered_map, stream, summarize

MOMENT_BLOCK = 10_000


def _check_order(n):
    if n not in (1, 2, 3, 4):
        raise UnsupportedOrder(f"moment order must be 1..4, got {n}")


def moment_limit(x, n: int, theta, rho: Callable, variant: str = "original"):
    _check_order(n)
    x = np.asarray(x, dtype=float)
    c = 1.0 - float(theta)
    if n == 1:
        out = np.asarray(rho(x), dtype=float)
        if variant == "original":
            out = out - c * x * (1.0 - x)
    elif n == 2:
        out = x * (1.0 - x) * (1.0 - c * x)
    else:
        out = np.zeros_like(x)
    return float(out) if out.ndim == 0 else out


def moment_estimate(x: float, n: int, spec: RhoSpec, params: SizeParams, n_sim: int,
                    rng: np.random.Generator, strict: bool = False) -> tuple[float, float]:
    """Sample mean of ``R (X_1 - x)^n`` over ``n_sim`` one-step simulations and its SE."""
    _check_order(n)
    if n_sim < 2:
        raise ValueError("n_sim must be >= 2")
    cnt, mean, m2 = summarize(_one_step_values(x, n, spec, params, n_sim, rng, strict))
    return mean, math.sqrt(m2 / (cnt - 1) / cnt)


def _one_step_values(x, n, spec, params, size, rng, strict):
    p = rho_finite(spec, params, x)
    batch = sample_passages(p, params, size, rng, strict=strict)
    return params.R * (batch.x_freq - x) ** n


def moment_exact(x: float, n: int, spec: RhoSpec, params: SizeParams, strict: bool = False,
                 center: str = "x") -> float:
    """Exact ``R E_x[(X_1 - a)^n]`` with ``a = x`` or ``a = rho_R(x)`` (``center='rho'``)."""
    _check_order(n)
    p = rho_finite(spec, params, x)
    a = {"x": x, "rho": p}[center]
    law = exact_passage_law(p, params, strict)
    return params.R * law.expect((law.x_freq - a) ** n)


def exact_moments(x: float, spec: RhoSpec, params: SizeParams, strict: bool = False) -> np.ndarray:
    """``E_x[(X_1 - x)^n]`` for n = 1..4 from one oracle run (not scaled by R)."""
    law = exact_passage_law(rho_finite(spec, params, x), params, strict)
    d = law.x_freq - x
    return np.array([law.expect(d**k) for k in range(1, 5)])


def centered_ratio_moment(x: float, n: int, spec: RhoSpec, params: SizeParams, strict: bool = False) -> float:
    """``(-1)^n (1 - theta)^-n E[(S / tau - mu)^n]`` at ``p = rho_R(x)``."""
    p = rho_finite(spec, params, x)
    law = exact_passage_law(p, params, strict)
    ratio = law.s_stop / law.size
    c = 1.0 - params.theta_float
    return (-1) ** n / c**n * law.expect((ratio - mu(p, params.theta)) ** n)


@dataclass(frozen=True)
class TestFunction:
    """A function together with its first four derivatives."""

    f: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    d4: Callable

    __test__ = False  # not a pytest class

    @classmethod
    def power(cls, k: int) -> "TestFunction":
        def dk(j):
            coef = math.perm(k, j) if j <= k else 0
            return lambda x: coef * np.asarray(x, dtype=float) ** max(k - j, 0) if coef else 0.0 * np.asarray(x)
        return cls(dk(0), dk(1), dk(2), dk(3), dk(4))

    @classmethod
    def constant(cls, value: float = 1.0) -> "TestFunction":
        zero = lambda x: 0.0 * np.asarray(x, dtype=float)
        return cls(lambda x: value + zero(x), zero, zero, zero, zero)


def discrete_generator(fn: TestFunction, x: float, spec: RhoSpec, params: SizeParams,
                       method: str = "exact", n_sim: int = 10**5, rng: np.random.Generator | None = None,
                       strict: bool = False) -> tuple[float, float]:
    """``R E_x[f(X_1) - f(x)]``; returns ``(value, standard error)`` (SE 0 for exact)."""
    p = rho_finite(spec, params, x)
    fx = float(fn.f(x))
    if method == "exact":
        law = exact_passage_law(p, params, strict)
        return params.R * law.expect(np.asarray(fn.f(law.x_freq), dtype=float) - fx), 0.0
    if method != "mc":
        raise ValueError("method must be 'exact' or 'mc'")
    if rng is None:
        raise ValueError("Monte Carlo needs an rng")
    batch = sample_passages(p, params, n_sim, rng, strict=strict)
    vals = params.R * (np.asarray(fn.f(batch.x_freq), dtype=float) - fx)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_sim))


def limit_generator(fn: TestFunction, x: float, spec: RhoSpec, theta, strict: bool = False) -> float:
    dspec = DiffusionSpec.from_rho_spec(spec, theta, "strict" if strict else "original")
    return float(generator_apply((fn.f(x), fn.d1(x), fn.d2(x)), x, dspec))


def taylor_generator(fn: TestFunction, x: float, spec: RhoSpec, params: SizeParams, strict: bool = False):
    """Third-order Taylor reconstruction of the discrete generator and its remainder bound.

    The bound uses ``max |f''''|`` sampled on a fine grid of [0, 1].
    """
    m = exact_moments(x, spec, params, strict)
    R = params.R
    approx = R * (m[0] * fn.d1(x) + m[1] * fn.d2(x) / 2 + m[2] * fn.d3(x) / 6)
    d4max = float(np.max(np.abs(fn.d4(np.linspace(0.0, 1.0, 2001)))))
    return float(approx), R / 12 * m[3] * d4max


@dataclass
class MomentReport:
    x_grid: np.ndarray
    order: int
    estimates: np.ndarray
    std_errs: np.ndarray
    theory: np.ndarray
    method: str
    R: float
    theta: float
    spec: dict
    strict: bool = False
    meta: dict = field(default_factory=dict)

    def rows(self):
        for i in range(self.x_grid.size):
            yield (float(self.x_grid[i]), self.order, float(self.estimates[i]), float(self.std_errs[i]),
                   float(self.theory[i]), self.method)

    def within_band(self, n_se: float = 3.0, slack: float = 0.0) -> np.ndarray:
        return np.abs(self.estimates - self.theory) <= n_se * self.std_errs + slack


def _moment_block(task, n, spec, params, strict, seed):
    point, x, b, size = task
    vals = _one_step_values(x, n, spec, params, size, stream(seed, TAG_MOMENT, point, b), strict)
    return summarize(vals)


def drift_scan(x_grid, n: int, spec: RhoSpec, params: SizeParams, n_sim: int, seed: int,
               strict: bool = False, method: str = "mc", workers: int = 1) -> MomentReport:
    """Moment of order ``n`` on a grid of frequencies, Monte Carlo or exact.

    Monte Carlo work for grid point ``i`` is cut into blocks of 10**4
    replicates; block ``b`` uses the stream keyed ``(i, b)`` and partial
    moments are merged in block order.
    """
    _check_order(n)
    xs = np.asarray(x_grid, dtype=float)
    variant = "strict" if strict else "original"
    theory = moment_limit(xs, n, params.theta, partial(rho_limit, spec), variant)
    if method == "exact":
        est = np.array([moment_exact(x, n, spec, params, strict) for x in xs])
        se = np.zeros_like(est)
    elif method == "mc":
        if n_sim < 2:
            raise ValueError("n_sim must be >= 2")
        tasks = [(i, float(x), b, stop - start)
                 for i, x in enumerate(xs) for b, start, stop in blocks(n_sim, MOMENT_BLOCK)]
        fn = partial(_moment_block, n=n, spec=spec, params=params, strict=strict, seed=seed)
        parts = ordered_map(fn, tasks, workers)
        per_block = len(blocks(n_sim, MOMENT_BLOCK))
        est, se = np.empty(xs.size), np.empty(xs.size)
        for i in range(xs.size):
            cnt, mean, m2 = merge_moments(parts[i * per_block:(i + 1) * per_block])
            est[i] = mean
            se[i] = math.sqrt(m2 / (cnt - 1) / cnt)
    else:
        raise ValueError("method must be 'mc' or 'exact'")
    return MomentReport(xs, n, est, se, np.asarray(theory, dtype=float), method, params.R,
                        params.theta_float, spec.to_dict(), strict,
                        {"n_sim": n_sim if method == "mc" else None, "seed": seed if method == "mc" else None})
