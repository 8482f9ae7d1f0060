"""Long-term behavior of the limiting diffusion.

With ``c = 1 - theta`` and no mutation, ``rho(x) = s(x) x (1 - x)`` and

    2 d(z) / sigma^2(z) = 2 (s(z) - c) / (1 - c z)        (original rule)
    2 d(z) / sigma^2(z) = 2 s(z) / (1 - c z)              (strict rule)

so the scale density is ``S'(y) = exp(-int_eta^y 2 d / sigma^2)``.  The
``-c`` part integrates to ``((1 - c y) / (1 - c eta))^(-2)``; for constant
``s`` the whole density is ``((1 - c y) / (1 - c eta))^(2 s / c - 2)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import NonIntegrable, QuadratureFailure

DEFAULT_TOL = 1e-8
QUAD_LIMIT = 10_000
BRANCH_TOL = 1e-10


def _quad(f, a, b, tol, points=None, **kw):
    if a == b:
        return 0.0
    val, err, info = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=QUAD_LIMIT,
                                    points=points, full_output=1, **kw)[:3]
    if err > tol or not math.isfinite(val):
        raise QuadratureFailure(f"quadrature on [{a}, {b}] reached error {err:.3g} > tol {tol:.3g}")
    return val


@dataclass(frozen=True)
class ScaleSpec:
    """Scale function data: selection ``s`` (constant or callable) and reference points.

    ``S(x0_ref) = 0`` and ``S'(eta) = 1``.
    """

    theta: float
    s: float | Callable = 0.0
    x0_ref: float = 0.5
    eta: float = 0.5
    variant: str = "original"

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not (0 < self.x0_ref < 1 and 0 < self.eta < 1):
            raise ValueError("reference points must lie in (0, 1)")
        if self.variant not in ("original", "strict"):
            raise ValueError("variant must be 'original' or 'strict'")

    @property
    def c(self) -> float:
        return 1.0 - self.theta

    @property
    def constant_s(self) -> bool:
        return not callable(self.s)

    @property
    def bias(self) -> float:
        """Stopping-bias coefficient entering ``2 d / sigma^2``."""
        return self.c if self.variant == "original" else 0.0

    def exponent(self) -> float:
        """Power of ``(1 - c y)`` in ``S'`` for constant ``s``."""
        return 2.0 * (float(self.s) - self.bias) / self.c


def scale_density(y, spec: ScaleSpec, tol: float = DEFAULT_TOL):
    """``S'(y)``; closed form for constant ``s``, inner quadrature otherwise."""
    c = spec.c
    ratio = (1.0 - c * np.asarray(y, dtype=float)) / (1.0 - c * spec.eta)
    if spec.constant_s:
        return ratio ** spec.exponent()
    inner = _quad(lambda z: spec.s(z) / (1.0 - c * z), spec.eta, float(y), tol)
    return ratio ** (-2.0 * spec.bias / c) * math.exp(-2.0 * inner)


def _scale_closed(x, spec: ScaleSpec):
    c, a = spec.c, spec.exponent() + 1.0
    base = 1.0 - c * spec.eta

    def antider(y):
        u = (1.0 - c * y) / base
        if abs(a) < BRANCH_TOL:
            return -base / c * math.log(u)
        return -base / (c * a) * u**a

    return antider(x) - antider(spec.x0_ref)


def scale_function(x: float, spec: ScaleSpec, tol: float = DEFAULT_TOL) -> float:
    """``S(x) = int_{x0_ref}^x S'(y) dy`` by adaptive quadrature."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if spec.constant_s:
        return _quad(lambda y: scale_density(y, spec), spec.x0_ref, x, tol)
    # nested: the inner integral is itself adaptive
    return _quad(lambda y: scale_density(y, spec, tol / 10), spec.x0_ref, x, tol)


def scale_function_closed(x: float, spec: ScaleSpec) -> float:
    """Closed-form antiderivative of ``S'`` for constant ``s``."""
    if not spec.constant_s:
        raise ValueError("closed form needs constant s")
    return _scale_closed(x, spec)


def extinction_prob_genic(x, theta: float, s: float):
    """``P_x(T_0 < T_1)`` for genic selection ``rho(x) = s x (1 - x)``."""
    theta = float(theta)
    x = np.asarray(x, dtype=float)
    c = 1.0 - theta
    a = -1.0 + 2.0 * s / c
    base = 1.0 - c * x
    if abs(c - 2.0 * s) < BRANCH_TOL:
        out = (math.log(theta) - np.log(base)) / math.log(theta)
    else:
        out = (theta**a - base**a) / (theta**a - 1.0)
    return float(out) if out.ndim == 0 else out


def extinction_prob_scale(x: float, spec: ScaleSpec, tol: float = DEFAULT_TOL) -> float:
    s0, s1 = scale_function(0.0, spec, tol), scale_function(1.0, spec, tol)
    return (s1 - scale_function(x, spec, tol)) / (s1 - s0)


def mean_absorption_neutral(x, theta: float):
    """Closed-form ``E_x[T_0 ^ T_1]`` for ``rho = 0`` under the original rule."""
    theta = float(theta)
    x = np.asarray(x, dtype=float)
    c = 1.0 - theta
    inv = 1.0 / (1.0 - c * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = 2.0 * np.log1p(-x) * (1.0 / theta - inv) / (1.0 - 1.0 / theta)
        t2 = 2.0 * np.log(x) * (1.0 - inv) / c
    t1 = np.where(x >= 1.0, 0.0, t1)
    t2 = np.where(x <= 0.0, 0.0, t2)
    out = t1 + t2
    return float(out) if out.ndim == 0 else out


def mean_absorption_numeric(x: float, theta: float, s: float | Callable = 0.0,
                            tol: float = DEFAULT_TOL, variant: str = "original") -> float:
    """``E_x[T_0 ^ T_1] = int_0^1 G(x, v) dv`` with the Green's function of the diffusion."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    spec = ScaleSpec(theta, s, x0_ref=0.5, eta=0.5, variant=variant)
    c = spec.c
    inner_tol = tol / 100

    if spec.constant_s:
        def S(y):
            return _scale_closed(y, spec)
    else:
        def S(y):
            return scale_function(y, spec, inner_tol)

    s0, s1, sx = S(0.0), S(1.0), S(x)
    span = s1 - s0

    def speed(v):
        # 1 / (sigma^2 S') with sigma^2 = v (1 - v) (1 - c v)
        return 1.0 / (v * (1.0 - v) * (1.0 - c * v) * scale_density(v, spec, inner_tol))

    left = _quad(lambda v: (S(v) - s0) * speed(v), 0.0, x, tol / 2)
    right = _quad(lambda v: (s1 - S(v)) * speed(v), x, 1.0, tol / 2)
    return 2.0 * ((s1 - sx) / span * left + (sx - s0) / span * right)


def stationary_exponents(theta: float, beta0: float, beta1: float, s: float) -> tuple[float, float, float]:
    """Powers of ``x``, ``1 - x`` and ``1 - (1 - theta) x`` in the stationary density."""
    theta = float(theta)
    c = 1.0 - theta
    return (2.0 * beta0 - 1.0,
            2.0 * beta1 / theta - 1.0,
            -2.0 * beta0 - 2.0 * beta1 / theta - 2.0 * s / c + 1.0)


@dataclass
class AnalyticsResult:
    kind: str
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.grid.tolist(), self.values.tolist())

    def meta_json(self) -> str:
        return json.dumps(self.meta, indent=2, sort_keys=True, default=float)


def stationary_normalizer(theta, beta0, beta1, s, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """``int_0^1`` of the unnormalized density and its error estimate.

    The algebraic endpoint factors go into QUADPACK's ``alg`` weight, so only
    the smooth factor ``(1 - (1 - theta) x)^e`` is sampled.
    """
    if beta0 <= 0 or beta1 <= 0:
        raise NonIntegrable("a stationary law needs beta0 > 0 and beta1 > 0")
    a, b, e = stationary_exponents(theta, beta0, beta1, s)
    c = 1.0 - float(theta)
    val, err = integrate.quad(lambda x: (1.0 - c * x) ** e, 0.0, 1.0, weight="alg", wvar=(a, b),
                              epsabs=tol, epsrel=0.0, limit=QUAD_LIMIT)
    if err > tol or not math.isfinite(val):
        raise QuadratureFailure(f"normalization error {err:.3g} > tol {tol:.3g}")
    return val, err


def stationary_density(x_grid, theta: float, beta0: float, beta1: float, s: float = 0.0,
                       tol: float = DEFAULT_TOL) -> AnalyticsResult:
    """Normalized stationary density of the diffusion with genic selection and mutation."""
    x = np.asarray(x_grid, dtype=float)
    z, err = stationary_normalizer(theta, beta0, beta1, s, tol)
    a, b, e = stationary_exponents(theta, beta0, beta1, s)
    c = 1.0 - float(theta)
    with np.errstate(divide="ignore"):
        vals = x**a * (1.0 - x) ** b * (1.0 - c * x) ** e / z
    meta = {"theta": float(theta), "beta0": beta0, "beta1": beta1, "s": s, "tol": tol,
            "normalizer": z, "normalizer_abserr": err, "exponents": [a, b, e]}
    return AnalyticsResult("stationary_density", x, vals, meta)


def stationary_cdf(x, theta, beta0, beta1, s=0.0, tol: float = DEFAULT_TOL) -> float:
    """Stationary mass of ``[0, x]``."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    z, _ = stationary_normalizer(theta, beta0, beta1, s, tol)
    a, b, e = stationary_exponents(theta, beta0, beta1, s)
    c = 1.0 - float(theta)
    part, _ = integrate.quad(lambda u: (1.0 - c * u) ** e * (1.0 - u) ** b, 0.0, x, weight="alg",
                             wvar=(a, 0.0), epsabs=tol, epsrel=0.0, limit=QUAD_LIMIT)
    return part / z


def extinction_curve(x_grid, theta, s) -> AnalyticsResult:
    x = np.asarray(x_grid, dtype=float)
    return AnalyticsResult("extinction", x, np.asarray(extinction_prob_genic(x, theta, s), dtype=float),
                           {"theta": float(theta), "s": s})


def absorption_curve(x_grid, theta, s=0.0, tol: float = DEFAULT_TOL, variant="original") -> AnalyticsResult:
    x = np.asarray(x_grid, dtype=float)
    if s == 0.0 and variant == "original":
        vals, method = np.asarray(mean_absorption_neutral(x, theta), dtype=float), "closed-form"
    else:
        vals = np.array([mean_absorption_numeric(v, theta, s, tol, variant) for v in x])
        method = "quadrature"
    vals = np.where((x <= 0) | (x >= 1), 0.0, vals)
    return AnalyticsResult("absorption_time", x, vals,
                           {"theta": float(theta), "s": s, "tol": tol, "method": method, "variant": variant})
