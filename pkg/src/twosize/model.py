"""Model parameters, sampling-probability families and increment-law quantities.

A generation is built by sampling parents until the consumed resources reach
``R``.  Each sampled parent places a small offspring (cost ``theta``) with
probability ``rho_R(x)`` and a large one (cost 1) otherwise, where ``x`` is the
current frequency of small individuals.  The families below supply ``rho_R``
together with its large-``R`` limit ``rho(x) = lim R (rho_R(x) - x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np

from .errors import BoundarySign, BoundaryViolation, ConfigError, OutOfRange

# floats closer than this to a rational with a small denominator are taken as exact
_RATIONAL_TOL = 1e-12
_MAX_DENOMINATOR = 10_000
_RANGE_TOL = 1e-12


def as_theta(value) -> Fraction | float:
    """Normalize a size parameter to an exact ``Fraction`` when possible.

    Strings are parsed exactly (``"0.3"`` and ``"3/10"`` give ``Fraction(3, 10)``).
    Floats are snapped to the nearest rational with denominator at most 10**4 if
    they agree to 1e-12; anything else stays a float and is treated as
    irrational (non-arithmetic increments).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as exc:
            raise ConfigError(f"cannot parse theta {value!r}") from exc
    value = float(value)
    frac = Fraction(value).limit_denominator(_MAX_DENOMINATOR)
    if abs(float(frac) - value) <= _RATIONAL_TOL:
        return frac
    return value


@dataclass(frozen=True)
class SizeParams:
    """Size parameter ``theta`` of small individuals and resource level ``R``."""

    theta: Fraction | float
    resources: float

    def __post_init__(self):
        theta = as_theta(self.theta)
        object.__setattr__(self, "theta", theta)
        if not 0 < theta < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {theta}")
        if isinstance(self.resources, str):
            object.__setattr__(self, "resources", float(Fraction(self.resources)))
        if not self.resources > 0:
            raise ConfigError(f"R must be positive, got {self.resources}")

    @property
    def exact(self) -> bool:
        return isinstance(self.theta, Fraction)

    @property
    def theta_float(self) -> float:
        return float(self.theta)

    @property
    def R(self) -> float:
        return float(self.resources)

    def max_size(self) -> float:
        """Upper bound ``(R + 1) / theta`` on the population size."""
        return (self.R + 1.0) / self.theta_float


def mu(p, theta):
    """Mean increment ``1 - (1 - theta) p``."""
    return 1.0 - (1.0 - float(theta)) * p


def var_xi(p, theta):
    """Increment variance ``(1 - theta)^2 p (1 - p)``."""
    c = 1.0 - float(theta)
    return c * c * p * (1.0 - p)


def second_moment_xi(p, theta):
    theta = float(theta)
    return 1.0 - p * (1.0 - theta) * (1.0 + theta)


@dataclass(frozen=True)
class IncrementLaw:
    """Two-point law ``p delta_theta + (1 - p) delta_1`` of one resource increment."""

    p: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise OutOfRange(f"p must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return mu(self.p, self.theta)

    @property
    def var(self) -> float:
        return var_xi(self.p, self.theta)

    @property
    def second_moment(self) -> float:
        return second_moment_xi(self.p, self.theta)

    @property
    def size_biased_mean(self) -> float:
        """Mean of the limiting stopping summand, ``E[xi^2] / E[xi]``."""
        return self.second_moment / self.mean


# ---------------------------------------------------------------------------
# sampling-probability families


def _check_range(values, what="rho_R"):
    arr = np.asarray(values, dtype=float)
    if np.any(arr < -_RANGE_TOL) or np.any(arr > 1 + _RANGE_TOL) or np.any(np.isnan(arr)):
        raise OutOfRange(f"{what} leaves [0, 1] for these parameters")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


class SelectionMutation(NamedTuple):
    """Selection function ``s_R`` and mutation probabilities of the finite model."""

    s_R: Callable
    beta0_R: float
    beta1_R: float


class RhoSpec:
    """Base class of the sampling-probability families.

    Subclasses implement ``_finite(x, R)`` (may be vectorized), ``limit(x)`` and
    ``selection_mutation(R)``.
    """

    kind: str = ""

    def finite(self, x, R):
        return _check_range(self._finite(np.asarray(x, dtype=float), float(R)))

    def _finite(self, x, R):
        raise NotImplementedError

    def limit(self, x):
        raise NotImplementedError

    def selection_mutation(self, R) -> SelectionMutation:
        """Express ``rho_R`` through parent selection followed by mutation."""
        return SelectionMutation(lambda x: self.finite(x, R), 0.0, 0.0)

    @property
    def absorbing(self) -> tuple[bool, bool]:
        """Whether 0 and 1 are absorbing in the limit (``rho(0) == 0``, ``rho(1) == 0``)."""
        return (float(self.limit(0.0)) == 0.0, float(self.limit(1.0)) == 0.0)

    def to_dict(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_dict(data: dict) -> "RhoSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        try:
            cls = _RHO_KINDS[kind]
        except KeyError:
            raise ConfigError(f"unknown rho kind {kind!r}; expected one of {sorted(_RHO_KINDS)}") from None
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for rho kind {kind!r}: {exc}") from exc


@dataclass(frozen=True)
class Neutral(RhoSpec):
    kind = "neutral"

    def _finite(self, x, R):
        return x

    def limit(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) + 0.0

    def selection_mutation(self, R):
        return SelectionMutation(lambda x: x, 0.0, 0.0)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class GenicSelection(RhoSpec):
    """Genic selection; ``s > 0`` favors small individuals, ``s < 0`` large ones."""

    s: float = 0.0
    kind = "genic"

    def _finite(self, x, R):
        a = self.s / R
        if abs(a) >= 1:
            raise OutOfRange(f"|s|/R must be < 1, got s={self.s}, R={R}")
        return (1.0 + a) * x / (1.0 + a * x)

    def limit(self, x):
        x = np.asarray(x, dtype=float)
        return self.s * x * (1.0 - x)

    def to_dict(self):
        return {"kind": self.kind, "s": self.s}


@dataclass(frozen=True)
class FittestTypeWins(RhoSpec):
    """Fittest-type-wins selection with ``G - 1`` extra potential parents.

    ``P(G = 1) = 1 - 1/R`` and ``P(G = k + 1) = weights[k - 1] / R``; a small
    offspring is placed whenever one of the ``G`` potential parents is small.
    The weights are truncated at ``K`` terms and renormalized.
    """

    weights: tuple = (1.0,)
    K: int = 64
    kind = "fittest"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)[: self.K]
        if w.size == 0 or np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("fittest-type-wins weights must be nonnegative with positive sum")
        w = w / w.sum()
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def geometric(cls, q: float, K: int = 64) -> "FittestTypeWins":
        """Weights ``s_k = (1 - q) q^(k-1)``."""
        k = np.arange(1, K + 1)
        return cls(tuple((1 - q) * q ** (k - 1)), K=K)

    def _powers(self, x):
        k = np.arange(1, len(self.weights) + 1)
        return (1.0 - x)[:, None] ** k

    def _finite(self, x, R):
        if R < 1:
            raise OutOfRange("fittest-type-wins needs R >= 1")
        x1 = np.atleast_1d(x)
        tail = ((1.0 - x1)[:, None] * self._powers(x1)) @ np.asarray(self.weights)
        val = 1.0 - (1.0 - 1.0 / R) * (1.0 - x1) - tail / R
        return val if np.ndim(x) else val[0]

    def limit(self, x):
        # exact limit of R (s_R(x) - x): (1 - x) sum_k s_k (1 - (1 - x)^k)
        x1 = np.atleast_1d(np.asarray(x, dtype=float))
        val = (1.0 - x1) * ((1.0 - self._powers(x1)) @ np.asarray(self.weights))
        return val if np.ndim(x) else val[0]

    def to_dict(self):
        return {"kind": self.kind, "weights": list(self.weights), "K": self.K}


@dataclass(frozen=True)
class Diploid(RhoSpec):
    s: float = 0.0
    h: float = 0.5
    kind = "diploid"

    def __post_init__(self):
        if self.s < 0 or self.h < 0:
            raise ConfigError("diploid selection needs s >= 0 and h >= 0")

    def limit(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.s * x * (1.0 - x) * ((1.0 - 2.0 * self.h) * x + self.h)

    def _finite(self, x, R):
        return x + self.limit(x) / R

    def to_dict(self):
        return {"kind": self.kind, "s": self.s, "h": self.h}


@dataclass(frozen=True)
class ParentIndependentMutation(RhoSpec):
    beta0: float = 0.0
    beta1: float = 0.0
    kind = "mutation"

    def __post_init__(self):
        if self.beta0 < 0 or self.beta1 < 0:
            raise ConfigError("mutation rates must be nonnegative")

    def _finite(self, x, R):
        return x * (1.0 - self.beta1 / R) + (1.0 - x) * self.beta0 / R

    def limit(self, x):
        x = np.asarray(x, dtype=float)
        return self.beta0 * (1.0 - x) - self.beta1 * x

    def selection_mutation(self, R):
        return SelectionMutation(lambda x: x, self.beta0 / R, self.beta1 / R)

    def to_dict(self):
        return {"kind": self.kind, "beta0": self.beta0, "beta1": self.beta1}


@dataclass(frozen=True)
class CustomTable(RhoSpec):
    """Piecewise-linear ``rho`` on a user grid.

    ``limit_values`` tabulates ``rho`` on ``x_grid``.  If ``finite_values`` is
    given it tabulates ``rho_R`` directly (for the one ``R`` it was built for);
    otherwise ``rho_R(x) = x + rho(x) / R``.
    """

    x_grid: tuple = (0.0, 1.0)
    limit_values: tuple = (0.0, 0.0)
    finite_values: tuple | None = None
    kind = "custom"

    def __post_init__(self):
        xs = np.asarray(self.x_grid, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0):
            raise ConfigError("custom table grid must increase strictly from 0 to 1")
        for name in ("x_grid", "limit_values", "finite_values"):
            vals = getattr(self, name)
            if vals is not None:
                vals = tuple(float(v) for v in vals)
                if len(vals) != xs.size:
                    raise ConfigError(f"{name} must have one value per grid point")
                object.__setattr__(self, name, vals)
        if self.finite_values is not None:
            _check_range(self.finite_values, "tabulated rho_R")

    def _finite(self, x, R):
        if self.finite_values is not None:
            return np.interp(x, self.x_grid, self.finite_values)
        return x + np.interp(x, self.x_grid, self.limit_values) / R

    def limit(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x_grid, self.limit_values)

    def selection_mutation(self, R):
        dec = decompose_rho_finite(lambda x: self.finite(x, R))
        return SelectionMutation(dec.s_R, dec.beta0_R, dec.beta1_R)

    def to_dict(self):
        out = {"kind": self.kind, "x_grid": list(self.x_grid), "limit_values": list(self.limit_values)}
        if self.finite_values is not None:
            out["finite_values"] = list(self.finite_values)
        return out


_RHO_KINDS = {
    cls.kind: cls
    for cls in (Neutral, GenicSelection, FittestTypeWins, Diploid, ParentIndependentMutation, CustomTable)
}


def rho_finite(spec: RhoSpec, params: SizeParams, x):
    """``rho_R(x)`` for the family ``spec`` at resource level ``params.R``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise OutOfRange(f"x must lie in [0, 1], got {x}")
    return spec.finite(x, params.R)


def rho_limit(spec: RhoSpec, x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise OutOfRange(f"x must lie in [0, 1], got {x}")
    out = spec.limit(x_arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# decompositions


class FiniteDecomposition(NamedTuple):
    beta0_R: float
    beta1_R: float
    s_R: Callable
    degenerate: bool


def decompose_rho_finite(rhoR: Callable, grid: int = 1001) -> FiniteDecomposition:
    """Write a black-box ``rho_R`` as selection followed by mutation.

    Requires ``rho_R`` to attain its extremes at the boundary (checked on
    ``grid`` equispaced points).  When ``rho_R(0) == rho_R(1)`` the selection
    function is arbitrary; the identity is returned with ``degenerate=True``.
    """
    xs = np.linspace(0.0, 1.0, grid)
    vals = np.array([float(rhoR(x)) for x in xs])
    r0, r1 = vals[0], vals[-1]
    lo, hi = min(r0, r1), max(r0, r1)
    if np.any(vals < lo - _RANGE_TOL) or np.any(vals > hi + _RANGE_TOL):
        raise BoundaryViolation("rho_R must attain its extremes at x = 0 and x = 1")
    beta0, beta1 = r0, 1.0 - r1
    if r0 == r1:
        return FiniteDecomposition(beta0, beta1, lambda x: x, True)
    span = r1 - r0

    def s_R(x):
        return (rhoR(x) - r0) / span

    return FiniteDecomposition(beta0, beta1, s_R, False)


def recompose_rho_finite(dec: FiniteDecomposition, x):
    """Selection followed by parent-independent mutation."""
    s = dec.s_R(x)
    return s * (1.0 - dec.beta1_R) + (1.0 - s) * dec.beta0_R


def decompose_rho_limit(rho: Callable, lipschitz_grid: int = 1001):
    """Split a drift function into selection ``sigma`` and mutation rates.

    Returns ``(sigma, beta0, beta1)`` with ``rho(x) = sigma(x) + beta0 (1 - x) - beta1 x``
    and ``sigma(0) = sigma(1) = 0``.
    """
    xs = np.linspace(0.0, 1.0, lipschitz_grid)
    vals = np.array([float(rho(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise BoundarySign("rho must be finite on [0, 1]")
    beta0, beta1 = float(vals[0]), -float(vals[-1])
    if beta0 < 0 or beta1 < 0:
        raise BoundarySign(f"need rho(0) >= 0 and rho(1) <= 0, got {vals[0]}, {vals[-1]}")

    def sigma(x):
        return rho(x) - beta0 * (1.0 - x) + beta1 * x

    return sigma, beta0, beta1


def lipschitz_estimate(rho: Callable, grid: int = 1001) -> float:
    xs = np.linspace(0.0, 1.0, grid)
    vals = np.array([float(rho(x)) for x in xs])
    return float(np.max(np.abs(np.diff(vals))) * (grid - 1))
