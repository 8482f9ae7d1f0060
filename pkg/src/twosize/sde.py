"""Limiting diffusions, their generator and Euler-Maruyama integration.

Original rule:  dX = (-(1 - theta) X (1 - X) + rho(X)) dt + sqrt(X (1 - X) (1 - (1 - theta) X)) dB
Strict rule:    dX = rho(X) dt + (same noise)

Paths are clamped to [0, 1].  A boundary with ``rho == 0`` there has zero
drift and zero noise, so a clamped path that touches it stays put.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .errors import InvalidStep, NonAbsorbing, OutOfRange
from .model import RhoSpec, rho_limit
from .streams import TAG_SDE, blocks, ordered_map, stream

TIMEOUT_FLAG = 0.01
SDE_BLOCK = 1000


@dataclass(frozen=True)
class DiffusionSpec:
    theta: float
    rho: Callable
    variant: str = "original"

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        if not 0 < self.theta < 1:
            raise OutOfRange(f"theta must lie in (0, 1), got {self.theta}")
        if self.variant not in ("original", "strict"):
            raise ValueError("variant must be 'original' or 'strict'")

    @classmethod
    def from_rho_spec(cls, spec: RhoSpec, theta, variant: str = "original") -> "DiffusionSpec":
        return cls(float(theta), partial(rho_limit, spec), variant)

    @property
    def absorbing(self) -> tuple[bool, bool]:
        return float(self.rho(0.0)) == 0.0, float(self.rho(1.0)) == 0.0


def drift(x, spec: DiffusionSpec):
    x = np.asarray(x, dtype=float)
    d = np.asarray(spec.rho(x), dtype=float)
    if spec.variant == "original":
        d = d - (1.0 - spec.theta) * x * (1.0 - x)
    return float(d) if d.ndim == 0 else d


def diffusion_sq(x, spec: DiffusionSpec):
    x = np.asarray(x, dtype=float)
    s2 = np.maximum(x * (1.0 - x) * (1.0 - (1.0 - spec.theta) * x), 0.0)
    return float(s2) if s2.ndim == 0 else s2


def generator_apply(f_val_d1_d2, x, spec: DiffusionSpec):
    """``d(x) f'(x) + sigma^2(x) f''(x) / 2`` from caller-supplied derivatives."""
    _, d1, d2 = f_val_d1_d2
    return drift(x, spec) * d1 + 0.5 * diffusion_sq(x, spec) * d2


@dataclass
class SdePath:
    times: np.ndarray
    values: np.ndarray
    absorbed_at: tuple[float, float] | None = None

    def rows(self):
        return zip(self.times.tolist(), self.values.tolist())


def _grid(h, T):
    if not h > 0:
        raise InvalidStep(f"step size must be positive, got {h}")
    if not T >= h:
        raise InvalidStep(f"horizon T={T} shorter than step h={h}")
    n = max(1, round(T / h))
    return n, T / n


def _em_step(x, spec, h, z):
    return np.clip(x + drift(x, spec) * h + np.sqrt(diffusion_sq(x, spec) * h) * z, 0.0, 1.0)


def euler_maruyama(x0: float, spec: DiffusionSpec, h: float, T: float, rng: np.random.Generator) -> SdePath:
    """One clamped Euler-Maruyama path on the grid ``0, h, ..., T``.

    ``h`` is adjusted to ``T / round(T / h)`` so the grid ends at ``T``.
    """
    if not 0.0 <= x0 <= 1.0:
        raise OutOfRange(f"x0 must lie in [0, 1], got {x0}")
    n, h = _grid(h, T)
    z = rng.standard_normal(n)
    vals = np.empty(n + 1)
    vals[0] = x = float(x0)
    absorbed = None
    if x in (0.0, 1.0):
        absorbed = (0.0, x)
    for k in range(n):
        x = float(_em_step(x, spec, h, z[k]))
        vals[k + 1] = x
        if absorbed is None and x in (0.0, 1.0):
            absorbed = ((k + 1) * h, x)
    return SdePath(np.arange(n + 1) * h, vals, absorbed)


def euler_maruyama_ensemble(x0: float, spec: DiffusionSpec, h: float, T: float, n_paths: int,
                            rng: np.random.Generator, record_every: int | None = None) -> np.ndarray:
    """Vectorized paths; returns endpoints, or a ``(n_paths, n_records)`` array
    of states at every ``record_every``-th grid point when requested."""
    n, h = _grid(h, T)
    x = np.full(n_paths, float(x0))
    recs = [x.copy()] if record_every else None
    for k in range(1, n + 1):
        x = _em_step(x, spec, h, rng.standard_normal(n_paths))
        if record_every and k % record_every == 0:
            recs.append(x.copy())
    return np.stack(recs, axis=1) if record_every else x


def _endpoint_block(task, x0, spec, h, T, seed):
    b, start, stop = task
    return euler_maruyama_ensemble(x0, spec, h, T, stop - start, stream(seed, TAG_SDE, b))


def sde_endpoints(x0: float, spec: DiffusionSpec, h: float, T: float, n_paths: int, seed: int,
                  workers: int = 1) -> np.ndarray:
    fn = partial(_endpoint_block, x0=x0, spec=spec, h=h, T=T, seed=seed)
    return np.concatenate(ordered_map(fn, blocks(n_paths, SDE_BLOCK), workers))


@dataclass(frozen=True)
class HittingResult:
    p_hit0: float
    mean_T01: float
    se_p_hit0: float
    se_mean_T01: float
    n_sim: int
    n_timeout: int

    @property
    def timeout_fraction(self) -> float:
        return self.n_timeout / self.n_sim

    @property
    def flagged(self) -> bool:
        return self.timeout_fraction > TIMEOUT_FLAG


def hitting_time_mc(x0: float, spec: DiffusionSpec, h: float, n_sim: int, max_T: float,
                    rng: np.random.Generator) -> HittingResult:
    """Monte Carlo absorption probability at 0 and mean absorption time.

    Paths still inside (0, 1) at ``max_T`` are excluded from both estimates and
    counted in ``n_timeout``.
    """
    if not h > 0:
        raise InvalidStep(f"step size must be positive, got {h}")
    if float(spec.rho(0.0)) > 0 or float(spec.rho(1.0)) < 0:
        raise NonAbsorbing("absorption needs rho(0) == 0 and rho(1) == 0")
    x = np.full(n_sim, float(x0))
    hit_time = np.full(n_sim, np.nan)
    hit0 = np.zeros(n_sim, dtype=bool)
    at_bound = (x == 0.0) | (x == 1.0)
    hit_time[at_bound] = 0.0
    hit0[at_bound] = x[at_bound] == 0.0
    active = np.flatnonzero(~at_bound)
    xa = x[active]
    n_steps = math.ceil(max_T / h)
    for k in range(1, n_steps + 1):
        if not active.size:
            break
        xa = _em_step(xa, spec, h, rng.standard_normal(active.size))
        done = (xa == 0.0) | (xa == 1.0)
        if done.any():
            idx = active[done]
            hit_time[idx] = k * h
            hit0[idx] = xa[done] == 0.0
            active, xa = active[~done], xa[~done]
    finished = ~np.isnan(hit_time)
    n_fin = int(finished.sum())
    p0 = float(hit0[finished].mean()) if n_fin else math.nan
    times = hit_time[finished]
    mean_t = float(times.mean()) if n_fin else math.nan
    se_t = float(times.std(ddof=1) / math.sqrt(n_fin)) if n_fin > 1 else 0.0
    se_p = math.sqrt(p0 * (1 - p0) / n_fin) if n_fin else math.nan
    return HittingResult(p0, mean_t, se_p, se_t, n_sim, n_sim - n_fin)


def _path_block(task, x0, spec, h, T, record_every, seed):
    b, start, stop = task
    return euler_maruyama_ensemble(x0, spec, h, T, stop - start, stream(seed, TAG_SDE, b), record_every)


def sde_paths(x0: float, spec: DiffusionSpec, h: float, T: float, n_paths: int, seed: int,
              record_every: int = 1, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Recorded paths as ``(times, values)`` with ``values`` of shape ``(n_paths, len(times))``.

    Uses the same block streams as :func:`sde_endpoints`.
    """
    if not 0.0 <= x0 <= 1.0:
        raise OutOfRange(f"x0 must lie in [0, 1], got {x0}")
    n, h_adj = _grid(h, T)
    fn = partial(_path_block, x0=x0, spec=spec, h=h, T=T, record_every=record_every, seed=seed)
    values = np.concatenate(ordered_map(fn, blocks(n_paths, SDE_BLOCK), workers))
    return np.arange(0, n + 1, record_every) * h_adj, values
