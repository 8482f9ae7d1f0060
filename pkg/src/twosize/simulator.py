"""Finite two-size Wright-Fisher model.

One generation is one first passage of the renewal process at ``p = rho_R(x)``:
the new size is the number of placed offspring and the new frequency is the
fraction of small ones.  The parent-by-parent construction (select a parent,
then mutate) is kept in :func:`step_generation_reference` for cross-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import OutOfRange
from .model import RhoSpec, SizeParams, mu, rho_finite
from .renewal import DiscreteLaw, Lattice, exact_passage_law, sample_passages
from .streams import TAG_TRAJECTORY, blocks, ordered_map, stream

MAX_RECORDS = 100_000
ENSEMBLE_BLOCK = 1000


@dataclass(frozen=True)
class GenerationState:
    k_small: int
    m_size: int

    def __post_init__(self):
        if self.m_size < 1 or not 0 <= self.k_small <= self.m_size:
            raise OutOfRange(f"invalid generation ({self.k_small} small of {self.m_size})")

    @property
    def x_freq(self) -> float:
        return self.k_small / self.m_size

    @property
    def k_large(self) -> int:
        return self.m_size - self.k_small


def initial_state(x0: float, spec: RhoSpec, params: SizeParams) -> tuple[GenerationState, bool]:
    """Initial generation from a frequency alone.

    The size is ``round(R / mu(rho_R(x0)))`` (the typical size at frequency
    ``x0``) and ``x0`` is snapped to the nearest count fraction.  Returns the
    state and whether snapping changed ``x0``.
    """
    if not 0.0 <= x0 <= 1.0:
        raise OutOfRange(f"x0 must lie in [0, 1], got {x0}")
    p = rho_finite(spec, params, x0)
    m0 = max(1, round(params.R / mu(p, params.theta)))
    k0 = round(x0 * m0)
    return GenerationState(k0, m0), k0 != x0 * m0


def step_generation(state: GenerationState, spec: RhoSpec, params: SizeParams, strict: bool,
                    rng: np.random.Generator) -> GenerationState:
    p = rho_finite(spec, params, state.x_freq)
    batch = sample_passages(p, params, 1, rng, strict=strict)
    return GenerationState(int(batch.k_small[0]), int(batch.size[0]))


def step_generation_reference(state: GenerationState, spec: RhoSpec, params: SizeParams,
                              strict: bool, rng: np.random.Generator) -> GenerationState:
    """Build the next generation offspring by offspring.

    Each offspring has a parent of the small type with probability ``s_R(x)``,
    then mutates to type ``i`` with probability ``beta_i_R`` (silent mutations
    allowed) or keeps the parental type.
    """
    sel = spec.selection_mutation(params.R)
    s = float(sel.s_R(state.x_freq))
    lat = Lattice.build(params, strict)
    ks = kl = 0
    while True:
        small = rng.random() < s
        u = rng.random()
        if u < sel.beta0_R:
            small = True
        elif u < sel.beta0_R + sel.beta1_R:
            small = False
        if lat.cost(ks + small, kl + (not small)) >= lat.threshold:
            if not strict:
                ks += small
                kl += not small
            return GenerationState(ks, ks + kl)
        ks += small
        kl += not small


@dataclass
class Trajectory:
    """Recorded generations of one run (every ``stride``-th generation)."""

    gens: np.ndarray
    x_freq: np.ndarray
    m_size: np.ndarray
    params: SizeParams
    spec: RhoSpec
    strict: bool = False
    meta: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.gens.tolist(), self.x_freq.tolist(), self.m_size.tolist())


def record_stride(n_gens: int, max_records: int = MAX_RECORDS) -> int:
    return max(1, math.ceil(n_gens / max_records))


def simulate_trajectory(x0: float, spec: RhoSpec, params: SizeParams, strict: bool, n_gens: int,
                        rng: np.random.Generator, max_records: int = MAX_RECORDS) -> Trajectory:
    state, snapped = initial_state(x0, spec, params)
    stride = record_stride(n_gens, max_records)
    gens, xs, ms = [0], [state.x_freq], [state.m_size]
    for n in range(1, n_gens + 1):
        state = step_generation(state, spec, params, strict, rng)
        if n % stride == 0:
            gens.append(n)
            xs.append(state.x_freq)
            ms.append(state.m_size)
    return Trajectory(np.array(gens), np.array(xs), np.array(ms), params, spec, strict,
                      {"x0": x0, "x0_snapped": snapped, "stride": stride})


def _ensemble_block(task, x0, spec, params, strict, n_gens, stride, seed):
    b, start, stop = task
    rng = stream(seed, TAG_TRAJECTORY, b)
    n = stop - start
    state, _ = initial_state(x0, spec, params)
    x = np.full(n, state.x_freq)
    n_rec = n_gens // stride + 1
    xs = np.empty((n, n_rec))
    ms = np.empty((n, n_rec), dtype=np.int64)
    xs[:, 0], ms[:, 0] = x, state.m_size
    for g in range(1, n_gens + 1):
        batch = sample_passages(spec.finite(x, params.R), params, n, rng, strict=strict)
        m = batch.size
        x = batch.k_small / m
        if g % stride == 0:
            xs[:, g // stride] = x
            ms[:, g // stride] = m
    return xs, ms


def simulate_ensemble(x0: float, spec: RhoSpec, params: SizeParams, strict: bool, n_gens: int,
                      n_reps: int, seed: int, workers: int = 1, max_records: int = MAX_RECORDS,
                      block_size: int = ENSEMBLE_BLOCK) -> list[Trajectory]:
    """Independent replicate trajectories, simulated block-wise in lockstep.

    Replicates ``[b * block_size, (b + 1) * block_size)`` share the stream keyed
    by block ``b``; results do not depend on ``workers``.
    """
    stride = record_stride(n_gens, max_records)
    fn = partial(_ensemble_block, x0=x0, spec=spec, params=params, strict=strict,
                 n_gens=n_gens, stride=stride, seed=seed)
    parts = ordered_map(fn, blocks(n_reps, block_size), workers)
    xs = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, 0))
    ms = np.concatenate([p[1] for p in parts]) if parts else np.empty((0, 0))
    _, snapped = initial_state(x0, spec, params)
    gens = np.arange(0, n_gens + 1, stride)
    return [Trajectory(gens, xs[r], ms[r], params, spec, strict,
                       {"x0": x0, "x0_snapped": snapped, "stride": stride, "replicate": r, "seed": seed})
            for r in range(n_reps)]


def endpoint_ensemble(x0: float, spec: RhoSpec, params: SizeParams, strict: bool, n_gens: int,
                      n_reps: int, seed: int, workers: int = 1) -> np.ndarray:
    """Frequencies after ``n_gens`` generations for ``n_reps`` replicates."""
    fn = partial(_ensemble_block, x0=x0, spec=spec, params=params, strict=strict,
                 n_gens=n_gens, stride=n_gens, seed=seed)
    parts = ordered_map(fn, blocks(n_reps, ENSEMBLE_BLOCK), workers)
    return np.concatenate([p[0][:, -1] for p in parts])


def exact_one_step_law(x: float, spec: RhoSpec, params: SizeParams, strict: bool = False) -> DiscreteLaw:
    """Exact law of the next generation; use ``law.x_freq`` and ``law.size``."""
    return exact_passage_law(rho_finite(spec, params, x), params, strict)
