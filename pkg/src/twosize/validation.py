"""Acceptance criteria and module invariants as runnable checks.

Each check returns a :class:`CheckResult`; ``run_checks`` drives a selection of
them for one or more root seeds.  The same registry backs ``twosize validate``
and the acceptance test-suite.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, stats

from . import analytics as an
from .io import csv_text
from .model import (GenicSelection, Neutral, ParentIndependentMutation, SizeParams, decompose_rho_finite,
                    mu, recompose_rho_finite, var_xi)
from .moments import (TestFunction, centered_ratio_moment, discrete_generator, drift_scan, limit_generator,
                      moment_exact, moment_limit, taylor_generator)
from .renewal import exact_passage_law, moment_ratio_exact, sample_passages
from .sde import DiffusionSpec, generator_apply, hitting_time_mc, sde_endpoints
from .simulator import _ensemble_block, endpoint_ensemble, exact_one_step_law
from .streams import TAG_HITTING, TAG_RENEWAL, TAG_STATIONARY, blocks, ordered_map, stream

MODULES = ("model-core", "renewal-engine", "wf-simulator", "sde-integrator", "moment-lab", "analytics", "cli-io")
ALIASES = {"model": "model-core", "renewal": "renewal-engine", "simulator": "wf-simulator",
           "sde": "sde-integrator", "moments": "moment-lab", "moment": "moment-lab", "cli": "cli-io",
           "io": "cli-io"}

P_GRID = np.linspace(0.0, 1.0, 21)
X_GRID_21 = np.linspace(0.0, 1.0, 21)
THETA_IRRATIONAL = 1.0 / math.sqrt(2.0)

# Monte Carlo sizes of the acceptance runs
SWEEP_R = 1000
SWEEP_NSIM = 100_000
BAND_SLACK = 0.02
KS_R = 2000
KS_REPS = 5000
HIT_PATHS = 10_000
HIT_H = 1e-3
HIT_MAX_T = 50.0
STAT_R = 500
STAT_THETA = "0.5"
STAT_CHAINS = 1000
STAT_BURN = 5 * STAT_R
STAT_GENS = 1000
STAT_BINS = 20
STAT_BLOCK = 500


@dataclass
class CheckResult:
    cid: str
    module: str
    title: str
    passed: bool
    detail: str = ""
    metrics: dict = field(default_factory=dict)
    seed: int | None = None
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        seed = f" seed={self.seed}" if self.seed is not None else ""
        return f"[{tag}] {self.cid:<10} {self.title}{seed}: {self.detail} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"id": self.cid, "module": self.module, "title": self.title, "passed": self.passed,
                "detail": self.detail, "metrics": self.metrics, "seed": self.seed, "seconds": self.seconds}


@dataclass(frozen=True)
class Check:
    cid: str
    module: str
    title: str
    fn: Callable
    stochastic: bool
    criterion: bool = True


REGISTRY: list[Check] = []


def _register(cid, module, title, stochastic=False, criterion=True):
    def deco(fn):
        REGISTRY.append(Check(cid, module, title, fn, stochastic, criterion))
        return fn
    return deco


def _sweep(spec, n, strict, seed, theory=None):
    rep = drift_scan(X_GRID_21, n, spec, SizeParams("0.3", SWEEP_R), SWEEP_NSIM, seed, strict=strict)
    th = rep.theory if theory is None else theory
    use = np.abs(rep.estimates - th) / (3 * rep.std_errs + BAND_SLACK)
    worst = int(np.argmax(use))
    ok = bool(np.all(use <= 1))
    detail = (f"max |est - theory| / (3 SE + {BAND_SLACK}) = {use[worst]:.3f} at x={rep.x_grid[worst]:.2f} "
              f"(est {rep.estimates[worst]:.4f}, theory {th[worst]:.4f}, se {rep.std_errs[worst]:.4f})")
    return ok, detail, {"max_band_use": float(use[worst])}


# ---------------------------------------------------------------------------
# acceptance criteria

@_register("C1", "moment-lab", "neutral drift sweep matches -0.7x(1-x)", stochastic=True)
def check_c1(seed):
    x = X_GRID_21
    return _sweep(Neutral(), 1, False, seed, theory=-0.7 * x * (1 - x))


@_register("C2", "moment-lab", "genic s=1 drift sweep matches 0.3x(1-x)", stochastic=True)
def check_c2(seed):
    x = X_GRID_21
    return _sweep(GenicSelection(1.0), 1, False, seed, theory=0.3 * x * (1 - x))


@_register("C3", "moment-lab", "second moment sweep matches x(1-x)(1-0.7x)", stochastic=True)
def check_c3(seed):
    x = X_GRID_21
    mid = moment_limit(0.5, 2, 0.3, lambda v: 0.0 * v)
    ok, detail, m = _sweep(Neutral(), 2, False, seed, theory=x * (1 - x) * (1 - 0.7 * x))
    ok = ok and abs(mid - 0.1625) < 1e-15
    return ok, f"{detail}; theory(0.5) = {mid:.6g}", m


@_register("C4", "wf-simulator", "strict rule has zero drift (exact and Monte Carlo)", stochastic=True)
def check_c4(seed):
    worst = 0.0
    xs = sorted({Fraction(k, m) for m in range(1, 11) for k in range(m + 1)})
    for theta in ("0.3", "0.5"):
        for R in (1, 2.5, 5, 10):
            params = SizeParams(theta, R)
            for x in xs:
                law = exact_one_step_law(float(x), Neutral(), params, strict=True)
                worst = max(worst, abs(law.expect(law.x_freq) - float(x)))
    params = SizeParams("0.3", SWEEP_R)
    mc = drift_scan([0.1, 0.3, 0.5, 0.7, 0.9], 1, Neutral(), params, SWEEP_NSIM, seed, strict=True)
    z = np.abs(mc.estimates) / mc.std_errs
    ok = worst <= 1e-12 and bool(np.all(z <= 3))
    return ok, f"exact max |E[X1] - x| = {worst:.2e}; MC max |z| = {z.max():.2f}", \
        {"exact_max": worst, "mc_max_z": float(z.max())}


@_register("C5", "moment-lab", "strict-rule second moment matches x(1-x)(1-0.7x)", stochastic=True)
def check_c5(seed):
    x = X_GRID_21
    return _sweep(Neutral(), 2, True, seed, theory=x * (1 - x) * (1 - 0.7 * x))


def stopping_summand_sup(R: float, theta="0.5") -> float:
    params = SizeParams(theta, R)
    th = params.theta_float
    return max(abs(exact_passage_law(p, params).prob_xi_theta() - p * th / mu(p, th)) for p in P_GRID)


@_register("C6", "renewal-engine", "stopping summand converges uniformly in p")
def check_c6(seed=None):
    sups = [stopping_summand_sup(R) for R in (50, 100, 200, 400)]
    ok = all(a > b for a, b in zip(sups, sups[1:])) and sups[-1] <= 0.01
    return ok, "sup at R=50,100,200,400: " + ", ".join(f"{s:.2e}" for s in sups), {"sups": sups}


def moment_expansion_residual(R: float, m: int, p=0.5, theta="0.5") -> float:
    params = SizeParams(theta, R)
    mp, v = mu(p, params.theta), var_xi(p, params.theta)
    exact = moment_ratio_exact(p, params, m)
    return abs(R * (exact - mp**m) - m * (m + 1) / 2 * mp ** (m - 1) * v)


@_register("C7", "renewal-engine", "moment expansion of S/tau has O(1/R) residual")
def check_c7(seed=None):
    ratios = {}
    for m in (1, 2, 3, 4):
        res = [moment_expansion_residual(R, m) for R in (100, 200, 400)]
        ratios[m] = [res[0] / res[1], res[1] / res[2]]
    ok = all(1.5 <= r <= 3 for rs in ratios.values() for r in rs)
    detail = "; ".join(f"m={m}: {rs[0]:.3f}, {rs[1]:.3f}" for m, rs in ratios.items())
    return ok, "residual ratios " + detail, {"ratios": ratios}


@_register("C8", "renewal-engine", "Wald identity and strict reverse-martingale identity")
def check_c8(seed=None):
    wald_worst = 0.0  # distance outside [R, R+1], 0 if inside
    mart_worst = 0.0
    for theta in ("0.3", "0.5", THETA_IRRATIONAL):
        for R in (1, 2.5, 5, 10, 50):
            params = SizeParams(theta, R)
            for p in np.linspace(0, 1, 11):
                law = exact_passage_law(p, params)
                w = mu(p, params.theta) * law.expect(law.tau)
                wald_worst = max(wald_worst, R - w, w - (R + 1))
                if R <= 10:
                    sl = exact_passage_law(p, params, strict=True)
                    mart_worst = max(mart_worst, abs(sl.expect(sl.s_stop / sl.size) - mu(p, params.theta)))
    ok = wald_worst <= 1e-12 and mart_worst <= 1e-12
    return ok, f"Wald excess {max(wald_worst, 0):.2e}; martingale error {mart_worst:.2e}", \
        {"wald_excess": wald_worst, "martingale_error": mart_worst}


@_register("C9", "wf-simulator", "finite model at t=1 matches Euler endpoints (KS)", stochastic=True)
def check_c9(seed, workers=1):
    params = SizeParams("0.6", KS_R)
    fin = endpoint_ensemble(0.5, Neutral(), params, False, KS_R, KS_REPS, seed, workers)
    sde = sde_endpoints(0.5, DiffusionSpec.from_rho_spec(Neutral(), 0.6), 1.0 / KS_R, 1.0, KS_REPS, seed, workers)
    ks = stats.ks_2samp(fin, sde).statistic
    return ks <= 0.05, f"KS distance {ks:.4f} (means {fin.mean():.4f} vs {sde.mean():.4f})", {"ks": float(ks)}


def _hitting(seed, theta, s, key):
    spec = DiffusionSpec.from_rho_spec(GenicSelection(s) if s else Neutral(), theta)
    return hitting_time_mc(0.5, spec, HIT_H, HIT_PATHS, HIT_MAX_T, stream(seed, TAG_HITTING, key))


@_register("C10", "sde-integrator", "extinction probability: MC, neutral identity, branch continuity",
           stochastic=True)
def check_c10(seed):
    r0 = _hitting(seed, 0.5, 0.0, 0)
    r1 = _hitting(seed, 0.5, 0.5, 1)
    e0 = abs(r0.p_hit0 - 2 / 3) - (3 * r0.se_p_hit0 + BAND_SLACK)
    e1 = abs(r1.p_hit0 - 0.5) - (3 * r1.se_p_hit0 + BAND_SLACK)
    xs = np.linspace(0, 1, 101)
    cont = 0.0
    for theta in (0.3, 0.5, 0.8):
        s_b = (1 - theta) / 2
        log_branch = an.extinction_prob_genic(xs, theta, s_b)
        for ds in (-1e-8, 1e-8):
            cont = max(cont, np.max(np.abs(an.extinction_prob_genic(xs, theta, s_b + ds) - log_branch)))
    ident = np.max(np.abs(an.extinction_prob_genic(xs, 0.5, 0.5) - (1 - xs)))
    ok = e0 <= 0 and e1 <= 0 and cont <= 1e-6 and ident <= 1e-12 and not (r0.flagged or r1.flagged)
    detail = (f"p_hit0 {r0.p_hit0:.4f} vs 2/3, neutral-identity run {r1.p_hit0:.4f} vs 0.5, "
              f"branch jump {cont:.2e}")
    return ok, detail, {"p_hit0": r0.p_hit0, "p_hit0_identity": r1.p_hit0, "continuity": float(cont)}


@_register("C11", "analytics", "mean absorption time: closed form, quadrature, MC, classical limit",
           stochastic=True)
def check_c11(seed):
    closed = an.mean_absorption_neutral(0.5, 0.5)
    numeric = an.mean_absorption_numeric(0.5, 0.5, 0.0, tol=1e-9)
    classical = an.mean_absorption_neutral(0.5, 0.999)
    mc = _hitting(seed, 0.5, 0.0, 2)
    rel_mc = abs(mc.mean_T01 - closed) / closed
    rel_cl = abs(classical - 2 * math.log(2)) / (2 * math.log(2))
    ok = (abs(closed - 1.848392) <= 1e-6 and abs(numeric - closed) <= 1e-6 and rel_mc <= 0.05
          and rel_cl <= 0.01 and not mc.flagged)
    detail = (f"closed {closed:.7f}, quadrature {numeric:.7f}, MC {mc.mean_T01:.4f} ({100 * rel_mc:.2f}%), "
              f"theta=0.999 {classical:.5f} ({100 * rel_cl:.3f}%)")
    return ok, detail, {"closed": closed, "numeric": numeric, "mc": mc.mean_T01, "classical": classical}


def _stationary_block(task, seed, spec, params):
    b, start, stop = task
    rng = stream(seed, TAG_STATIONARY, b)
    x = np.full(stop - start, 0.5)
    out = np.empty((STAT_GENS, x.size))
    for g in range(STAT_BURN + STAT_GENS):
        batch = sample_passages(spec.finite(x, params.R), params, x.size, rng)
        x = batch.k_small / batch.size
        if g >= STAT_BURN:
            out[g - STAT_BURN] = x
    return out.ravel()


def stationary_histogram_tv(seed, workers=1, theta=STAT_THETA, beta0=1.0, beta1=1.0) -> float:
    """Total variation between the long-run finite-model histogram and the diffusion's stationary law."""
    params = SizeParams(theta, STAT_R)
    spec = ParentIndependentMutation(beta0, beta1)
    samples = np.concatenate(ordered_map(_StatTask(seed, spec, params), blocks(STAT_CHAINS, STAT_BLOCK), workers))
    edges = np.linspace(0, 1, STAT_BINS + 1)
    cdf = np.array([an.stationary_cdf(e, params.theta_float, beta0, beta1, 0.0) for e in edges])
    hist = np.histogram(samples, edges)[0] / samples.size
    return 0.5 * float(np.abs(hist - np.diff(cdf)).sum())


@dataclass(frozen=True)
class _StatTask:
    seed: int
    spec: object
    params: SizeParams

    def __call__(self, task):
        return _stationary_block(task, self.seed, self.spec, self.params)


@_register("C12", "analytics", "stationary density: normalization, classical limit, long-run histogram",
           stochastic=True)
def check_c12(seed):
    norm_err = 0.0
    for theta, b0, b1, s in ((0.5, 1.0, 1.0, 0.0), (0.3, 0.8, 0.4, 1.0), (0.7, 2.0, 0.5, -1.0), (0.5, 0.5, 0.5, 0.0)):
        dens = lambda v: an.stationary_density([v], theta, b0, b1, s).values[0]  # noqa: E731
        total = integrate.quad(dens, 0, 1, epsabs=1e-10, limit=1000)[0]
        norm_err = max(norm_err, abs(total - 1))
    x = np.linspace(0, 1, 1001)
    beta22 = 6 * x * (1 - x)
    sup = float(np.max(np.abs(an.stationary_density(x, 0.999, 1, 1, 0).values - beta22)))
    tv = stationary_histogram_tv(seed)
    ok = norm_err <= 1e-6 and sup <= 0.01 * beta22.max() and tv <= 0.05
    return ok, f"normalization error {norm_err:.1e}, sup vs Beta(2,2) {sup:.2e}, histogram TV {tv:.4f}", \
        {"norm_err": norm_err, "sup": sup, "tv": tv}


def _determinism_outputs(seed, workers):
    params = SizeParams("0.3", 50)
    out = []
    parts = ordered_map(_TrajTask(seed, params), blocks(600, 250), workers)
    xs = np.concatenate([p[0] for p in parts])
    ms = np.concatenate([p[1] for p in parts])
    rows = ((g, xs[r, g], ms[r, g]) for r in range(xs.shape[0]) for g in range(xs.shape[1]))
    out.append(csv_text(("gen", "x_freq", "m_size"), rows)[0])
    rep = drift_scan(np.linspace(0, 1, 5), 1, GenicSelection(1.0), params, 25_000, seed, workers=workers)
    out.append(csv_text(("x", "order", "estimate", "std_err", "theory", "method"), rep.rows())[0])
    ends = sde_endpoints(0.4, DiffusionSpec.from_rho_spec(Neutral(), 0.5), 0.01, 0.5, 2500, seed, workers)
    out.append(csv_text(("path", "x"), enumerate(ends.tolist()))[0])
    return out


@dataclass(frozen=True)
class _TrajTask:
    seed: int
    params: SizeParams

    def __call__(self, task):
        return _ensemble_block(task, 0.5, Neutral(), self.params, False, 40, 1, self.seed)


@_register("C13", "cli-io", "identical seeds give byte-identical CSV for 1 and 2 workers", stochastic=True)
def check_c13(seed):
    a = _determinism_outputs(seed, 1)
    b = _determinism_outputs(seed, 2)
    c = _determinism_outputs(seed, 1)
    same = [x == y == z for x, y, z in zip(a, b, c)]
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp:
        texts = []
        for w in (1, 2):
            path = Path(tmp) / f"w{w}.csv"
            main(["simulate", "--theta", "0.3", "--R", "5", "--rho", "neutral", "--x0", "0.5", "--gens", "100",
                  "--reps", "600", "--seed", str(seed), "--workers", str(w), "--out", str(path)])
            texts.append(path.read_bytes())
        same.append(texts[0] == texts[1])
    return all(same), f"identical outputs: {sum(same)}/{len(same)}", {"identical": same}


# ---------------------------------------------------------------------------
# module invariants beyond the numbered criteria

@_register("I-model", "model-core", "rho_R converges at rate 1/R; decomposition round-trips", criterion=False)
def check_model(seed=None):
    x = np.linspace(0, 1, 101)
    spec = GenicSelection(1.5)
    errs = [np.max(np.abs(R * (spec.finite(x, R) - x) - spec.limit(x))) for R in (1e2, 1e3, 1e4)]
    ratios = [errs[1] / errs[0], errs[2] / errs[1]]
    dec = decompose_rho_finite(lambda v: spec.finite(v, 50.0))
    rt = float(np.max(np.abs(recompose_rho_finite(dec, x) - spec.finite(x, 50.0))))
    ok = all(0.05 <= r <= 0.2 for r in ratios) and rt <= 1e-12
    return ok, f"sup-error ratios {ratios[0]:.3f}, {ratios[1]:.3f}; round-trip {rt:.1e}", {"ratios": ratios}


def _lm_error(p, params, m):
    law = exact_passage_law(p, params)
    return law.expect(np.abs(params.R / (mu(p, params.theta) * law.tau) - 1) ** m)


@_register("I-renewal", "renewal-engine", "passage bounds and L^m convergence of R/(mu tau)",
           stochastic=True, criterion=False)
def check_renewal(seed):
    params = SizeParams("0.3", 40)
    batch = sample_passages(np.linspace(0, 1, 20_000), params, 20_000, stream(seed, TAG_RENEWAL, 0))
    n = batch.size
    bounds = bool(np.all((n >= params.R) & (n <= params.max_size())))
    ok_lm = True
    worst = {}
    for m in (1, 2, 3, 4):
        sups = [max(_lm_error(p, SizeParams("0.5", R), m) for p in P_GRID[::4]) for R in (50, 400)]
        worst[m] = sups
        ok_lm &= sups[1] < sups[0]
    return bounds and ok_lm, f"bounds hold: {bounds}; L^m sups R=50 -> 400 decrease: {ok_lm}", {"lm": worst}


@_register("I-simulator", "wf-simulator", "one-step law is stochastically monotone in rho_R", criterion=False)
def check_simulator(seed=None):
    params = SizeParams("0.3", 5)
    ok = True
    for x0, x1 in ((0.2, 0.4), (0.4, 0.6), (0.6, 0.9)):
        cdfs = []
        for x in (x0, x1):
            law = exact_one_step_law(x, GenicSelection(1.0), params)
            grid = np.linspace(0, 1, 201)
            cdfs.append(np.array([law.prob[law.x_freq <= g + 1e-15].sum() for g in grid]))
        ok &= bool(np.all(cdfs[1] <= cdfs[0] + 1e-12))
    return ok, f"CDF dominance holds: {ok}", {}


@_register("I-sde", "sde-integrator", "generator identities for f(x)=x and f(x)=x^2", criterion=False)
def check_sde(seed=None):
    spec = DiffusionSpec.from_rho_spec(GenicSelection(0.7), 0.4)
    from .sde import diffusion_sq, drift
    x = np.linspace(0, 1, 101)
    e1 = np.max(np.abs(generator_apply((x, 1.0, 0.0), x, spec) - drift(x, spec)))
    e2 = np.max(np.abs(generator_apply((x**2, 2 * x, 2.0), x, spec) - 2 * x * drift(x, spec) - diffusion_sq(x, spec)))
    ok = max(e1, e2) <= 1e-12
    return ok, f"identity errors {e1:.1e}, {e2:.1e}", {}


@_register("I-moments", "moment-lab", "exact generator: uniform convergence, Taylor bound, centered identity",
           criterion=False)
def check_moments(seed=None):
    f = TestFunction.power(2)
    sups = []
    for R in (20, 40, 80):
        params = SizeParams("0.5", R)
        sups.append(max(abs(discrete_generator(f, x, Neutral(), params)[0] - limit_generator(f, x, Neutral(), 0.5))
                        for x in X_GRID_21))
    mono = sups[0] > sups[1] > sups[2]
    params = SizeParams("0.5", 20)
    f4 = TestFunction.power(4)
    taylor_ok = True
    cent = 0.0
    for x in (0.1, 0.5, 0.8):
        direct = discrete_generator(f4, x, GenicSelection(1.0), params)[0]
        approx, bound = taylor_generator(f4, x, GenicSelection(1.0), params)
        taylor_ok &= abs(direct - approx) <= bound + 1e-12
        for n in (1, 2, 3, 4):
            a = moment_exact(x, n, GenicSelection(1.0), params, center="rho") / params.R
            cent = max(cent, abs(a - centered_ratio_moment(x, n, GenicSelection(1.0), params)))
    ok = mono and taylor_ok and cent <= 1e-12
    return ok, (f"sup |A^R f - A f| at R=20,40,80: {', '.join(f'{s:.3e}' for s in sups)}; "
                f"Taylor bound holds: {taylor_ok}; centered identity error {cent:.1e}"), {"sups": sups}


@_register("I-analytics", "analytics", "extinction bounds, scale representation, theta ordering", criterion=False)
def check_analytics(seed=None):
    xs = np.linspace(0.01, 0.99, 99)
    lower = min(float(np.min(an.extinction_prob_genic(xs, th, 0.0) - (1 - xs))) for th in np.linspace(0.05, 0.95, 19))
    rep = 0.0
    for theta, s in ((0.5, 0.25), (0.3, 2.0), (0.7, -0.5)):
        spec = an.ScaleSpec(theta, s)
        for x in (0.1, 0.5, 0.9):
            rep = max(rep, abs(an.extinction_prob_scale(x, spec) - an.extinction_prob_genic(x, theta, s)))
    lo, hi = an.extinction_prob_genic(0.95, 0.1, 2.0), an.extinction_prob_genic(0.95, 0.9, 2.0)
    ok = lower >= -1e-12 and rep <= 1e-6 and lo < hi
    return ok, (f"min P0 - (1-x) {lower:.2e}; scale representation error {rep:.1e}; "
                f"s=2, x=0.95: theta=0.1 -> {lo:.5f} < theta=0.9 -> {hi:.5f}"), {}


@_register("I-cli", "cli-io", "manifests round-trip through the config parser", criterion=False)
def check_cli(seed=None):
    from .cli import main
    from .io import ExperimentConfig, RunManifest, manifest_path
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "ext.csv"
        main(["analytics", "extinction", "--theta", "0.5", "--s", "0", "--grid", "11", "--out", str(out)])
        man = RunManifest.from_json(manifest_path(out).read_text())
        cfg = ExperimentConfig.from_dict(man.config)
        again = Path(tmp) / "again.csv"
        main(["run", "--config", str(manifest_path(out)), "--out", str(again)])
        ok = cfg.to_dict() == man.config and out.read_bytes() == again.read_bytes()
    return ok, f"round trip reproduces output: {ok}", {}


# ---------------------------------------------------------------------------

def resolve_modules(only) -> set[str] | None:
    if not only:
        return None
    out = set()
    for name in only:
        mod = ALIASES.get(name, name)
        if mod not in MODULES:
            raise ValueError(f"unknown module {name!r}; expected one of {list(MODULES)}")
        out.add(mod)
    return out


def select(only=None, criteria_only: bool = False) -> list[Check]:
    mods = resolve_modules(only)
    return [c for c in REGISTRY if (mods is None or c.module in mods) and (c.criterion or not criteria_only)]


def run_check(check: Check, seed: int | None = None) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail, metrics = check.fn(seed) if check.stochastic else check.fn()
    except Exception as exc:  # failures are report content
        ok, detail, metrics = False, f"raised {type(exc).__name__}: {exc}", {}
    return CheckResult(check.cid, check.module, check.title, bool(ok), detail, metrics,
                       seed if check.stochastic else None, time.perf_counter() - t0)


def run_checks(only=None, seeds=(1,), criteria_only: bool = False, echo: Callable | None = None) -> list[CheckResult]:
    results = []
    for check in select(only, criteria_only):
        for seed in (seeds if check.stochastic else (None,)):
            res = run_check(check, seed)
            results.append(res)
            if echo:
                echo(res.line())
    return results


def get_check(cid: str) -> Check:
    for c in REGISTRY:
        if c.cid == cid:
            return c
    raise KeyError(cid)
