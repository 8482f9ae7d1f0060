"""Command-line driver.

Every subcommand builds an :class:`~twosize.io.ExperimentConfig`, validates it
and hands it to :func:`run`.  Data go to ``--out`` (plus a manifest sidecar) or
to stdout.  Failures exit nonzero with a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analytics as an
from .errors import ConfigError, TwoSizeError
from .io import (ANALYTICS_COLUMNS, ANALYTICS_KINDS, LAW_COLUMNS, MOMENT_COLUMNS, SDE_COLUMNS, TRAJECTORY_COLUMNS,
                 ExperimentConfig, RunManifest, atomic_write, csv_text, grid_points, json_text)
from .model import FittestTypeWins, RhoSpec, SizeParams
from .streams import TAG_MOMENT, TAG_SDE, TAG_TRAJECTORY, blocks

SEED_RULE = "PCG64(SeedSequence(root, spawn_key=key))"


@dataclass
class Output:
    columns: tuple
    rows: list
    seeds: dict = field(default_factory=dict)
    meta: dict | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# dispatch

def _params(s) -> SizeParams:
    return SizeParams(s["theta"], s["R"])


def _spec(s) -> RhoSpec:
    return RhoSpec.from_dict(s["rho"])


def _stream_info(seed, tag, keys) -> dict:
    return {"root": seed, "rule": SEED_RULE, "keys": [[tag, *k] for k in keys]}


def _simulate(s) -> Output:
    from .simulator import ENSEMBLE_BLOCK, simulate_ensemble
    trajs = simulate_ensemble(s["x0"], _spec(s), _params(s), s["strict"], s["gens"], s["reps"], s["seed"],
                              workers=s["workers"])
    rows = [row for tr in trajs for row in tr.rows()]
    keys = [(b,) for b, _, _ in blocks(s["reps"], ENSEMBLE_BLOCK)]
    return Output(TRAJECTORY_COLUMNS, rows, _stream_info(s["seed"], TAG_TRAJECTORY, keys),
                  {"x0_snapped": trajs[0].meta["x0_snapped"], "stride": trajs[0].meta["stride"]})


def _sde(s) -> Output:
    from .sde import SDE_BLOCK, DiffusionSpec, sde_paths
    spec = DiffusionSpec.from_rho_spec(_spec(s), s["theta"], s["variant"])
    times, values = sde_paths(s["x0"], spec, s["h"], s["T"], s["paths"], s["seed"], s["record_every"],
                              s["workers"])
    rows = [(t, x) for path in values for t, x in zip(times.tolist(), path.tolist())]
    keys = [(b,) for b, _, _ in blocks(s["paths"], SDE_BLOCK)]
    return Output(SDE_COLUMNS, rows, _stream_info(s["seed"], TAG_SDE, keys))


def _drift_scan(s) -> Output:
    from .moments import MOMENT_BLOCK, drift_scan
    xs = grid_points(s["grid"])
    rep = drift_scan(xs, s["order"], _spec(s), _params(s), s["nsim"], s["seed"], s["strict"], s["method"],
                     s["workers"])
    seeds = {}
    if s["method"] == "mc":
        keys = [(i, b) for i in range(len(xs)) for b, _, _ in blocks(s["nsim"], MOMENT_BLOCK)]
        seeds = _stream_info(s["seed"], TAG_MOMENT, keys)
    return Output(MOMENT_COLUMNS, list(rep.rows()), seeds)


def _renewal(s) -> Output:
    from .renewal import exact_passage_law
    law = exact_passage_law(s["p"], _params(s), s["strict"])
    return Output(LAW_COLUMNS, list(law.rows()), meta={"total": law.total, "prob_xi_theta": law.prob_xi_theta()})


def _analytics(s) -> Output:
    xs = np.array(grid_points(s["grid"]))
    kind, theta, sel = s["kind"], s["theta"], s["s"]
    theta = float(SizeParams(theta, 1).theta)
    if kind == "extinction":
        if s["variant"] == "original":
            res = an.extinction_curve(xs, theta, sel)
        else:
            spec = an.ScaleSpec(theta, sel, variant=s["variant"])
            res = an.AnalyticsResult("extinction", xs, np.array([an.extinction_prob_scale(x, spec, s["tol"])
                                                                  for x in xs]), {"theta": theta, "s": sel})
    elif kind == "absorption":
        res = an.absorption_curve(xs, theta, sel, s["tol"], s["variant"])
    elif kind == "stationary":
        res = an.stationary_density(xs, theta, s["beta0"], s["beta1"], sel, s["tol"])
    else:
        spec = an.ScaleSpec(theta, sel, s["x0_ref"], s["eta"], s["variant"])
        res = an.AnalyticsResult("scale", xs, np.array([an.scale_function(x, spec, s["tol"]) for x in xs]),
                                 {"theta": theta, "s": sel, "x0_ref": s["x0_ref"], "eta": s["eta"]})
    res.meta.setdefault("variant", s["variant"])
    return Output(ANALYTICS_COLUMNS, list(res.rows()), meta={"kind": res.kind, **res.meta})


def _validate(s) -> Output:
    from .validation import resolve_modules, run_checks
    try:
        resolve_modules(s["only"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    results = run_checks(s["only"], s["seeds"], echo=lambda line: print(line, flush=True))
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} checks passed")
    rows = [(r.cid, r.module, "" if r.seed is None else r.seed, int(r.passed), r.detail) for r in results]
    return Output(("id", "module", "seed", "passed", "detail"), rows, {"roots": s["seeds"], "rule": SEED_RULE},
                  {"all_passed": n_pass == len(results)})


_DISPATCH = {"simulate": _simulate, "sde": _sde, "drift-scan": _drift_scan, "renewal": _renewal,
             "analytics": _analytics, "validate": _validate}


def run(config: ExperimentConfig, out=None) -> Output:
    """Execute a validated config; write data and manifest to ``out`` if given, else CSV to stdout."""
    t0 = time.perf_counter()
    s = config.settings
    result = _DISPATCH[config.command](s)
    wall = time.perf_counter() - t0
    render = json_text if s["format"] == "json" else csv_text
    text, n_rows = render(result.columns, result.rows)
    out = out or s["output"]
    if out:
        s["output"] = str(out)
        atomic_write(out, text)
        extra = {"meta": result.meta} if result.meta else {}
        RunManifest(config.to_dict(), __version__, result.seeds, wall, {str(out): n_rows}, extra).write(out)
        if config.command == "analytics":
            atomic_write(str(out) + ".meta.json", json.dumps(result.meta, indent=2, sort_keys=True, default=float)
                         + "\n")
    elif config.command != "validate":
        sys.stdout.write(text)
    return result


# ---------------------------------------------------------------------------
# argument parsing

def _rho_from_args(a) -> dict:
    if a.rho_json:
        try:
            return json.loads(a.rho_json)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--rho-json is not valid JSON: {exc}") from exc
    kind = a.rho
    if kind == "neutral":
        return {"kind": "neutral"}
    if kind == "genic":
        return {"kind": "genic", "s": a.s}
    if kind == "diploid":
        return {"kind": "diploid", "s": a.s, "h": a.h}
    if kind == "mutation":
        return {"kind": "mutation", "beta0": a.beta0, "beta1": a.beta1}
    if kind == "fittest":
        return FittestTypeWins.geometric(a.q).to_dict()
    raise ConfigError(f"--rho {kind} needs --rho-json")


def _number(text: str):
    """An int if the text is integral, else a float (keeps configs tidy)."""
    v = float(text)
    return int(v) if v.is_integer() and "e" not in text.lower() and "." not in text else v


def _grid_arg(text: str):
    if "," in text or "." in text:
        return [float(v) for v in text.split(",") if v]
    return int(text)


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, help="root seed (64-bit unsigned)")
    p.add_argument("--out", help="output file; a .manifest.json sidecar is written next to it")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1)


def _add_rho(p):
    p.add_argument("--rho", default="neutral", choices=("neutral", "genic", "diploid", "mutation", "fittest", "custom"))
    p.add_argument("--rho-json", help="full rho specification as JSON, e.g. '{\"kind\": \"genic\", \"s\": 1}'")
    p.add_argument("--s", type=float, default=0.0, help="selection coefficient")
    p.add_argument("--h", type=float, default=0.5, help="dominance (diploid)")
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--q", type=float, default=0.5, help="geometric weight parameter (fittest)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twosize", description="Two-size Wright-Fisher model toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="finite-model trajectories")
    p.add_argument("--theta", required=True)
    p.add_argument("--R", required=True, type=_number)
    _add_rho(p)
    p.add_argument("--x0", required=True, type=float)
    p.add_argument("--gens", required=True, type=int)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--strict", action="store_true", help="use the strict stopping rule")
    _add_common(p)

    p = sub.add_parser("sde", help="Euler-Maruyama paths of the limiting diffusion")
    p.add_argument("--theta", required=True)
    _add_rho(p)
    p.add_argument("--x0", required=True, type=float)
    p.add_argument("--step", type=float, default=1e-3, help="time step h")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--variant", choices=("original", "strict"), default="original")
    _add_common(p)

    p = sub.add_parser("drift-scan", help="one-generation moments on a frequency grid")
    p.add_argument("--theta", required=True)
    p.add_argument("--R", required=True, type=_number)
    _add_rho(p)
    p.add_argument("--grid", type=_grid_arg, default=21, help="point count or comma-separated points")
    p.add_argument("--nsim", type=int, default=100_000)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--method", choices=("mc", "exact"), default="mc")
    _add_common(p)

    p = sub.add_parser("renewal", help="exact law of the stopped state")
    p.add_argument("--theta", required=True)
    p.add_argument("--R", required=True, type=_number)
    p.add_argument("--p", required=True, type=float)
    p.add_argument("--strict", action="store_true")
    _add_common(p, seed=False)

    p = sub.add_parser("analytics", help="long-term behavior of the diffusion")
    p.add_argument("kind", choices=ANALYTICS_KINDS)
    p.add_argument("--theta", required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--grid", type=_grid_arg, default=101)
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--variant", choices=("original", "strict"), default="original")
    p.add_argument("--x0-ref", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.5)
    _add_common(p, seed=False)

    p = sub.add_parser("validate", help="run acceptance criteria and invariants")
    p.add_argument("--only", action="append", help="restrict to a module (repeatable)")
    p.add_argument("--seed", type=int, action="append", help="root seed (repeatable)")
    _add_common(p, seed=False)

    p = sub.add_parser("run", help="run a JSON config or a run manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    return parser


def config_from_args(a) -> ExperimentConfig:
    if a.command == "run":
        cfg = ExperimentConfig.load(a.config)
        if a.workers is not None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "workers": a.workers})
        return cfg
    d = {"command": a.command, "output": a.out, "format": a.format, "workers": a.workers}
    if a.command in ("simulate", "drift-scan", "renewal", "sde"):
        d["theta"] = a.theta
    if a.command in ("simulate", "drift-scan", "renewal"):
        d["R"] = a.R
    if a.command in ("simulate", "drift-scan", "sde"):
        d["rho"] = _rho_from_args(a)
        d["seed"] = a.seed
    if a.command == "simulate":
        d.update(x0=a.x0, gens=a.gens, reps=a.reps, strict=a.strict)
    elif a.command == "sde":
        d.update(x0=a.x0, h=a.step, T=a.T, paths=a.paths, record_every=a.record_every, variant=a.variant)
    elif a.command == "drift-scan":
        d.update(grid=a.grid, nsim=a.nsim, order=a.order, strict=a.strict, method=a.method)
    elif a.command == "renewal":
        d.update(p=a.p, strict=a.strict)
    elif a.command == "analytics":
        d.update(kind=a.kind, theta=a.theta, s=a.s, grid=a.grid, beta0=a.beta0, beta1=a.beta1, tol=a.tol,
                 variant=a.variant, x0_ref=a.x0_ref, eta=a.eta)
    elif a.command == "validate":
        d.update(only=a.only, seeds=a.seed or [1])
    return ExperimentConfig.from_dict(d)


def _fail(exc: Exception, command) -> int:
    code = 2 if isinstance(exc, ConfigError) else 1
    err = {"error": type(exc).__name__, "message": str(exc), "command": command, "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    command = argv[0] if argv else None
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        result = run(cfg, getattr(args, "out", None) if args.command == "run" else None)
    except (TwoSizeError, ValueError, OverflowError, OSError) as exc:
        return _fail(exc, command)
    if cfg.command == "validate" and not result.meta["all_passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
