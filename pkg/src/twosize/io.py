"""Flat-file output, experiment configs and run manifests.

CSV files use a header row, ``'\\n'`` line endings and 17 significant digits
for floats, so doubles survive a round trip.  Every written file gets a
``<file>.manifest.json`` sidecar whose ``config`` entry parses back into an
:class:`ExperimentConfig`.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import ConfigError
from .streams import check_seed

FLOAT_FMT = ".17g"

COMMANDS = ("simulate", "sde", "drift-scan", "renewal", "analytics", "validate")
ANALYTICS_KINDS = ("extinction", "absorption", "stationary", "scale")
FORMATS = ("csv", "json")

# CSV schemas
TRAJECTORY_COLUMNS = ("gen", "x_freq", "m_size")
MOMENT_COLUMNS = ("x", "order", "estimate", "std_err", "theory", "method")
ANALYTICS_COLUMNS = ("x", "value")
SDE_COLUMNS = ("t", "x")
LAW_COLUMNS = ("k_small", "k_large", "prob")


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, FLOAT_FMT)
    if hasattr(v, "dtype"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> tuple[str, int]:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    n = 0
    for row in rows:
        w.writerow([format_value(v) for v in row])
        n += 1
    return buf.getvalue(), n


def json_text(columns: Sequence[str], rows: Iterable[Sequence]) -> tuple[str, int]:
    data = [[v.item() if hasattr(v, "dtype") else v for v in row] for row in rows]
    return json.dumps({"columns": list(columns), "rows": data}) + "\n", len(data)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path``, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# experiment configs

_COMMON = {"output": None, "format": "csv", "workers": 1}

# per-command fields and their defaults (``REQUIRED`` has no default)
REQUIRED = object()

_FIELDS: dict[str, dict[str, Any]] = {
    "simulate": {"theta": REQUIRED, "R": REQUIRED, "rho": {"kind": "neutral"}, "x0": REQUIRED,
                 "gens": REQUIRED, "reps": 1, "strict": False, "seed": REQUIRED},
    "sde": {"theta": REQUIRED, "rho": {"kind": "neutral"}, "x0": REQUIRED, "h": 1e-3, "T": 1.0,
            "paths": 1, "record_every": 1, "variant": "original", "seed": REQUIRED},
    "drift-scan": {"theta": REQUIRED, "R": REQUIRED, "rho": {"kind": "neutral"}, "grid": 21,
                   "nsim": 100_000, "order": 1, "strict": False, "method": "mc", "seed": None},
    "renewal": {"theta": REQUIRED, "R": REQUIRED, "p": REQUIRED, "strict": False},
    "analytics": {"kind": REQUIRED, "theta": REQUIRED, "s": 0.0, "grid": 101, "beta0": 1.0,
                  "beta1": 1.0, "tol": 1e-8, "variant": "original", "x0_ref": 0.5, "eta": 0.5},
    "validate": {"only": None, "seeds": [1]},
}


@dataclass
class ExperimentConfig:
    """A validated experiment description: a command plus its settings."""

    command: str
    settings: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in data and "command" not in data:  # a run manifest
            data = data["config"]
        data = dict(data)
        command = data.pop("command", None)
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; expected one of {list(COMMANDS)}")
        fields = {**_FIELDS[command], **_COMMON}
        unknown = sorted(set(data) - set(fields))
        if unknown:
            raise ConfigError(f"unknown field(s) for {command!r}: {unknown}")
        settings = {}
        for name, default in fields.items():
            if name in data and data[name] is not None:
                settings[name] = data[name]
            elif default is REQUIRED:
                raise ConfigError(f"{command!r} needs field {name!r}")
            else:
                settings[name] = default
        cfg = cls(command, settings)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"command": self.command, **self.settings}

    def __getitem__(self, name):
        return self.settings[name]

    def validate(self) -> None:
        """Check numeric fields against module preconditions before any work starts."""
        s = self.settings
        if s["format"] not in FORMATS:
            raise ConfigError(f"format must be one of {list(FORMATS)}")
        if not isinstance(s["workers"], int) or s["workers"] < 1:
            raise ConfigError("workers must be a positive integer")
        if self.command != "validate":
            self._check_theta()
        if "seed" in s and s["seed"] is not None:
            s["seed"] = self._seed(s["seed"])
        if "R" in s:
            if _num(s["R"], "R") <= 0:
                raise ConfigError("R must be positive")
        if "rho" in s:
            s["rho"] = _rho_dict(s["rho"])
        c = self.command
        if c == "simulate":
            _unit("x0", s["x0"])
            _count("gens", s["gens"], 0)
            _count("reps", s["reps"], 1)
        elif c == "sde":
            _unit("x0", s["x0"])
            if _num(s["h"], "h") <= 0 or _num(s["T"], "T") < s["h"]:
                raise ConfigError("need h > 0 and T >= h")
            _count("paths", s["paths"], 1)
            _count("record_every", s["record_every"], 1)
            _choice("variant", s["variant"], ("original", "strict"))
        elif c == "drift-scan":
            s["grid"] = _grid(s["grid"])
            _count("nsim", s["nsim"], 2)
            _choice("order", s["order"], (1, 2, 3, 4))
            _choice("method", s["method"], ("mc", "exact"))
            if s["method"] == "mc" and s["seed"] is None:
                raise ConfigError("Monte Carlo drift scans need an explicit seed")
        elif c == "renewal":
            _unit("p", s["p"])
        elif c == "analytics":
            _choice("kind", s["kind"], ANALYTICS_KINDS)
            s["grid"] = _grid(s["grid"])
            _num(s["s"], "s")
            if _num(s["tol"], "tol") <= 0:
                raise ConfigError("tol must be positive")
            _choice("variant", s["variant"], ("original", "strict"))
            if s["kind"] == "stationary" and (_num(s["beta0"], "beta0") <= 0 or _num(s["beta1"], "beta1") <= 0):
                raise ConfigError("a stationary density needs beta0 > 0 and beta1 > 0")
        elif c == "validate":
            seeds = s["seeds"]
            if isinstance(seeds, int):
                seeds = [seeds]
            if not seeds:
                raise ConfigError("validate needs at least one seed")
            s["seeds"] = [self._seed(v) for v in seeds]
            if s["only"] is not None:
                only = [s["only"]] if isinstance(s["only"], str) else list(s["only"])
                s["only"] = only

    def _check_theta(self):
        theta = self.settings["theta"]
        if isinstance(theta, bool) or not isinstance(theta, (int, float, str)):
            raise ConfigError("theta must be a number or a fraction string")
        from .model import as_theta
        if not 0 < as_theta(theta) < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {theta}")

    @staticmethod
    def _seed(v) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"seed must be an integer, got {v!r}")
        try:
            return check_seed(v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _num(v, name) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number, got {v!r}")
    return float(v)


def _unit(name, v):
    if not 0.0 <= _num(v, name) <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {v}")


def _count(name, v, lo):
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")


def _choice(name, v, options):
    if v not in options:
        raise ConfigError(f"{name} must be one of {list(options)}, got {v!r}")


def _grid(v):
    """A grid is a point count (uniform on [0, 1]) or an explicit list."""
    if isinstance(v, int) and not isinstance(v, bool):
        if v < 2:
            raise ConfigError("grid needs at least 2 points")
        return v
    if isinstance(v, list) and v:
        for x in v:
            _unit("grid point", x)
        return v
    raise ConfigError(f"grid must be a point count or a list of points, got {v!r}")


def _rho_dict(v) -> dict:
    from .model import RhoSpec
    if isinstance(v, str):
        v = {"kind": v}
    if not isinstance(v, dict):
        raise ConfigError(f"rho must be an object with a 'kind', got {v!r}")
    RhoSpec.from_dict(v)  # raises ConfigError on bad input
    return dict(v)


def grid_points(grid) -> list[float]:
    if isinstance(grid, int):
        return [i / (grid - 1) for i in range(grid)]
    return [float(x) for x in grid]


# ---------------------------------------------------------------------------
# run manifests

@dataclass
class RunManifest:
    config: dict
    version: str
    seeds: dict
    wall_time_s: float
    rows: dict
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {"config": self.config, "version": self.version, "seeds": self.seeds,
                "wall_time_s": self.wall_time_s, "rows": self.rows}
        if self.extra:
            body["extra"] = self.extra
        return json.dumps(body, indent=2, sort_keys=True, default=float) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["config"], d["version"], d["seeds"], d["wall_time_s"], d["rows"], d.get("extra", {}))

    def write(self, data_path) -> Path:
        path = manifest_path(data_path)
        atomic_write(path, self.to_json())
        return path


def manifest_path(data_path) -> Path:
    data_path = Path(data_path)
    return data_path.with_name(data_path.name + ".manifest.json")
