"""JSON run configuration with strict key checking.

Layout (every section optional except ``profile``)::

    {
      "profile": {"kind": "delta", "params": {"c": 1.0}},
      "t": [0.1],
      "x": {"start": -4, "stop": 4, "num": 101},
      "h": "auto",
      "quadrature": {"n_nodes": 128, "n_lambda": null, "rule": "trapezoid",
                     "rule_check": false},
      "tolerances": {"m": 1e-12, "fd_step": 1e-3, "t_min": 1e-4, "mesh": null},
      "output": {"path": null, "format": "csv", "companion": null},
      "reflection": {"h": 1.0, "n_nodes": 16, "x": 0.0, "t": 1.0, "rule": "trapezoid"},
      "certify": {"delta": 1.0, "t": 0.5, "samples": 50,
                  "x": [-4, -2, 0, 2, 4], "t_values": [0.05, 0.1, 0.5, 1.0], "table": null},
      "validate": {"study": "reference", "t": 0.05, "window": [-5, 5], "num": 41,
                   "n": [4, 8, 16], "dt": 5e-4, "tolerance": 1e-4}
    }

``x`` may also be an explicit list, and ``t`` a single number.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .dyson import SolveOptions
from .profiles import MiuraProfile, ProfileError, profile_from_config

__all__ = [
    "ConfigError",
    "Quadrature",
    "Tolerances",
    "Output",
    "ReflectionSpec",
    "CertifySpec",
    "ValidateSpec",
    "RunConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _positive(name, v, allow_none=False, integer=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{name}: must be positive and finite, got {v!r}")
    return int(v) if integer else float(v)


def _number(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name}: expected a finite number, got {v!r}")
    return float(v)


def _section(cls, name, raw):
    """Build a dataclass section, rejecting unknown keys."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key!r}")
    obj = cls(**raw)
    obj.validate(name)
    return obj


@dataclass
class Quadrature:
    n_nodes: int = 128
    n_lambda: int | None = None
    rule: str = "trapezoid"
    rule_check: bool = False

    def validate(self, name):
        self.n_nodes = _positive(f"{name}.n_nodes", self.n_nodes, integer=True)
        self.n_lambda = _positive(f"{name}.n_lambda", self.n_lambda, True, True)
        if self.rule not in ("trapezoid", "hermite"):
            raise ConfigError(f"{name}.rule: expected 'trapezoid' or 'hermite'")
        if not isinstance(self.rule_check, bool):
            raise ConfigError(f"{name}.rule_check: expected true or false")


@dataclass
class Tolerances:
    m: float = 1e-12
    fd_step: float = 1e-3
    t_min: float = 1e-4
    mesh: float | None = None

    def validate(self, name):
        self.m = _positive(f"{name}.m", self.m)
        self.t_min = _positive(f"{name}.t_min", self.t_min)
        self.mesh = _positive(f"{name}.mesh", self.mesh, allow_none=True)
        fd = _number(f"{name}.fd_step", self.fd_step)
        if fd < 0:
            raise ConfigError(f"{name}.fd_step: must be nonnegative")
        self.fd_step = fd


@dataclass
class Output:
    path: str | None = None
    format: str = "csv"
    companion: str | None = None

    def validate(self, name):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"{name}.format: expected 'csv' or 'json'")


@dataclass
class ReflectionSpec:
    h: float = 1.0
    n_nodes: int = 16
    x: float = 0.0
    t: float = 1.0
    rule: str = "trapezoid"

    def validate(self, name):
        self.h = _positive(f"{name}.h", self.h)
        self.n_nodes = _positive(f"{name}.n_nodes", self.n_nodes, integer=True)
        self.x = _number(f"{name}.x", self.x)
        self.t = _positive(f"{name}.t", self.t)
        if self.rule not in ("trapezoid", "hermite"):
            raise ConfigError(f"{name}.rule: expected 'trapezoid' or 'hermite'")


@dataclass
class CertifySpec:
    delta: float = 1.0
    t: float = 0.5
    samples: int = 50
    x: list = field(default_factory=lambda: [-4.0, -2.0, 0.0, 2.0, 4.0])
    t_values: list = field(default_factory=lambda: [0.05, 0.1, 0.5, 1.0])
    table: str | None = None

    def validate(self, name):
        self.delta = _positive(f"{name}.delta", self.delta)
        self.t = _positive(f"{name}.t", self.t)
        self.samples = _positive(f"{name}.samples", self.samples, integer=True)
        self.x = [_number(f"{name}.x", v) for v in _as_list(f"{name}.x", self.x)]
        self.t_values = [_positive(f"{name}.t_values", v)
                         for v in _as_list(f"{name}.t_values", self.t_values)]


@dataclass
class ValidateSpec:
    study: str = "reference"
    t: float | None = None
    window: list | None = None
    num: int | None = None
    n: list = field(default_factory=lambda: [4, 8, 16])
    dt: float = 5e-4
    tolerance: float = 1e-4

    def validate(self, name):
        if self.study not in ("reference", "mollified"):
            raise ConfigError(f"{name}.study: expected 'reference' or 'mollified'")
        mollified = self.study == "mollified"
        self.t = _positive(f"{name}.t", self.t if self.t is not None else (0.2 if mollified else 0.05))
        if self.window is None:
            self.window = [-3.0, 3.0] if mollified else [-5.0, 5.0]
        w = _as_list(f"{name}.window", self.window)
        if len(w) != 2 or not _number(f"{name}.window", w[0]) < _number(f"{name}.window", w[1]):
            raise ConfigError(f"{name}.window: expected [lo, hi] with lo < hi")
        self.window = [float(w[0]), float(w[1])]
        self.num = _positive(f"{name}.num", self.num if self.num is not None else (61 if mollified else 41),
                             integer=True)
        self.n = [_positive(f"{name}.n", v, integer=True) for v in _as_list(f"{name}.n", self.n)]
        self.dt = _positive(f"{name}.dt", self.dt)
        self.tolerance = _positive(f"{name}.tolerance", self.tolerance)


def _as_list(name, v):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{name}: expected a list")
    return list(v)


_TOP = {"profile", "t", "x", "h", "quadrature", "tolerances", "output", "reflection",
        "certify", "validate"}


@dataclass
class RunConfig:
    profile: MiuraProfile
    profile_spec: dict
    t: list
    x: np.ndarray
    h: object
    quadrature: Quadrature
    tolerances: Tolerances
    output: Output
    reflection: ReflectionSpec
    certify: CertifySpec
    validate: ValidateSpec

    def solve_options(self, workers: int = 1) -> SolveOptions:
        return SolveOptions(h=self.h, n_nodes=self.quadrature.n_nodes,
                            n_lambda=self.quadrature.n_lambda, rule=self.quadrature.rule,
                            tol=self.tolerances.m, mesh=self.tolerances.mesh,
                            fd_step=self.tolerances.fd_step, t_min=self.tolerances.t_min,
                            workers=workers, rule_check=self.quadrature.rule_check)


def _x_grid(raw):
    if raw is None:
        raw = {"start": -4.0, "stop": 4.0, "num": 101}
    if isinstance(raw, list):
        if not raw:
            raise ConfigError("x: empty grid")
        return np.array([_number("x", v) for v in raw])
    if not isinstance(raw, dict):
        raise ConfigError("x: expected a list or {start, stop, num}")
    for key in raw:
        if key not in ("start", "stop", "num"):
            raise ConfigError(f"unknown key x.{key!r}")
    missing = {"start", "stop", "num"} - set(raw)
    if missing:
        raise ConfigError(f"x: missing key {sorted(missing)[0]!r}")
    num = _positive("x.num", raw["num"], integer=True)
    return np.linspace(_number("x.start", raw["start"]), _number("x.stop", raw["stop"]), num)


def parse_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in raw:
        if key not in _TOP:
            raise ConfigError(f"unknown key {key!r}")
    if "profile" not in raw:
        raise ConfigError("missing key 'profile'")
    spec = raw["profile"]
    if not isinstance(spec, dict):
        raise ConfigError("profile: expected an object")
    try:
        profile = profile_from_config(spec)
    except ProfileError as exc:
        raise ConfigError(f"profile: {exc}") from None
    ts = raw.get("t", [1.0])
    ts = ts if isinstance(ts, list) else [ts]
    if not ts:
        raise ConfigError("t: empty list")
    ts = [_positive("t", v) for v in ts]
    h = raw.get("h", "auto")
    if h != "auto":
        h = _positive("h", h)
    return RunConfig(
        profile=profile,
        profile_spec=spec,
        t=ts,
        x=_x_grid(raw.get("x")),
        h=h,
        quadrature=_section(Quadrature, "quadrature", raw.get("quadrature")),
        tolerances=_section(Tolerances, "tolerances", raw.get("tolerances")),
        output=_section(Output, "output", raw.get("output")),
        reflection=_section(ReflectionSpec, "reflection", raw.get("reflection")),
        certify=_section(CertifySpec, "certify", raw.get("certify")),
        validate=_section(ValidateSpec, "validate", raw.get("validate")),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(raw)
