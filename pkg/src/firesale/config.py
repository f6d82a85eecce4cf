"""Flat key/value run configuration with dotted sections.

Files contain ``key = value`` lines; ``#`` starts a comment.  Integer
parameters (model.N, model.M, counts, seeds) are parsed as integers,
everything else as floats/strings.  CLI flags override file values.

Recognized keys::

    model.N  model.M  model.q  model.zeta  model.sigma_s2  model.sigma_d2
    model.gamma  model.sigma_f2  model.sigma_nu2
    grid.phi.min  grid.phi.max  grid.phi.count
    grid.p_b.min  grid.p_b.max  grid.p_b.count
    grid.q.min  grid.q.max  grid.q.count
    het.phi  het.p_b
    run.methods  run.samples  run.seed  run.workers  run.out_dir
    run.format  run.heatmaps  run.solver
    replica.pop_size  replica.equilibration  replica.measurement
    replica.tol  replica.breakdown_tol
    gap.scales
    sim.horizon  sim.paths
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .params import ModelParams, ParameterError


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_INT_KEYS = {
    "model.N", "model.M",
    "grid.phi.count", "grid.p_b.count", "grid.q.count",
    "run.samples", "run.seed", "run.workers",
    "replica.pop_size", "replica.equilibration", "replica.measurement",
    "sim.horizon", "sim.paths",
}

_FLOAT_KEYS = {
    "model.q", "model.zeta", "model.sigma_s2", "model.sigma_d2",
    "model.gamma", "model.sigma_f2", "model.sigma_nu2",
    "grid.phi.min", "grid.phi.max", "grid.p_b.min", "grid.p_b.max",
    "grid.q.min", "grid.q.max",
    "het.phi", "het.p_b",
    "replica.tol", "replica.breakdown_tol",
}

_BOOL_KEYS = {"run.heatmaps"}

_STR_KEYS = {"run.methods", "run.out_dir", "run.format", "run.solver", "gap.scales"}

KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS

DEFAULTS = {
    "model.N": 200,
    "model.M": 300,
    "model.q": 8.0,
    "model.zeta": 1.85,
    "model.sigma_s2": 0.009,
    "model.sigma_d2": 0.03,
    "model.gamma": 50.0,
    "model.sigma_f2": 0.0,
    "model.sigma_nu2": 1e-4,
    "grid.phi.min": 0.0,
    "grid.phi.max": 0.99,
    "grid.phi.count": 40,
    "grid.p_b.min": 0.05,
    "grid.p_b.max": 0.95,
    "grid.p_b.count": 40,
    "grid.q.min": 2.0,
    "grid.q.max": 30.0,
    "grid.q.count": 15,
    "het.phi": 0.9,
    "het.p_b": 7.0 / 27.0,
    "run.methods": "diagonalization,corsi,replica",
    "run.samples": 200,
    "run.seed": 0,
    "run.workers": 1,
    "run.out_dir": "",
    "run.format": "csv",
    "run.heatmaps": False,
    "run.solver": "lanczos",
    "replica.pop_size": 10_000,
    "replica.equilibration": 200,
    "replica.measurement": 150,
    "replica.tol": 0.01,
    "replica.breakdown_tol": 1e-3,
    "gap.scales": "1,2,4",
    "sim.horizon": 200,
    "sim.paths": 1,
}


def _coerce(key: str, raw):
    if not isinstance(raw, str):
        return raw
    value = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc
    return value


def parse_config_file(path) -> dict:
    """Read a flat dotted-key configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge defaults <- file <- CLI overrides into a full settings dict."""
    settings = dict(DEFAULTS)
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            settings[key] = _coerce(key, value)
    return settings


def model_from_settings(settings: dict) -> ModelParams:
    try:
        return ModelParams(
            n_assets=settings["model.N"],
            n_banks=settings["model.M"],
            q=settings["model.q"],
            zeta=settings["model.zeta"],
            sigma_s2=settings["model.sigma_s2"],
            sigma_d2=settings["model.sigma_d2"],
            gamma=settings["model.gamma"],
            sigma_f2=settings["model.sigma_f2"],
            sigma_nu2=settings["model.sigma_nu2"],
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def axis_from_settings(settings: dict, name: str) -> np.ndarray:
    lo = settings[f"grid.{name}.min"]
    hi = settings[f"grid.{name}.max"]
    count = settings[f"grid.{name}.count"]
    if count < 1 or hi < lo:
        raise ConfigError(f"invalid grid axis {name}: [{lo}, {hi}] x {count}")
    return np.linspace(lo, hi, count)


def methods_from_settings(settings: dict) -> tuple:
    methods = tuple(
        m.strip() for m in str(settings["run.methods"]).split(",") if m.strip()
    )
    valid = {"diagonalization", "corsi", "replica"}
    if not methods:
        raise ConfigError("run.methods must name at least one method")
    for m in methods:
        if m not in valid:
            raise ConfigError(f"unknown method {m!r} (choose from {sorted(valid)})")
    return methods


def scales_from_settings(settings: dict) -> tuple:
    try:
        scales = tuple(
            int(s) for s in str(settings["gap.scales"]).split(",") if s.strip()
        )
    except ValueError as exc:
        raise ConfigError(f"cannot parse gap.scales = {settings['gap.scales']!r}") from exc
    if not scales or any(s < 1 for s in scales):
        raise ConfigError("gap.scales must be positive integers")
    return scales
