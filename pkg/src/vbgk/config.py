"""Line-based ``key = value`` run configuration."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .params import ModelParams, ParameterDomainError
from .solver import SPLITTINGS

ENV_PREFIX = "VBGK_CFG_"
INITIAL_CONDITIONS = ("taylor_green", "rest")


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _int(text):
    return int(text)


def _float_list(text):
    values = [_float(part) for part in text.replace(",", " ").split()]
    if not values:
        raise ValueError("empty list")
    return values


def _grid(text):
    parts = text.lower().replace("x", " ").split()
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ValueError("expected N or NxM")


# key -> (parser, type name, default or REQUIRED marker)
REQUIRED = object()
KEYS = {
    "epsilon": (_float, "float", None),
    "eps_list": (_float_list, "list of floats", None),
    "tau": (_float, "float", None),
    "a": (_float, "float", None),
    "lambda": (_float, "float", None),
    "nu": (_float, "float", None),
    "rho_bar": (_float, "float", 1.0),
    "grid": (_grid, "N or NxM", None),
    "T": (_float, "float", None),
    "splitting": (str, "string", "trapezoidal"),
    "shift_cells": (_int, "integer", 1),
    "probe_every": (_int, "integer", 1),
    "energy_order": (_int, "integer", 0),
    "snapshot_every": (_int, "integer", 0),
    "initial": (str, "string", "taylor_green"),
    "output_dir": (str, "path", "vbgk_out"),
    "workers": (_int, "integer", 1),
    "probes_per_run": (_int, "integer", 50),
    "max_steps": (_int, "integer", 2_000_000),
}

REQUIRED_BY_COMMAND = {
    "run": ("epsilon", "lambda", "grid", "T"),
    "convergence": ("eps_list", "lambda", "grid", "T"),
    "certify": ("epsilon", "lambda"),
    "constants": ("lambda",),
}


class ConfigError(ValueError):
    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("\n".join(f"{where}: {msg}" for where, msg in errors))


@dataclass
class RunConfig:
    values: dict
    sources: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    @property
    def a(self) -> float:
        return self.values["a"]

    def params(self, epsilon: float | None = None) -> ModelParams:
        v = self.values
        eps = epsilon if epsilon is not None else (v["epsilon"] or max(v["eps_list"]))
        return ModelParams(epsilon=eps, tau=v["tau"], lam=v["lambda"], nu=v["nu"],
                           rho_bar=v["rho_bar"])

    def resolved(self) -> list[tuple[str, object]]:
        """Every key with its resolved value, in a fixed order."""
        return [(k, self.values[k]) for k in KEYS]


def _check_domain(values, where, errors):
    positive = ("epsilon", "tau", "a", "lambda", "nu", "rho_bar", "T")
    for key in positive:
        if values.get(key) is not None and not values[key] > 0:
            errors.append((where[key], f"domain error: {key} must be > 0, got {values[key]!r}"))
    if values.get("eps_list") is not None and not all(e > 0 for e in values["eps_list"]):
        errors.append((where["eps_list"], "domain error: every eps_list entry must be > 0"))
    at_least_one = ("shift_cells", "probe_every", "workers", "probes_per_run", "max_steps")
    for key in at_least_one:
        if values[key] < 1:
            errors.append((where.get(key, "default"), f"domain error: {key} must be >= 1, got {values[key]}"))
    if values["snapshot_every"] < 0:
        errors.append((where.get("snapshot_every", "default"), "domain error: snapshot_every must be >= 0"))
    if values["energy_order"] not in (0, 1, 2):
        errors.append((where.get("energy_order", "default"), "domain error: energy_order must be 0, 1 or 2"))
    if values["splitting"] not in SPLITTINGS:
        errors.append((where.get("splitting", "default"),
                       f"domain error: splitting must be one of {', '.join(SPLITTINGS)}"))
    if values["initial"] not in INITIAL_CONDITIONS:
        errors.append((where.get("initial", "default"),
                       f"domain error: initial must be one of {', '.join(INITIAL_CONDITIONS)}"))
    if values.get("grid") is not None:
        nx, ny = values["grid"]
        if nx < 4 or ny < 4 or nx % 2 or ny % 2:
            errors.append((where["grid"], "domain error: grid sizes must be even and >= 4"))


def parse_config(text: str, command: str = "run", environ: dict | None = None) -> RunConfig:
    """Parse and validate; raises ConfigError listing every problem with its location.

    Environment variables named VBGK_CFG_<KEY> override file entries.
    """
    errors: list[tuple[str, str]] = []
    raw: dict[str, tuple[str, str]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        where = f"line {number}"
        if "=" not in content:
            errors.append((where, f"expected 'key = value', got {content!r}"))
            continue
        key, value = (part.strip() for part in content.split("=", 1))
        if key not in KEYS:
            errors.append((where, f"unknown key {key!r}"))
            continue
        if key in raw:
            errors.append((where, f"duplicate key {key!r} (first given on {raw[key][1]})"))
            continue
        raw[key] = (value, where)
    env = os.environ if environ is None else environ
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):]
        key = key if key in KEYS else key.lower()
        where = f"environment {name}"
        if key not in KEYS:
            errors.append((where, f"unknown key {key!r}"))
            continue
        raw[key] = (value, where)

    values, where = {}, {}
    for key, (parser, type_name, default) in KEYS.items():
        if key in raw:
            text_value, loc = raw[key]
            where[key] = loc
            try:
                values[key] = parser(text_value)
            except ValueError:
                errors.append((loc, f"type error: {key} expects {type_name}, got {text_value!r}"))
                values[key] = default
        else:
            values[key] = default
            where[key] = "default"

    if command not in REQUIRED_BY_COMMAND:
        raise ValueError(f"unknown command {command!r}")
    for key in REQUIRED_BY_COMMAND[command]:
        if key not in raw:
            errors.append(("config", f"missing required key {key!r}"))

    if "tau" in raw and "a" in raw:
        errors.append((f"{where['tau']} and {where['a']}",
                       "give exactly one of 'tau' and 'a', not both"))
    elif "tau" not in raw and "a" not in raw:
        errors.append(("config", "missing required key: one of 'tau' or 'a'"))
    if "nu" not in raw and not (command == "constants" and "a" in raw):
        errors.append(("config", "missing required key 'nu'"))

    _check_domain(values, where, errors)
    if errors:
        raise ConfigError(errors)

    lam = values["lambda"]
    try:
        if values["a"] is not None:
            if values["nu"] is None:
                values["nu"] = 2.0 * lam * lam * values["a"] * (values["tau"] or 1.0)
            values["tau"] = values["nu"] / (2.0 * lam * lam * values["a"])
        else:
            values["a"] = values["nu"] / (2.0 * lam * lam * values["tau"])
    except (ZeroDivisionError, ParameterDomainError) as err:
        raise ConfigError([("config", str(err))]) from None
    return RunConfig(values, where)


def load_config(path: str, command: str = "run") -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), command)
