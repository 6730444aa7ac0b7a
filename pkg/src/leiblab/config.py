"""Run configuration: strict TOML loading, validation and manifest echo.

One structured file drives every command.  Unknown keys anywhere are
errors (no silent typo acceptance) and missing required fields are
reported with their full path.  A loaded configuration can be dumped
back to TOML (the run manifest) and reloaded to an identical run.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import geometry, profiles
from .errors import ConfigurationError
from .flux import LeibensonParams
from .grid import RadialGrid, build_grid
from .oracles import BarenblattProfile
from .stepping import ContinuationSchedule, TimeStepConfig

__all__ = ["RunConfig", "load_config", "dump_toml"]

_PROFILES = ("zero", "bump", "annulus", "barenblatt", "tabulated")

# section -> key -> (type, required, default)
_SCHEMA = {
    None: {
        "label": (str, False, "run"),
        "seed": (int, False, 0),
    },
    "manifold": {
        "preset": (str, True, None),
        "dimension": (int, True, None),
        "warping_file": (str, False, None),
    },
    "equation": {
        "p": (float, True, None),
        "q": (float, True, None),
        "sigma": (float, False, None),  # default: regime-aware (see sigma())
    },
    "domain": {
        "radius": (float, True, None),
        "cells": (int, True, None),
        "grading": (str, False, "uniform"),
    },
    "time": {
        "dt": (float, True, None),
        "t_end": (float, True, None),
        "newton_tol": (float, False, 1e-10),
        "newton_max": (int, False, 30),
        "stepping": (str, False, "adaptive-halving"),
        "snapshot_every": (int, False, 1),
    },
    "continuation": {
        "enabled": (bool, False, True),
        "n_values": (list, False, [10.0, 100.0, 1000.0, 10000.0]),
        "barrier_margin": (float, False, 0.99),
    },
    "initial": {
        "profile": (str, True, None),
        "center": (float, False, 0.0),
        "width": (float, False, 0.5),
        "amplitude": (float, False, 1.0),
        "inner": (float, False, None),
        "outer": (float, False, None),
        "family": (str, False, None),
        "t_offset": (float, False, None),
        "profile_constant": (float, False, None),
        "file": (str, False, None),
    },
    "diagnostics": {
        "support_threshold_rel": (float, False, 1e-8),
        "ladder_radius": (float, False, None),
        "ladder_k_max": (int, False, 8),
        "ladder_sigma": (float, False, None),
        "deadcore_eps_rel": (float, False, 1e-4),
        "comparison_pairs": (int, False, 3),
    },
    "output": {
        "directory": (str, False, "out"),
    },
    "sweep": {
        "amplitudes": (list, False, []),
        "radii": (list, False, []),
        "p": (list, False, []),
        "q": (list, False, []),
    },
}


def _coerce(value, typ, path):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is bool and isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    if typ is list and isinstance(value, list):
        return [float(v) for v in value]
    raise ConfigurationError(f"field {path}: expected {typ.__name__}, got {value!r}")


@dataclass
class RunConfig:
    """Validated, fully resolved run configuration."""

    raw: dict
    config_dir: str = "."

    # -- field access -----------------------------------------------------
    def get(self, section, key):
        if section is None:
            return self.raw.get(key)
        return self.raw.get(section, {}).get(key)

    @property
    def label(self) -> str:
        return self.get(None, "label")

    @property
    def seed(self) -> int:
        return self.get(None, "seed")

    def _path(self, name: str) -> str:
        return os.path.join(self.config_dir, name)

    # -- builders ----------------------------------------------------------
    def manifold(self) -> geometry.ModelManifold:
        preset = self.get("manifold", "preset")
        n = self.get("manifold", "dimension")
        if preset == "euclidean":
            return geometry.euclidean(n)
        if preset == "hyperbolic":
            return geometry.hyperbolic_like(n)
        if preset == "tabulated":
            path = self.get("manifold", "warping_file")
            if path is None:
                raise ConfigurationError("missing required field: manifold.warping_file")
            return geometry.tabulated(self._path(path), n)
        raise ConfigurationError(f"field manifold.preset: unknown preset '{preset}'")

    def params(self) -> LeibensonParams:
        return LeibensonParams(self.get("equation", "p"), self.get("equation", "q"))

    def sigma(self) -> float:
        s = self.get("equation", "sigma")
        if s is None:
            from .propagation import default_sigma

            return default_sigma(self.params())
        return s

    def grid(self) -> RadialGrid:
        return build_grid(
            self.manifold(),
            self.get("domain", "radius"),
            self.get("domain", "cells"),
            self.get("domain", "grading"),
        )

    def timestep(self) -> TimeStepConfig:
        return TimeStepConfig(
            dt=self.get("time", "dt"),
            t_end=self.get("time", "t_end"),
            newton_tol=self.get("time", "newton_tol"),
            newton_max=self.get("time", "newton_max"),
            stepping=self.get("time", "stepping"),
        )

    def schedule(self) -> ContinuationSchedule:
        return ContinuationSchedule(
            n_values=tuple(self.get("continuation", "n_values")),
            barrier_margin=self.get("continuation", "barrier_margin"),
        )

    def barenblatt_profile(self) -> BarenblattProfile:
        fam = self.get("initial", "family")
        n = self.get("manifold", "dimension")
        for key in ("family", "t_offset", "profile_constant"):
            if self.get("initial", key) is None:
                raise ConfigurationError(f"missing required field: initial.{key}")
        exponent = self.get("equation", "q") if fam == "porous-medium" else self.get("equation", "p")
        return BarenblattProfile(
            family=fam,
            n=n,
            exponent=exponent,
            c=self.get("initial", "profile_constant"),
            t_offset=self.get("initial", "t_offset"),
        )

    def initial_values(self, grid: RadialGrid) -> np.ndarray:
        kind = self.get("initial", "profile")
        r = grid.nodes
        if kind == "zero":
            return np.zeros_like(r)
        if kind == "bump":
            return profiles.bump(
                r,
                self.get("initial", "center"),
                self.get("initial", "width"),
                self.get("initial", "amplitude"),
            )
        if kind == "annulus":
            for key in ("inner", "outer"):
                if self.get("initial", key) is None:
                    raise ConfigurationError(f"missing required field: initial.{key}")
            return profiles.annulus(
                r,
                self.get("initial", "inner"),
                self.get("initial", "outer"),
                self.get("initial", "amplitude"),
            )
        if kind == "barenblatt":
            return profiles.barenblatt_snapshot(r, self.barenblatt_profile())
        if kind == "tabulated":
            path = self.get("initial", "file")
            if path is None:
                raise ConfigurationError("missing required field: initial.file")
            return profiles.tabulated_values(r, self._path(path))
        raise ConfigurationError(f"field initial.profile: unknown profile '{kind}'")

    def ladder_radius(self) -> float:
        r = self.get("diagnostics", "ladder_radius")
        return r if r is not None else 0.5 * self.get("domain", "radius")

    def ladder_sigma(self) -> float:
        s = self.get("diagnostics", "ladder_sigma")
        if s is not None:
            return s
        p, q = self.get("equation", "p"), self.get("equation", "q")
        return max(p, p * q) + 0.5


def _validate(data: dict, path_hint: str) -> dict:
    out: dict = {}
    top = _SCHEMA[None]
    for key, value in data.items():
        if key in top:
            typ, _, _ = top[key]
            out[key] = _coerce(value, typ, key)
        elif key in _SCHEMA:
            if not isinstance(value, dict):
                raise ConfigurationError(f"field {key}: expected a section")
            section_schema = _SCHEMA[key]
            section_out = {}
            for k2, v2 in value.items():
                if k2 not in section_schema:
                    raise ConfigurationError(f"unknown key: {key}.{k2} in {path_hint}")
                typ, _, _ = section_schema[k2]
                section_out[k2] = _coerce(v2, typ, f"{key}.{k2}")
            out[key] = section_out
        else:
            raise ConfigurationError(f"unknown key: {key} in {path_hint}")

    for key, (typ, required, default) in top.items():
        if key not in out:
            out[key] = default
    for section, schema in _SCHEMA.items():
        if section is None:
            continue
        sec = out.setdefault(section, {})
        for k2, (typ, required, default) in schema.items():
            if k2 not in sec:
                if required:
                    raise ConfigurationError(f"missing required field: {section}.{k2}")
                if default is not None:
                    sec[k2] = default
            elif sec[k2] is None and required:
                raise ConfigurationError(f"missing required field: {section}.{k2}")
    return out


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid TOML: {exc}")
    cfg = RunConfig(_validate(data, str(path)), os.path.dirname(os.path.abspath(path)))
    # eager validation: every builder must succeed before any run starts
    cfg.params()
    grid = cfg.grid()
    cfg.initial_values(grid)
    cfg.timestep()
    cfg.schedule()
    return cfg


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ConfigurationError(f"cannot serialize {v}")
        return format(v, ".17g")
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise ConfigurationError(f"cannot serialize {type(v).__name__} to TOML")


def dump_toml(data: dict) -> str:
    """Serialize the (validated) configuration dict back to TOML."""
    lines = []
    for key, value in data.items():
        if not isinstance(value, dict):
            lines.append(f"{key} = {_toml_scalar(value)}")
    for key, value in data.items():
        if isinstance(value, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for k2, v2 in value.items():
                if v2 is not None:
                    lines.append(f"{k2} = {_toml_scalar(v2)}")
    return "\n".join(lines) + "\n"
