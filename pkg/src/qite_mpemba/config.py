"""Parsing and validation of experiment configs (JSON objects)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .dynamics import GridSpec
from .errors import InvalidInputError, QiteMpembaError
from .spectrum import (
    DistanceFunction,
    DistanceKind,
    EnergySpectrum,
    PopulationVector,
    canonicalize_many,
    make_distance,
)
from .spin_chain import SpinChainConfig

MODES = (
    "evolve",
    "crossing",
    "check-mpemba",
    "certificate",
    "general-f",
    "estimate",
    "max-accel",
    "collinear",
    "spin-chain",
    "preset",
)

# population-vector fields each mode needs, besides "energies"
VECTOR_FIELDS = {
    "evolve": ("populations",),
    "crossing": ("hot", "cold"),
    "check-mpemba": ("hot", "cold"),
    "certificate": ("hot", "cold"),
    "general-f": ("hot", "cold"),
    "estimate": ("hot", "cold"),
    "max-accel": ("hot", "cold"),
    "collinear": ("anchor_a", "anchor_b"),
}

REQUIRED_SCALARS = {
    "evolve": ("tau_max",),
    "crossing": ("tau_max",),
    "certificate": ("epsilon",),
    "max-accel": ("epsilon",),
    "collinear": ("tau_max", "lambdas"),
    "spin-chain": ("spin_chain", "tau_max"),
}


class ConfigError(QiteMpembaError):
    """Invalid config; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("--config", "top level must be a JSON object")
    return data


def _number(cfg: dict, name: str, positive: bool = False) -> float:
    value = cfg[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(name, "must be finite")
    if positive and not value > 0:
        raise ConfigError(name, "must be positive")
    return value


def _number_list(cfg: dict, name: str) -> list:
    value = cfg[name]
    if not isinstance(value, list) or not value:
        raise ConfigError(name, "expected a non-empty list of numbers")
    for x in value:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(name, f"expected numbers, found {x!r}")
    return [float(x) for x in value]


@dataclass(frozen=True, eq=False)
class Problem:
    """A validated population-space problem: one spectrum, named vectors, a distance."""

    spectrum: EnergySpectrum
    vectors: dict
    df: DistanceFunction
    raw: dict


def require(cfg: dict, mode: str) -> None:
    for name in REQUIRED_SCALARS.get(mode, ()):
        if name not in cfg:
            raise ConfigError(name, f"required in {mode} mode")
    for name in VECTOR_FIELDS.get(mode, ()):
        if name not in cfg:
            raise ConfigError(name, f"required in {mode} mode")
    if mode in VECTOR_FIELDS and "energies" not in cfg:
        raise ConfigError("energies", f"required in {mode} mode")


def distance_for(cfg: dict, spectrum: EnergySpectrum) -> DistanceFunction:
    kind_name = cfg.get("distance", "average_energy")
    try:
        kind = DistanceKind(kind_name)
    except ValueError:
        choices = ", ".join(k.value for k in DistanceKind)
        raise ConfigError("distance", f"unknown kind {kind_name!r} (choose from {choices})") from None
    weights = None
    if kind is DistanceKind.CUSTOM:
        if "weights" not in cfg:
            raise ConfigError("weights", "required when distance is custom")
        weights = _number_list(cfg, "weights")
    try:
        return make_distance(spectrum, kind, weights)
    except InvalidInputError as exc:
        raise ConfigError("weights" if weights is not None else "distance", str(exc)) from None


def build_problem(cfg: dict, mode: str) -> Problem:
    require(cfg, mode)
    names = VECTOR_FIELDS[mode]
    energies = _number_list(cfg, "energies")
    raw = {name: _number_list(cfg, name) for name in names}
    for name, vec in raw.items():
        if len(vec) != len(energies):
            raise ConfigError(name, f"has {len(vec)} entries but energies has {len(energies)}")
        if any(x < 0 for x in vec):
            raise ConfigError(name, "populations must be nonnegative")
        if abs(sum(vec) - 1.0) > 1e-9:
            raise ConfigError(name, f"populations sum to {sum(vec)!r}, expected 1")
    tol = None
    if "merge_tolerance" in cfg:
        tol = _number(cfg, "merge_tolerance", positive=True)
    try:
        spectrum, vectors = canonicalize_many(energies, [raw[n] for n in names], tol)
    except InvalidInputError as exc:
        raise ConfigError("energies", str(exc)) from None
    df = distance_for(cfg, spectrum)
    return Problem(spectrum, dict(zip(names, vectors)), df, raw)


def grid_for(cfg: dict) -> GridSpec:
    spec = cfg.get("grid")
    if spec is None:
        return GridSpec()
    if not isinstance(spec, dict):
        raise ConfigError("grid", "expected an object with kind/points")
    unknown = set(spec) - {"kind", "points", "min_fraction"}
    if unknown:
        raise ConfigError("grid", f"unknown keys {sorted(unknown)}")
    try:
        return GridSpec(
            kind=spec.get("kind", "geometric"),
            points=int(spec.get("points", 400)),
            min_fraction=float(spec.get("min_fraction", 1e-4)),
        )
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError("grid", str(exc)) from None


def optional_number(cfg: dict, name: str, positive: bool = False) -> Optional[float]:
    if name not in cfg or cfg[name] is None:
        return None
    return _number(cfg, name, positive=positive)


def number(cfg: dict, name: str, positive: bool = False) -> float:
    if name not in cfg:
        raise ConfigError(name, "missing")
    return _number(cfg, name, positive=positive)


def lambdas_of(cfg: dict) -> list:
    return _number_list(cfg, "lambdas")


def spin_chain_of(cfg: dict) -> tuple[SpinChainConfig, float, str]:
    """``(config with gamma = gamma1, gamma0, solver)`` from the ``spin_chain`` block."""
    block = cfg.get("spin_chain")
    if not isinstance(block, dict):
        raise ConfigError("spin_chain", "expected an object")
    allowed = {"sites", "gamma0", "gamma1", "mu", "theta", "tau_pre", "solver"}
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError("spin_chain", f"unknown keys {sorted(unknown)}")
    for key in ("sites", "gamma0", "mu", "theta", "tau_pre"):
        if key not in block:
            raise ConfigError(f"spin_chain.{key}", "required")
    values = {}
    for key in ("gamma0", "gamma1", "mu", "theta", "tau_pre"):
        if key in block:
            try:
                values[key] = _number(block, key)
            except ConfigError as exc:
                raise ConfigError(f"spin_chain.{key}", str(exc).split(": ", 1)[1]) from None
    sites = block["sites"]
    if isinstance(sites, bool) or not isinstance(sites, int):
        raise ConfigError("spin_chain.sites", f"expected an integer, got {sites!r}")
    solver = block.get("solver", "auto")
    if solver not in ("auto", "householder-ql", "lapack"):
        raise ConfigError("spin_chain.solver", f"unknown solver {solver!r}")
    try:
        chain = SpinChainConfig(
            sites=sites,
            mu=values["mu"],
            theta=values["theta"],
            gamma=values.get("gamma1", 1.0),
            tau_pre=values["tau_pre"],
        )
    except InvalidInputError as exc:
        raise ConfigError("spin_chain", str(exc)) from None
    if values["gamma0"] == chain.gamma:
        raise ConfigError("spin_chain.gamma0", "must differ from gamma1")
    return chain, values["gamma0"], solver


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    merged = dict(cfg)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def echo_config(cfg: dict) -> dict:
    """Config fragment that re-ingests cleanly (plain JSON types only)."""
    return json.loads(json.dumps(cfg))


def as_float_list(values: Any) -> list:
    return [float(x) for x in values]
