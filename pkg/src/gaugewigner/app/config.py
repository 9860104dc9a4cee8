"""Scenario configuration: a strict JSON schema with round-trip support."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..fields import CATALOG, DEFAULT_QUAD_ORDER, EMConfiguration, build_scenario
from ..grid import PhaseGrid, make_grid
from ..transforms import Wavefunction, gaussian_wavefunction, superpose


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


GRID_KEYS = {"dim": 1, "n_r": 64, "n_s": 64, "L_r": 8.0, "L_s": 8.0, "hbar": 1.0, "q": 1.0, "m": 1.0}
GAUSSIAN_KEYS = {"center": 0.0, "momentum": 0.0, "sigma": 1.0}
EVOLUTION_KEYS = {"engine": "weak_giwe", "dt": 0.01, "t_final": 0.1, "stride": 1}
TOP_KEYS = {"scenario", "params", "grid", "initial", "evolution", "verify", "output_dir",
            "quadrature_order", "N_series", "seed"}
CHECK_KEYS = {"name", "tol"}


def _finite(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _vector(value, dim: int, where: str) -> list[float]:
    vals = value if isinstance(value, list) else [value]
    vals = [_finite(v, where) for v in vals]
    if len(vals) == 1 and dim > 1:
        vals = vals + [0.0] * (dim - 1)
    if len(vals) != dim:
        raise ConfigError(f"{where}: expected {dim} components, got {len(vals)}")
    return vals


def _check_keys(block: dict, allowed, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _json_params(value, where):
    """Scenario parameters: numbers, strings, or lists of numbers."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: booleans are not valid parameters")
    if isinstance(value, (int, float)):
        return _finite(value, where)
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        return [_finite(v, where) for v in value]
    raise ConfigError(f"{where}: unsupported value {value!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=lambda: dict(GRID_KEYS))
    initial: dict = field(default_factory=lambda: {"gaussian": dict(GAUSSIAN_KEYS)})
    evolution: dict = field(default_factory=lambda: dict(EVOLUTION_KEYS))
    verify: list = field(default_factory=list)
    output_dir: str = "runs"
    quadrature_order: int = DEFAULT_QUAD_ORDER
    N_series: int = 3
    seed: int = 0

    # -- parsing -----------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        _check_keys(raw, TOP_KEYS, "config")
        raw = copy.deepcopy(raw)
        if "scenario" not in raw:
            raise ConfigError("config: 'scenario' is required")
        name = raw["scenario"]
        if name not in CATALOG:
            raise ConfigError(f"scenario: unknown {name!r}; choose from {sorted(CATALOG)}")

        grid = dict(GRID_KEYS)
        g_raw = raw.get("grid", {})
        _check_keys(g_raw, GRID_KEYS, "grid")
        grid.update(g_raw)
        for k in ("dim", "n_r", "n_s"):
            if isinstance(grid[k], bool) or not isinstance(grid[k], int):
                raise ConfigError(f"grid.{k}: expected an integer")
        for k in ("L_r", "L_s", "hbar", "q", "m"):
            grid[k] = _finite(grid[k], f"grid.{k}")
        try:
            make_grid(grid["dim"], grid["n_r"], grid["n_s"], grid["L_r"], grid["L_s"], grid["hbar"])
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
        if grid["m"] <= 0:
            raise ConfigError("grid.m must be positive")
        dim = grid["dim"]

        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params: expected an object")
        params = {k: _json_params(v, f"params.{k}") for k, v in params.items()}

        initial = cls._parse_initial(raw.get("initial", {"gaussian": dict(GAUSSIAN_KEYS)}), dim)

        evolution = dict(EVOLUTION_KEYS)
        e_raw = raw.get("evolution", {})
        _check_keys(e_raw, EVOLUTION_KEYS, "evolution")
        evolution.update(e_raw)
        if evolution["engine"] not in ("weak_giwe", "schrodinger", "liouville"):
            raise ConfigError(f"evolution.engine: unknown {evolution['engine']!r}")
        for k in ("dt", "t_final"):
            evolution[k] = _finite(evolution[k], f"evolution.{k}")
        if evolution["dt"] <= 0 or evolution["t_final"] < 0:
            raise ConfigError("evolution: dt must be > 0 and t_final >= 0")
        if isinstance(evolution["stride"], bool) or not isinstance(evolution["stride"], int) \
                or evolution["stride"] < 1:
            raise ConfigError("evolution.stride: expected a positive integer")
        steps = evolution["t_final"] / evolution["dt"]
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError("evolution: t_final must be a multiple of dt")

        verify = []
        for i, chk in enumerate(raw.get("verify", [])):
            if isinstance(chk, str):
                chk = {"name": chk}
            _check_keys(chk, CHECK_KEYS, f"verify[{i}]")
            if "name" not in chk or not isinstance(chk["name"], str):
                raise ConfigError(f"verify[{i}]: 'name' is required")
            entry = {"name": chk["name"]}
            if "tol" in chk:
                entry["tol"] = _finite(chk["tol"], f"verify[{i}].tol")
            verify.append(entry)

        out = raw.get("output_dir", "runs")
        if not isinstance(out, str) or not out:
            raise ConfigError("output_dir: expected a non-empty string")
        ints = {}
        for k, default in (("quadrature_order", DEFAULT_QUAD_ORDER), ("N_series", 3), ("seed", 0)):
            v = raw.get(k, default)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{k}: expected a non-negative integer")
            ints[k] = v
        if ints["quadrature_order"] < 1:
            raise ConfigError("quadrature_order must be >= 1")
        cfg = cls(scenario=name, params=params, grid=grid, initial=initial, evolution=evolution,
                  verify=verify, output_dir=out, **ints)
        try:
            cfg.build_field()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"params: {exc}") from None
        return cfg

    @staticmethod
    def _parse_gaussian(block, dim, where):
        _check_keys(block, GAUSSIAN_KEYS, where)
        g = dict(GAUSSIAN_KEYS)
        g.update(block)
        out = {"center": _vector(g["center"], dim, f"{where}.center"),
               "momentum": _vector(g["momentum"], dim, f"{where}.momentum"),
               "sigma": _finite(g["sigma"], f"{where}.sigma")}
        if out["sigma"] <= 0:
            raise ConfigError(f"{where}.sigma must be positive")
        return out

    @classmethod
    def _parse_initial(cls, block, dim):
        _check_keys(block, {"gaussian", "superposition"}, "initial")
        if len(block) != 1:
            raise ConfigError("initial: give exactly one of 'gaussian' or 'superposition'")
        if "gaussian" in block:
            return {"gaussian": cls._parse_gaussian(block["gaussian"], dim, "initial.gaussian")}
        items = block["superposition"]
        if not isinstance(items, list) or not items:
            raise ConfigError("initial.superposition: expected a non-empty list")
        parsed = []
        for i, item in enumerate(items):
            _check_keys(item, set(GAUSSIAN_KEYS) | {"weight"}, f"initial.superposition[{i}]")
            w = _finite(item.get("weight", 1.0), f"initial.superposition[{i}].weight")
            g = cls._parse_gaussian({k: v for k, v in item.items() if k != "weight"}, dim,
                                    f"initial.superposition[{i}]")
            g["weight"] = w
            parsed.append(g)
        return {"superposition": parsed}

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text())

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "params": dict(self.params), "grid": dict(self.grid),
                "initial": copy.deepcopy(self.initial), "evolution": dict(self.evolution),
                "verify": [dict(v) for v in self.verify], "output_dir": self.output_dir,
                "quadrature_order": self.quadrature_order, "N_series": self.N_series,
                "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- builders ----------------------------------------------------------
    def build_grid(self) -> PhaseGrid:
        g = self.grid
        return make_grid(g["dim"], g["n_r"], g["n_s"], g["L_r"], g["L_s"], g["hbar"])

    def build_field(self) -> EMConfiguration:
        params = dict(self.params)
        params.setdefault("q", self.grid["q"])
        params.setdefault("m", self.grid["m"])
        builder = CATALOG[self.scenario]
        import inspect
        if "dim" in inspect.signature(builder).parameters:
            params.setdefault("dim", self.grid["dim"])
        cfg = build_scenario(self.scenario, **params)
        if cfg.dim != self.grid["dim"]:
            raise ValueError(f"scenario {self.scenario!r} is {cfg.dim}-dimensional, "
                             f"grid is {self.grid['dim']}-dimensional")
        return cfg

    def build_state(self, grid: PhaseGrid | None = None,
                    cfg: EMConfiguration | None = None) -> Wavefunction:
        """Initial wavefunction; ``momentum`` entries are kinetic momenta."""
        grid = grid or self.build_grid()
        cfg = cfg or self.build_field()

        def one(g):
            r0 = [np.asarray(c) for c in g["center"]]
            A = cfg.vector_potential(r0)
            p_canon = [P + cfg.q * float(a) for P, a in zip(g["momentum"], A)]
            return gaussian_wavefunction(grid, g["center"], p_canon, g["sigma"])

        if "gaussian" in self.initial:
            return one(self.initial["gaussian"]).normalized()
        items = self.initial["superposition"]
        return superpose(grid, [one(g) for g in items], [g["weight"] for g in items])

    def evolution_config(self):
        from ..evolve import EvolutionConfig
        e = self.evolution
        return EvolutionConfig(dt=e["dt"], t_final=e["t_final"], stride=e["stride"],
                               engine=e["engine"])


def validate_config(raw: Any) -> ScenarioConfig:
    """Parse a raw mapping (or JSON string) into a :class:`ScenarioConfig`."""
    if isinstance(raw, str):
        return ScenarioConfig.from_json(raw)
    return ScenarioConfig.from_dict(raw)
