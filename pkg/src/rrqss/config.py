"""Run configuration: JSON file schema, defaults and validation.

Every key is optional; omitted keys take the defaults below (system
parameters default to the ultralow-loss fiber setup used throughout).

.. code-block:: json

    {
      "system": {"eta_d": 0.56, "p_d": 1e-8, "e_d": 0.02, "alpha": 0.167, "f": 1.1},
      "sweep": {"start": 0, "stop": 700, "step": 10},
      "objectives": ["inside", "outside", "plob"],
      "tagging": "merged",
      "finite": {"N": 10000, "s": 100, "exact": false},
      "search": {"mu_min": 0.001, "mu_max": 100, "mu_points": 61,
                 "L_values": [2, 4, 8], "nu_th_values": [0, 1, 2]},
      "simulate": {"distance": 100, "mu": 0.5, "L": 64, "nu_th": 2, "trains": 100000},
      "check": {"trains": 100000,
                "points": [{"distance": 100, "mu": 0.5, "L": 64}],
                "equivalence_L": [4, 8], "equivalence_trials": 100},
      "output": {"dir": "out", "format": "csv", "timestamp": true},
      "seed": 0,
      "workers": 1
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .keyrate import FiniteSizeParams, TAGGING_MODES
from .model import SystemParams
from .optimizer import SearchSpace

__all__ = ["ConfigError", "RunConfig", "SWEEP_OBJECTIVES", "DEFAULT_CHECK_POINTS", "load_config"]

SWEEP_OBJECTIVES = ("outside", "inside", "inside_finite", "plob")

DEFAULT_CHECK_POINTS = (
    {"distance": 50.0, "mu": 0.2, "L": 64},
    {"distance": 50.0, "mu": 0.5, "L": 128},
    {"distance": 100.0, "mu": 0.5, "L": 64},
    {"distance": 100.0, "mu": 0.2, "L": 128},
    {"distance": 200.0, "mu": 0.5, "L": 128},
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    start: float = 0.0
    stop: float = 700.0
    step: float = 10.0
    objectives: tuple = ("inside", "outside", "plob")
    tagging: str = "merged"
    finite: Optional[FiniteSizeParams] = None
    search: SearchSpace = field(default_factory=SearchSpace)
    simulate: dict = field(default_factory=lambda: {
        "distance": 100.0, "mu": 0.5, "L": 64, "nu_th": 2, "trains": 100_000})
    check_trains: int = 100_000
    check_points: tuple = DEFAULT_CHECK_POINTS
    equivalence_L: tuple = (4, 8)
    equivalence_trials: int = 100
    out_dir: str = "out"
    fmt: str = "csv"
    timestamp: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.objectives:
            raise ConfigError("at least one objective must be selected")
        bad = [o for o in self.objectives if o not in SWEEP_OBJECTIVES]
        if bad:
            raise ConfigError(f"unknown objective(s): {', '.join(map(str, bad))}")
        if "inside_finite" in self.objectives and self.finite is None:
            raise ConfigError("objective inside_finite needs a 'finite' section or --N")
        if self.tagging not in TAGGING_MODES:
            raise ConfigError(f"tagging must be one of {TAGGING_MODES}")
        if not self.step > 0:
            raise ConfigError("sweep step must be positive")
        if self.start < 0 or self.stop < self.start:
            raise ConfigError("sweep needs 0 <= start <= stop")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.check_trains < 0:
            raise ConfigError("check trains must be >= 0")

    @property
    def distances(self) -> np.ndarray:
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(n), 9)


def _section(raw: dict, key: str, allowed) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be an object")
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in '{key}': {', '.join(sorted(extra))}")
    return sec


def from_dict(raw: dict) -> RunConfig:
    top = {"system", "sweep", "objectives", "tagging", "finite", "search", "simulate",
           "check", "output", "seed", "workers"}
    extra = set(raw) - top
    if extra:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(extra))}")
    kw = {}
    try:
        sys_keys = [f.name for f in fields(SystemParams)]
        kw["system"] = SystemParams(**_section(raw, "system", sys_keys))
        sweep = _section(raw, "sweep", ("start", "stop", "step"))
        for k in ("start", "stop", "step"):
            if k in sweep:
                kw[k] = float(sweep[k])
        if "objectives" in raw:
            kw["objectives"] = tuple(raw["objectives"])
        if "tagging" in raw:
            kw["tagging"] = raw["tagging"]
        if raw.get("finite") is not None:
            kw["finite"] = FiniteSizeParams(**_section(raw, "finite", ("N", "s", "exact")))
        search = _section(raw, "search", [f.name for f in fields(SearchSpace)])
        kw["search"] = SearchSpace(**search)
        sim = _section(raw, "simulate", ("distance", "mu", "L", "nu_th", "trains"))
        kw["simulate"] = {**RunConfig.__dataclass_fields__["simulate"].default_factory(), **sim}
        check = _section(raw, "check", ("trains", "points", "equivalence_L",
                                        "equivalence_trials"))
        if "trains" in check:
            kw["check_trains"] = int(check["trains"])
        if "points" in check:
            kw["check_points"] = tuple(dict(p) for p in check["points"])
        if "equivalence_L" in check:
            kw["equivalence_L"] = tuple(int(v) for v in check["equivalence_L"])
        if "equivalence_trials" in check:
            kw["equivalence_trials"] = int(check["equivalence_trials"])
        out = _section(raw, "output", ("dir", "format", "timestamp"))
        if "dir" in out:
            kw["out_dir"] = str(out["dir"])
        if "format" in out:
            kw["fmt"] = out["format"]
        if "timestamp" in out:
            kw["timestamp"] = bool(out["timestamp"])
        if "seed" in raw:
            kw["seed"] = int(raw["seed"])
        if "workers" in raw:
            kw["workers"] = int(raw["workers"])
        return RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(raw)
