"""Experiment configuration: one TOML file with a section per concern.

Sections and their keys (defaults in :data:`DEFAULTS`)::

    [profile]      name, plus the family parameters (alpha, p, R0, R, c_L, gamma)
    [kernel]       d, c0, K0, mode, tail_policy, tail_rate, epsilon_default
    [simulation]   epsilon, small_jump_mode, t_max_factor, n_paths, master_seed
    [geometry]     x0, r, payoff ("right-half" or "outer-shell"), holder_radii
    [pipeline]     c1, c2, c3, steps
    [conditions]   n_paths, which, n_max, grid_points, hi_alpha, oscillation_levels,
                   oscillation_alpha

``R0 = "inf"`` spells an infinite range. The kernel constants ``c0, c1, c2,
c3, K0`` must lie in ``(1, inf)``.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import ConstantLedger, build_ledger
from .geometry import AnnularSector
from .exit_measure import HarmonicSpec
from .kernel import KernelSpec
from .profiles import ScalingProfile, make_profile
from .simulator import SimConfig

__all__ = ["ConfigError", "LabConfig", "load_config", "load_preset", "list_presets", "DEFAULTS",
           "STEPS"]

STEPS = ("derive", "check-L", "simulate", "exit", "conditions", "holder", "oscillation")
CONDITIONS = ("J0", "J1", "J2", "HI")

DEFAULTS = {
    "profile": {"name": "stable"},
    "kernel": {"d": 1, "c0": 1.1, "K0": 2.0, "mode": "levy", "tail_policy": "truncate",
               "tail_rate": 1.0, "epsilon_default": None},
    "simulation": {"epsilon": None, "small_jump_mode": "drop", "t_max_factor": 1e3,
                   "n_paths": 10_000, "master_seed": 0},
    "geometry": {"x0": None, "r": 1.0, "payoff": "right-half",
                 "holder_radii": [0.02, 0.04, 0.08, 0.15, 0.25, 0.4, 0.6]},
    "pipeline": {"c1": 2.0, "c2": 2.0, "c3": 2.0, "steps": list(STEPS)},
    "conditions": {"n_paths": 5_000, "which": list(CONDITIONS), "n_max": 3, "grid_points": 16,
                   "hi_alpha": 0.5, "oscillation_levels": 6, "oscillation_alpha": None},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _merge(raw: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for section, body in raw.items():
        if section not in out:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        if section != "profile":
            unknown = set(body) - set(out[section])
            if unknown:
                raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        out[section].update(body)
    return out


@dataclass(frozen=True)
class LabConfig:
    """Validated configuration with builders for the objects it describes."""

    data: dict
    source: str = "<memory>"

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<memory>") -> "LabConfig":
        cfg = cls(_merge(raw), source)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        k, p = self.data["kernel"], self.data["pipeline"]
        for name, v in (("kernel.c0", k["c0"]), ("kernel.K0", k["K0"]), ("pipeline.c1", p["c1"]),
                        ("pipeline.c2", p["c2"]), ("pipeline.c3", p["c3"])):
            if not isinstance(v, (int, float)) or not (1 < v < math.inf):
                raise ConfigError(f"{name} must lie in (1, inf), got {v!r}")
        for step in p["steps"]:
            if step not in STEPS:
                raise ConfigError(f"unknown step {step!r}; choose from {STEPS}")
        for c in self.data["conditions"]["which"]:
            if c not in CONDITIONS:
                raise ConfigError(f"unknown condition {c!r}")
        if self.data["geometry"]["payoff"] not in ("right-half", "outer-shell"):
            raise ConfigError("geometry.payoff must be 'right-half' or 'outer-shell'")
        try:
            spec = self.kernel()
            self.sim_config()
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < self.r < spec.profile.R:
            raise ConfigError("geometry.r must lie in (0, R)")

    def with_overrides(self, *, seed: int | None = None, paths: int | None = None) -> "LabConfig":
        data = copy.deepcopy(self.data)
        if seed is not None:
            data["simulation"]["master_seed"] = int(seed)
        if paths is not None:
            data["simulation"]["n_paths"] = int(paths)
            data["conditions"]["n_paths"] = int(paths)
        return LabConfig.from_dict(data, self.source)

    # -- builders ---------------------------------------------------------------
    def profile(self) -> ScalingProfile:
        params = dict(self.data["profile"])
        name = params.pop("name")
        if name.startswith("table:") and self.source not in ("<memory>",):
            path = Path(name[len("table:"):])
            if not path.is_absolute():
                path = Path(self.source).parent / path
            name = f"table:{path}"
        return make_profile(name, **params)

    def kernel(self) -> KernelSpec:
        k = self.data["kernel"]
        return KernelSpec(d=int(k["d"]), profile=self.profile(), c0=float(k["c0"]), K0=float(k["K0"]),
                          mode=k["mode"], tail_policy=k["tail_policy"],
                          tail_rate=float(k["tail_rate"]), epsilon_default=k["epsilon_default"])

    def sim_config(self, C1: float | None = None) -> SimConfig:
        s = self.data["simulation"]
        return SimConfig(epsilon=s["epsilon"], small_jump_mode=s["small_jump_mode"],
                         t_max_factor=float(s["t_max_factor"]), C1=C1,
                         master_seed=int(s["master_seed"]), n_paths=int(s["n_paths"]))

    def ledger(self) -> ConstantLedger:
        k, p = self.data["kernel"], self.data["pipeline"]
        return build_ledger(int(k["d"]), float(k["c0"]), float(p["c1"]), float(p["c2"]),
                            float(p["c3"]), float(k["K0"]))

    @property
    def d(self) -> int:
        return int(self.data["kernel"]["d"])

    @property
    def r(self) -> float:
        return float(self.data["geometry"]["r"])

    @property
    def x0(self) -> tuple:
        x0 = self.data["geometry"]["x0"]
        return tuple([0.0] * self.d) if x0 is None else tuple(float(v) for v in x0)

    @property
    def seed(self) -> int:
        return int(self.data["simulation"]["master_seed"])

    @property
    def steps(self) -> list[str]:
        return list(self.data["pipeline"]["steps"])

    def payoff(self) -> HarmonicSpec:
        """The payoff of the Hoelder and oscillation experiments."""
        c = self.x0
        if self.data["geometry"]["payoff"] == "right-half":
            return HarmonicSpec.indicator(AnnularSector(c, self.r, math.inf, tuple([1.0] + [0.0] * (self.d - 1)), 0.0))
        return HarmonicSpec.indicator(AnnularSector(c, 2 * self.r, math.inf))

    def snapshot(self) -> dict:
        """JSON-safe copy of the merged configuration."""
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v
        return clean(copy.deepcopy(self.data))


def load_config(path) -> LabConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return LabConfig.from_dict(raw, str(path))


def list_presets() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("exitlab.presets").iterdir()
                  if p.name.endswith(".toml"))


def load_preset(name: str) -> LabConfig:
    res = resources.files("exitlab.presets") / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {list_presets()}")
    raw = tomllib.loads(res.read_text())
    return LabConfig.from_dict(raw, f"preset:{name}")
