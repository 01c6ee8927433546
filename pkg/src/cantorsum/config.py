"""Experiment configuration: YAML file, then command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    first: Any = "cantor:4"  # preset name or a mapping with maps / domain / name
    second: Any = "cantor:5"
    lam: float = 1.0
    lam_lo: float = -2.0
    lam_hi: float = 2.0
    lam_n: int = 4001
    rhos: list = field(default_factory=lambda: [2.0 ** -k for k in range(7, 17)])
    rho: float = 0.05
    eta: float = 0.1
    A: float = 2.0
    delta: float = 0.0  # C1 size of the perturbation pair
    C0: float = 1.0
    depth: int = 2
    dim_depth: int | None = None
    k_max: int = 60
    limit_tol: float = 1e-10
    tail: str = "(1)"
    q_max: int = 1_000_000
    rational_tol: float = 1e-12
    nonlinearity_depth: int = 6
    c_branch: float = 0.25
    tail_len: int = 1
    dim_tol: float = 0.05
    tree_rho: float = 0.02
    tree_eta: float = 0.02
    tree_depth: int = 2
    out: str = "out"
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        if not self.rhos or any(not 0 < r < 1 for r in self.rhos):
            raise ConfigError("rhos must be a nonempty list of scales in (0, 1)")
        for name in ("rho", "tree_rho"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        for name in ("eta", "tree_eta", "A", "k_max", "lam_n", "q_max", "rational_tol",
                     "limit_tol", "dim_tol", "c_branch", "tail_len"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.lam_n < 2 or not self.lam_hi > self.lam_lo:
            raise ConfigError("lambda grid needs lam_hi > lam_lo and at least 2 points")
        for name in ("depth", "tree_depth", "nonlinearity_depth"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not abs(self.delta) < 1:
            raise ConfigError("delta must satisfy |delta| < 1")
        return self


def _coerce(name: str, value: Any) -> Any:
    if name == "rhos" and isinstance(value, dict):
        lo, hi = value.get("dyadic", (None, None))
        if lo is None:
            raise ConfigError("rhos mapping must be {dyadic: [first, last]}")
        return [2.0 ** -k for k in range(int(lo), int(hi) + 1)]
    if name == "rhos":
        return [float(r) for r in value]
    return value


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Defaults, then the YAML file, then non-None keyword overrides."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    data: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data.update(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})
        # numeric fields may arrive as strings from YAML (e.g. 1e-10)
        for f in dataclasses.fields(cfg):
            val = getattr(cfg, f.name)
            default = getattr(ExperimentConfig(), f.name)
            if isinstance(default, float) and isinstance(val, (str, int)):
                setattr(cfg, f.name, float(val))
            elif isinstance(default, int) and not isinstance(default, bool) and isinstance(val, (str, float)):
                setattr(cfg, f.name, int(val))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()
