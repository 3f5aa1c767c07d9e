"""Run configuration: defaults, key-value file loading, and a stable hash."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class Config:
    # family and domain
    b: float = 0.02
    r_max: float = 0.01
    cert_iters: int = 2000
    cert_tol: float = 1e-13
    x_max: float = 31.5
    y_max: float = 1e12
    delta: float = 0.05
    delta0: float = 0.24
    xi0: float = 2.0

    # log-polar grid and quadrature
    n_radial: int = 65
    n_angular: int = 33
    grid_stretch: float = 4.0
    k_explicit: int = 4
    panel_width: float = 2.0
    eps_tail: float = 1e-8
    disc_tol: float = 1e-3

    # pressure estimation and root finding
    steps: int = 2000
    burn_in: int = 50
    batches: int = 20
    tau_floor: float = 0.95
    tau_numerator: float = 1.05
    t_lo: float = 1.05
    t_hi: float = 2.0
    t_min: float = 1.02
    t_max: float = 4.0
    bracket_width: float = 1e-2
    root_tol: float = 5e-3
    polish_tol: float = 1e-5
    max_polish: int = 12
    complex_law: bool = True
    seed_policy: str = "per-cell"
    workers: int = 1

    # oracle
    oracle_depth: int = 12
    node_budget: int = 100_000_000
    oracle_rel_tol: float = 1e-4
    oracle_t: float = 1.5
    oracle_tau: float = 0.9
    oracle_nx: int = 32
    oracle_ny: int = 161
    oracle_k_explicit: int = 12
    oracle_root_tol: float = 1e-3

    # audit
    audit_t: float = 1.5
    audit_tau: float = 0.9
    audit_samples: int = 10_000
    audit_steps: int = 2000
    decay_steps: int = 500
    expansion_depth: int = 10
    param_diameter: float = 1e-3
    n_probe: int = 8
    kappa_max: float = 0.95
    m_cap: float = 1e6
    decay_eps: float = 0.01
    theta_r2: float = 0.9

    # julia sets
    julia_t: float = 1.5
    julia_eps_tail: float = 1e-3
    julia_points: int = 20_000
    julia_depth: int = 25
    window: tuple = (1.0, 7.0, -3.0, 3.0)
    resolution: tuple = (480, 480)

    def __post_init__(self):
        if not 0 < self.delta <= self.delta0 < 0.25:
            raise ConfigError("need 0 < delta <= delta0 < 1/4")
        if self.n_angular % 2 == 0:
            raise ConfigError("n_angular must be odd so that arg z = 0 is a node")
        if self.batches < 20:
            raise ConfigError("batch means need at least 20 batches")
        if self.seed_policy not in ("per-cell", "shared"):
            raise ConfigError(f"unknown seed_policy {self.seed_policy!r}")
        if self.k_explicit < 1 or self.n_radial < 8:
            raise ConfigError("grid too coarse")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def tau_for(self, t: float) -> float:
        return max(self.tau_floor, self.tau_numerator / t)


DEFAULT = Config()

_TYPES = {f.name: f.type for f in fields(Config)}


def _coerce(name: str, raw: Any) -> Any:
    if name not in _TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    default = getattr(DEFAULT, name)
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(default, tuple) else type(default)(raw)
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return low in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [p for p in text.replace(",", " ").split() if p]
            return tuple(type(default[0])(float(p)) for p in parts)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def load_file(path: str | Path) -> dict[str, Any]:
    """Read ``key = value`` lines; an optional ``[section]`` header is ignored."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    out: dict[str, Any] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            out[key.replace("-", "_")] = value
    return out


def build(file_values: Mapping[str, Any] | None = None,
          overrides: Mapping[str, Any] | None = None) -> Config:
    """Defaults < file values < explicit overrides (None values are skipped)."""
    merged: dict[str, Any] = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            merged[key] = _coerce(key, value)
    try:
        return DEFAULT.replace(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
