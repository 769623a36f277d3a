"""Flat ``key = value`` experiment configuration with a typed schema.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Unknown keys, malformed values and parameter combinations that violate an
operation's preconditions raise :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

KINDS = ("clt", "chaos-convergence", "multifractal", "coupling", "analytics", "dickman-table")
FAMILIES = ("two_squares", "divisor", "big_omega", "small_omega")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "analytics"
    family: str = "two_squares"
    theta: float = 0.5
    # partial sums
    x: float = 1e5
    y_exponent: float = 0.2
    r: float = 1.0
    eps: float = 0.2
    delta: float = 0.3
    q_list: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    phi_breakpoints: tuple[float, ...] = (0.0, 1.0)
    phi_values: tuple[float, ...] = (1.0,)
    grid_lo: float = -40.0
    grid_hi: float = 40.0
    grid_spacing: float = 0.01
    # chaos measures
    y: float = 20.0
    t: float = math.inf
    y_list: tuple[float, ...] = (20.0, 50.0, 150.0, 400.0)
    ycap_exponent: float = 3.0
    interval_lo: float = 0.0
    interval_hi: float = 1.0
    chaos_spacing: float = 0.0  # 0 selects 1/(4 log y)
    K: float = 1.0
    eps_list: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    q_prime: float = 1.3
    # coupling
    a_list: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)
    n_samples: int = 100_000
    # Dickman tabulation
    t_max: float = 10.0
    h: float = 1e-3
    # orchestration
    n_mc: int = 2000
    table_limit: int = 1_000_000
    seed: int = 2024
    workers: int = 1
    batch: int = 50
    out_dir: str = "results"

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and math.isinf(v):
                v = "inf"
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def with_overrides(self, **kw) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **kw)
        validate(cfg)
        return cfg


_TYPES = typing.get_type_hints(ExperimentConfig)


def _parse_float(raw: str) -> float:
    s = raw.strip().lower()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    return float(s)


def _parse_int(raw: str) -> int:
    s = raw.strip().replace("_", "")
    v = float(s) if ("e" in s.lower() or "." in s) else int(s)
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError(f"{raw!r} is not an integer")
        v = int(v)
    return v


def _coerce(key: str, raw: str):
    tp = _TYPES[key]
    try:
        if tp is float:
            return _parse_float(raw)
        if tp is int:
            return _parse_int(raw)
        if tp is str:
            return raw.strip()
        if typing.get_origin(tp) is tuple:
            items = [p for p in raw.split(",") if p.strip()]
            return tuple(_parse_float(p) for p in items)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
    raise ConfigError(f"{key}: unsupported type {tp}")


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    cfg = dataclasses.replace(base or ExperimentConfig(), **values)
    validate(cfg)
    return cfg


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base)


def validate(cfg: ExperimentConfig) -> None:
    """Reject parameter values that break a downstream precondition."""
    if cfg.experiment not in KINDS:
        raise ConfigError(f"experiment: unknown kind {cfg.experiment!r}; expected one of {KINDS}")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"family: unknown family {cfg.family!r}; expected one of {FAMILIES}")
    if not 0.0 < cfg.theta < 1.0:
        raise ConfigError(f"theta: must lie in (0, 1), got {cfg.theta}")
    if cfg.family == "two_squares" and cfg.theta != 0.5:
        raise ConfigError("theta: the two_squares family has theta = 0.5")
    if not (0.0 < cfg.eps < 1.0 and 0.0 < cfg.delta < 1.0):
        raise ConfigError("eps, delta: must lie in (0, 1)")
    if cfg.eps + cfg.delta >= 1.0:
        raise ConfigError(f"eps + delta: must be < 1, got {cfg.eps + cfg.delta}")
    if cfg.n_mc < 2 or cfg.n_samples < 2:
        raise ConfigError("n_mc, n_samples: need at least 2 replicates")
    if cfg.workers < 1 or cfg.batch < 1:
        raise ConfigError("workers, batch: must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")
    if cfg.r <= 0:
        raise ConfigError("r: must be > 0")
    if cfg.K <= 0:
        raise ConfigError("K: must be > 0")
    if len(cfg.phi_values) != len(cfg.phi_breakpoints) - 1 or cfg.phi_breakpoints[0] != 0.0:
        raise ConfigError("phi_breakpoints, phi_values: need breakpoints 0 = b0 < ... and one value per piece")
    if any(b >= c for b, c in zip(cfg.phi_breakpoints, cfg.phi_breakpoints[1:])):
        raise ConfigError("phi_breakpoints: must increase strictly")

    if cfg.experiment == "clt":
        if any(not 0.0 <= q <= 1.0 for q in cfg.q_list):
            raise ConfigError(f"q_list: moments need 0 <= q <= 1, got {cfg.q_list}")
        y = cfg.x**cfg.y_exponent
        if y < 2:
            raise ConfigError(f"y_exponent: x^a = {y} must be >= 2")
        _check_spacing("grid_spacing", cfg.grid_spacing, y)
        if abs(cfg.grid_lo + cfg.grid_hi) > 1e-12 or cfg.grid_hi <= 0:
            raise ConfigError("grid_lo, grid_hi: grid must be symmetric about 0")
        from .sums import StepWeight, mellin_tail_weight

        tail = mellin_tail_weight(StepWeight(cfg.phi_breakpoints, cfg.phi_values), cfg.grid_hi)
        if tail > 1e-2:
            raise ConfigError(f"grid_hi: Mellin weight {tail:.3g} beyond |s| > {cfg.grid_hi} exceeds 1e-2; widen the grid")
        if cfg.phi_breakpoints[-1] * cfg.x > cfg.table_limit:
            raise ConfigError("x: A*x exceeds table_limit")
    if cfg.experiment == "chaos-convergence":
        if not cfg.y_list or min(cfg.y_list) < 3:
            raise ConfigError("y_list: need sweep points >= 3")
        if cfg.ycap_exponent < 2:
            raise ConfigError("ycap_exponent: must be >= 2")
        for y in cfg.y_list:
            _check_spacing("chaos_spacing", cfg.chaos_spacing, y)
        if cfg.interval_hi <= cfg.interval_lo:
            raise ConfigError("interval_lo, interval_hi: empty interval")
    if cfg.experiment == "multifractal":
        if cfg.y < 3:
            raise ConfigError("y: must be >= 3")
        _check_spacing("chaos_spacing", cfg.chaos_spacing, cfg.y)
        if cfg.q_prime <= 1.0:
            raise ConfigError("q_prime: must exceed 1")
        if any(q < 0 for q in cfg.q_list):
            raise ConfigError("q_list: moments need q >= 0")
        if any(e <= 0 for e in cfg.eps_list):
            raise ConfigError("eps_list: must be positive")
    if cfg.experiment == "coupling":
        if any(abs(a) > 4.0 for a in cfg.a_list):
            raise ConfigError("a_list: |a| must be <= 4")
    if cfg.experiment == "dickman-table":
        if cfg.t_max < 1:
            raise ConfigError("t_max: must be >= 1")
        if cfg.h > 1e-3:
            raise ConfigError("h: must be <= 1e-3")


def _check_spacing(key: str, spacing: float, y: float) -> None:
    if spacing < 0:
        raise ConfigError(f"{key}: must be >= 0")
    limit = 1.0 / (2.0 * math.log(y))
    if spacing > limit:
        raise ConfigError(f"{key}: {spacing} is coarser than 1/(2 log y) = {limit:.4g} at y = {y:g}")
