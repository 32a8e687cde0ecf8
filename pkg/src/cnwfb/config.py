"""Run configuration: flat ``key = value`` files, command-line flags, validation."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .scenarios import SCENARIOS


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "standing-wave-1d"
    scheme: str = "cn"
    h: float = 1e-3
    dx: float | None = None
    nx: int = 32
    ny: int = 32
    T: float = 1.0
    cutoff: bool = False
    Q: float = 0.0
    adhesion_eps: float = 0.05
    fb_eps: float | None = None
    out: str = "out"
    snapshot_stride: int = 0
    n: int = 1
    linear_tol: float = 1e-12
    descent_tol: float = 1e-10
    max_iters: int = 10000
    jobs: int = 1
    dump_mesh: bool = False
    sweep_h: tuple[float, ...] = ()
    sweep_n: tuple[int, ...] = ()
    sweep_scheme: tuple[str, ...] = ()
    explicit: frozenset = field(default=frozenset(), compare=False)

    @property
    def is_sweep(self) -> bool:
        return bool(self.sweep_h or self.sweep_n or self.sweep_scheme)

    @property
    def mesh_dx(self) -> float:
        """Element width for 1D runs; follows ``h`` unless ``dx`` was given."""
        return self.h if self.dx is None else self.dx

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


FLOAT_KEYS = {"h", "dx", "T", "Q", "adhesion_eps", "fb_eps", "linear_tol", "descent_tol"}
INT_KEYS = {"nx", "ny", "snapshot_stride", "n", "max_iters", "jobs"}
BOOL_KEYS = {"cutoff", "dump_mesh"}
STR_KEYS = {"scenario", "scheme", "out"}
LIST_KEYS = {"sweep_h": float, "sweep_n": int, "sweep_scheme": str}
KNOWN = FLOAT_KEYS | INT_KEYS | BOOL_KEYS | STR_KEYS | set(LIST_KEYS)

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


def normalize_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    if key in KNOWN:
        return key
    # tolerate lower-case spellings of the one-letter physics keys
    alias = {"t": "T", "q": "Q"}.get(key)
    if alias:
        return alias
    raise ConfigError(f"{key}: unknown configuration key")


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[normalize_key(key)] = value.strip()
    return values


def _convert(key: str, value):
    if value is None:
        return None
    if key in LIST_KEYS:
        if isinstance(value, str):
            items = [v.strip() for v in value.split(",") if v.strip()]
        else:
            items = list(value)
        if not items:
            raise ConfigError(f"{key}: empty list")
        try:
            return tuple(LIST_KEYS[key](v) for v in items)
        except ValueError:
            raise ConfigError(f"{key}: expected a comma-separated list, got {value!r}") from None
    if not isinstance(value, str):
        return value
    if key in FLOAT_KEYS:
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if key in INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if key in BOOL_KEYS:
        v = value.strip().lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise ConfigError(f"{key}: expected on/off, got {value!r}")
    return value.strip()


def build_config(values: dict) -> RunConfig:
    """Typed, validated config from raw values layered over scenario defaults."""
    typed = {normalize_key(k): _convert(normalize_key(k), v) for k, v in values.items()}
    scenario = typed.get("scenario", RunConfig.scenario)
    if scenario not in SCENARIOS:
        raise ConfigError(
            f"scenario: unknown scenario {scenario!r} (choose from {', '.join(SCENARIOS)})"
        )
    merged = dict(SCENARIOS[scenario].defaults)
    merged.update({k: v for k, v in typed.items() if v is not None})
    if "out" not in typed:
        merged["out"] = os.environ.get("CNWFB_OUT", RunConfig.out)
    merged = {k: _convert(k, v) for k, v in merged.items() if k in KNOWN}
    cfg = RunConfig(**merged, explicit=frozenset(typed))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.scheme not in ("cn", "dmf"):
        raise ConfigError(f"scheme: expected cn or dmf, got {cfg.scheme!r}")
    for key in ("h", "T", "linear_tol", "descent_tol"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key}: must be positive, got {getattr(cfg, key)}")
    for key in ("dx", "fb_eps"):
        v = getattr(cfg, key)
        if v is not None and not v > 0:
            raise ConfigError(f"{key}: must be positive, got {v}")
    for key in ("nx", "ny", "n", "max_iters", "jobs"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key}: must be at least 1, got {getattr(cfg, key)}")
    if cfg.snapshot_stride < 0:
        raise ConfigError(f"snapshot_stride: must be nonnegative, got {cfg.snapshot_stride}")
    if cfg.Q < 0:
        raise ConfigError(f"Q: must be nonnegative, got {cfg.Q}")
    if not cfg.adhesion_eps > 0:
        raise ConfigError(f"adhesion_eps: must be positive, got {cfg.adhesion_eps}")
    for h in cfg.sweep_h:
        if not h > 0:
            raise ConfigError(f"sweep_h: values must be positive, got {h}")
    for n in cfg.sweep_n:
        if n < 1:
            raise ConfigError(f"sweep_n: values must be at least 1, got {n}")
    for s in cfg.sweep_scheme:
        if s not in ("cn", "dmf"):
            raise ConfigError(f"sweep_scheme: expected cn or dmf, got {s!r}")
    if cfg.sweep_n and cfg.scenario != "standing-wave-1d":
        raise ConfigError("sweep_n: frequency sweeps need scenario standing-wave-1d")
    if cfg.is_sweep and SCENARIOS[cfg.scenario].droplets:
        raise ConfigError("scenario: the droplets scenario does not support sweeps")


def config_fields() -> list[str]:
    return [f.name for f in fields(RunConfig) if f.name != "explicit"]
