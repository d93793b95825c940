"""
Run configuration: a frozen dataclass read from a flat ``key = value`` file.

Example (config/verify.conf):

  n = 1
  k = 1
  t = 0.1
  seed = 42     # fixed seed -> byte-identical report

Every key can be overridden on the command line by the flag of the same name.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .errors import ConfigError, ParseError

logger = logging.getLogger(__name__)

CONVENTIONS = ("thm410", "prop44")


@dataclass(frozen=True)
class RunConfig:
    n: int = 1
    k: int = 1
    t: float = 0.1
    grid: int = 32
    radius: float = 6.0
    tol: float = 1.0e-12
    seed: int = 42
    out: Optional[str] = None
    convention: str = "thm410"
    workers: int = 4
    lambda_nodes: int = 2048
    timings: bool = False

    def validate(self) -> "RunConfig":
        if self.n not in (1, 2):
            raise ConfigError("n", f"dimension must be 1 or 2, got {self.n}")
        if self.k < 1:
            raise ConfigError("k", f"sector index must be a positive integer, got {self.k}")
        if not self.t > 0:
            raise ConfigError("t", f"time must be positive, got {self.t}")
        if self.grid < 2:
            raise ConfigError("grid", f"points per unit length must be at least 2, got {self.grid}")
        if not self.radius > 0:
            raise ConfigError("radius", f"truncation radius must be positive, got {self.radius}")
        if not self.tol > 0:
            raise ConfigError("tol", f"tolerance must be positive, got {self.tol}")
        if self.convention not in CONVENTIONS:
            raise ConfigError("convention", f"expected one of {', '.join(CONVENTIONS)}, got {self.convention!r}")
        if self.workers < 1:
            raise ConfigError("workers", f"worker count must be positive, got {self.workers}")
        if self.lambda_nodes < 16:
            raise ConfigError("lambda_nodes", f"need at least 16 lambda nodes, got {self.lambda_nodes}")
        return self

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Apply overrides whose value is not None; string values are coerced."""
        known = {f.name: f for f in fields(self)}
        changes: Dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            changes[key] = _coerce(key, value) if isinstance(value, str) else value
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _coerce(key: str, raw: str) -> Any:
    kind = {f.name: f.type for f in fields(RunConfig)}[key]
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "Optional[str]":
            return text or None
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from None


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(lineno, f"expected 'key = value', got {body!r}", path)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in known:
            raise ConfigError(key, f"unknown configuration key (line {lineno})")
        values[key] = _coerce(key, raw)
    return replace(RunConfig(), **values)


def load_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError("config", f"file not found: {p}")
    cfg = parse_config(p.read_text(encoding="utf-8"), str(p))
    logger.debug("loaded %s: %s", p, cfg)
    return cfg
