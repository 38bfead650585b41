"""Pipeline configuration: defaults, key=value config files, flag overrides.

Precedence, lowest to highest: built-in defaults, config file (path from
--config or the CCCPIPE_CONFIG environment variable), command-line flags.
The file format is one `key = value` pair per line with `#` comments.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

CONFIG_ENV_VAR = "CCCPIPE_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    dataset: str = "."
    models: str = "models"
    output: str = "out"
    tau: float = 0.15
    v_x: int = 140
    folds: int = 5
    seed: int = 0
    backend: str = "classical"
    threads: int = 1
    size: int = 224

    def __post_init__(self) -> None:
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not (0 <= self.v_x <= 255):
            raise ValueError(f"v_x must lie in [0, 255], got {self.v_x}")
        if self.folds < 2:
            raise ValueError(f"folds must be at least 2, got {self.folds}")
        if self.threads < 0:
            raise ValueError(f"threads must be >= 0 (0 = auto), got {self.threads}")
        if self.size < 1:
            raise ValueError(f"size must be positive, got {self.size}")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse `key = value` lines into an override dict. Raises ValueError."""
    overrides: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"{source}:{lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            overrides[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    return overrides


def load_config(path: str | Path | None = None, flag_overrides: dict | None = None,
                env: dict | None = None) -> PipelineConfig:
    """Defaults, then the config file (explicit path or env var), then flags."""
    env = os.environ if env is None else env
    chosen = path if path is not None else env.get(CONFIG_ENV_VAR)
    overrides: dict = {}
    if chosen:
        p = Path(chosen)
        overrides.update(parse_config_text(p.read_text(), source=str(p)))
    if flag_overrides:
        overrides.update({k: v for k, v in flag_overrides.items() if v is not None})
    return replace(PipelineConfig(), **overrides)
