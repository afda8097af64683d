"""TOML pipeline configuration.

Configs are plain nested tables; command-line flags override any scalar.
Seeds must come from the config or a flag, never from the clock, so every
run is replayable.
"""

from __future__ import annotations

import sys
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from webtopic.errors import InputError


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"bad TOML in {path}: {exc}") from exc


def cget(cfg: dict, dotted: str, default: Any = None) -> Any:
    """Fetch cfg["a"]["b"] via "a.b", returning default when absent."""
    node: Any = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def require(value: Any, what: str) -> Any:
    if value is None:
        raise InputError(f"{what} is required (set it in the config or pass the flag)")
    return value
