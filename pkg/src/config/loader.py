"""
Plain-text key-value configuration files.

Format:
    # comment
    t_delta = 2.35
    channel.name = wifi4
    enhancer.kind = emulated

Dotted keys address nested models. Values stay strings (``none``/``null``
become None); pydantic coerces them when the config is validated.
"""
import logging
from pathlib import Path
from typing import Any, Iterable

from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

NULL_TOKENS = {"none", "null", ""}


def parse_value(raw: str) -> Any:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    if value.lower() in NULL_TOKENS:
        return None
    return value


def set_dotted(target: dict, key: str, value: Any) -> None:
    """
    Assign value at a dotted key path, creating intermediate dicts.

    A scalar and a nested section under the same name combine as
    ``{"preset": scalar, ...}`` so ``channel = wifi4`` and
    ``channel.jitter_ms = 0`` can appear together in either order.

    Raises:
        ConfigError: If a path segment is empty
    """
    parts = key.split(".")
    if any(not p.strip() for p in parts):
        raise ConfigError(f"Malformed key: {key!r}")
    node = target
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        elif not isinstance(child, dict):
            child = node[part] = {"preset": child}
        node = child
    leaf = parts[-1]
    if isinstance(node.get(leaf), dict) and not isinstance(value, dict):
        node[leaf]["preset"] = value
    else:
        node[leaf] = value


def parse_lines(lines: Iterable[str], source: str = "<string>") -> dict:
    """Parse key-value lines into a nested dict."""
    result: dict = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, raw = stripped.split("=", 1)
        set_dotted(result, key.strip(), parse_value(raw))
    return result


def load_config_file(path: str | Path) -> dict:
    """
    Read a key-value config file.

    Args:
        path: File to read

    Returns:
        Nested dict of raw values
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"Cannot read config file {path}: {e.strerror}") from e
    data = parse_lines(text.splitlines(), source=str(path))
    logger.debug(f"Loaded {len(data)} top-level keys from {path}")
    return data


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply ``key=value`` overrides (from ``--set``) on top of data."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        set_dotted(data, key.strip(), parse_value(raw))
    return data


def merge(base: dict, extra: dict) -> dict:
    """Deep-merge extra into a copy of base."""
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out
