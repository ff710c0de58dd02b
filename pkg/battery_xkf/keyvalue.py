from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from battery_xkf.errors import InputError

if TYPE_CHECKING:
    from collections.abc import Mapping


def read_key_values(path: str | Path) -> dict[str, str]:
    """Read a flat ``key=value`` file; ``#`` starts a comment line."""
    result: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InputError(f"{path}: line {number}: expected key=value, got {raw!r}")
        if key in result:
            raise InputError(f"{path}: line {number}: duplicate key {key!r}")
        result[key] = value.strip()
    return result


def write_key_values(values: Mapping[str, object], path: str | Path) -> None:
    lines = [f"{key}={format_value(value)}" for key, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_value(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(item) for item in value)
    if value is None:
        return ""
    return str(value)


def parse_float(values: Mapping[str, str], key: str) -> float:
    try:
        return float(values[key])
    except ValueError:
        raise InputError(f"Expected a number for {key!r}, got {values[key]!r}") from None


def parse_floats(values: Mapping[str, str], key: str) -> tuple[float, ...]:
    try:
        return tuple(float(item) for item in values[key].split(","))
    except ValueError:
        raise InputError(
            f"Expected comma-separated numbers for {key!r}, got {values[key]!r}"
        ) from None
