"""Small text formats: flat ``key=value`` files and numeric CSV tables."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError


def format_value(value) -> str:
    """Render a scalar so that parsing it back gives the identical value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def dump_kv(pairs: Mapping[str, object]) -> str:
    lines = []
    for key, value in pairs.items():
        if "=" in key or "\n" in key:
            raise ValidationError(f"illegal key {key!r}")
        lines.append(f"{key}={format_value(value)}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_kv(path: str | Path, pairs: Mapping[str, object]) -> None:
    Path(path).write_text(dump_kv(pairs), encoding="utf-8", newline="\n")


def read_kv(path: str | Path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def parse_float(text: str, name: str = "value") -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{name}: not a number: {text!r}") from None


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def write_table(path: str | Path, header: Sequence[str], columns: Iterable[np.ndarray]) -> None:
    """Write equal-length numeric columns as CSV with LF line endings."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV table; returns (header, 2-D array)."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise ValidationError(f"{path}: empty file")
        header = [h.strip() for h in header_line.strip().split(",")]
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
            rows.append([parse_float(p, f"{path}:{lineno}") for p in parts])
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: non-finite values")
    return header, data


def require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value
