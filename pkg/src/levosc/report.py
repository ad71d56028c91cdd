"""Byte-stable text and CSV emission, plus readers for the same formats.

Numbers are written in scientific notation with 6 significant digits
(``1.41421e-14``) independent of locale, so reruns with the same inputs give
identical files.  Every file starts with ``# key=value`` provenance lines.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__

_SUPERSCRIPT = str.maketrans("-0123456789", "⁻⁰¹²³⁴⁵⁶⁷⁸⁹")


def fmt(value) -> str:
    """Canonical text for one value (6 significant digits for floats)."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.5e}"
    if value is None:
        return ""
    return str(value)


def format_power10(value: float, sig: int = 2) -> str:
    """Human display like ``2.0×10⁷`` with ``sig`` significant digits."""
    if value == 0 or not math.isfinite(value):
        return fmt(value)
    mant, exp = f"{value:.{sig - 1}e}".split("e")
    return f"{mant}×10{str(int(exp)).translate(_SUPERSCRIPT)}"


def provenance(config_digest: str | None, seed, **extra) -> list[tuple[str, str]]:
    items = [("tool", f"levosc {__version__}"), ("config_digest", config_digest or "none"),
             ("seed", "none" if seed is None else str(seed))]
    items += [(k, fmt(v)) for k, v in extra.items()]
    return items


def _header_text(header: Iterable[tuple[str, str]]) -> str:
    return "".join(f"# {k}={v}\n" for k, v in header)


def write_kv(path, header, items: Mapping | Sequence[tuple[str, object]]) -> str:
    """Write a ``key=value`` report; returns the text."""
    pairs = items.items() if isinstance(items, Mapping) else items
    text = _header_text(header) + "".join(f"{k}={fmt(v)}\n" for k, v in pairs)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_kv(path) -> tuple[dict, dict]:
    """Inverse of :func:`write_kv`: (header, values) with values as strings."""
    header, values = {}, {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        target = header if line.startswith("#") else values
        key, _, val = line.lstrip("#").strip().partition("=")
        target[key] = val
    return header, values


def write_table(path, header, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [_header_text(header), ",".join(columns) + "\n"]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
        lines.append(",".join(fmt(v) for v in row) + "\n")
    text = "".join(lines)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _column(cells: list[str]):
    try:
        return np.array([int(c) for c in cells], dtype=np.int64)
    except ValueError:
        pass
    try:
        return np.array([float(c) if c != "" else np.nan for c in cells])
    except ValueError:
        return np.array(cells, dtype=object)


def read_table(path) -> tuple[dict, dict]:
    """Read a table written by :func:`write_table`.

    Returns ``(header, columns)``; integer columns come back as int64 arrays,
    other numeric columns as float arrays (empty cells as NaN), anything else
    as object arrays of strings.
    """
    header: dict[str, str] = {}
    names = None
    cells: list[list[str]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key] = val
            continue
        parts = line.split(",")
        if names is None:
            names = parts
            cells = [[] for _ in names]
            continue
        if len(parts) != len(names):
            raise ValueError(f"line {lineno}: expected {len(names)} cells, got {len(parts)}")
        for col, c in zip(cells, parts):
            col.append(c)
    if names is None:
        raise ValueError(f"{path}: no column header")
    return header, {n: _column(c) for n, c in zip(names, cells)}
