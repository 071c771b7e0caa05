"""Deterministic JSON writing with 17-significant-digit floats.

The stdlib json module always prints floats with repr(); model files and
experiment reports instead pin every float to ``%.17g`` so that the on-disk
representation is stable and survives save/load/save byte-identically.
Output is valid JSON and is read back with ``json.loads``.
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["dumps", "loads"]


def _convert(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _write(obj, out, indent, level):
    obj = _convert(obj)
    pad = " " * (indent * level)
    inner = " " * (indent * (level + 1))
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        out.append(f"{obj:.17g}")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise ValueError(f"object keys must be strings, got {key!r}")
            out.append(inner + json.dumps(key) + ": ")
            _write(value, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        items = [_convert(v) for v in obj]
        if not items:
            out.append("[]")
            return
        # Flat numeric lists stay on one line; nested structures get newlines.
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in items):
            parts = []
            for v in items:
                if isinstance(v, float):
                    if not math.isfinite(v):
                        raise ValueError(f"cannot serialize non-finite float {v!r}")
                    parts.append(f"{v:.17g}")
                else:
                    parts.append(str(v))
            out.append("[" + ", ".join(parts) + "]")
        else:
            out.append("[\n")
            for i, value in enumerate(items):
                out.append(inner)
                _write(value, out, indent, level + 1)
                out.append(",\n" if i < len(items) - 1 else "\n")
            out.append(pad + "]")
    else:
        raise ValueError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Serialize obj to deterministic JSON text with %.17g floats."""
    out: list[str] = []
    _write(obj, out, indent, 0)
    return "".join(out) + "\n"


def loads(text: str):
    return json.loads(text)
