"""Deterministic text rendering for logs, CSV and JSONL artifacts.

Every float that leaves the package goes through ``fmt6`` (fixed six
fractional digits) so that re-runs with the same seed produce byte-identical
files and exported values survive a parse/re-render round trip unchanged.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .errors import NumericError


def fmt6(x: float) -> str:
    """Render a float with exactly six fractional digits."""
    x = float(x)
    if not math.isfinite(x):
        raise NumericError(f"cannot render non-finite value {x!r}")
    return f"{x:.6f}"


def _render(obj: Any) -> str:
    if isinstance(obj, bool):  # bool is an int subclass; check first
        return "true" if obj else "false"
    if isinstance(obj, (np.floating, float)):
        return fmt6(float(obj))
    if isinstance(obj, (np.integer, int)):
        return str(int(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_render(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot render {type(obj).__name__} deterministically")


def jsonl_line(obj: dict) -> str:
    """One JSONL record with floats pinned to six fractional digits."""
    return _render(obj)


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(jsonl_line(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def config_hash(cfg: dict) -> str:
    """Stable hash of a JSON-serializable configuration mapping."""
    import hashlib

    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
