"""CSV / JSON artifacts.  Every file starts with the config hash."""

from __future__ import annotations

import json
import math
import os
from typing import Iterable, Sequence

import numpy as np

from .variational import Kind, SolutionField

HASH_PREFIX = "# config_sha256="


def fmt(value) -> str:
    if isinstance(value, (str, Kind)):
        return value.value if isinstance(value, Kind) else value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    return format(float(value) + 0.0, ".17g")     # + 0.0 turns -0 into 0


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence], sha: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{HASH_PREFIX}{sha}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _clean(obj):
    # JSON has no inf/nan; write them as null
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, Kind):
        return obj.value
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: str, payload: dict, sha: str, resolved: dict) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    body = {"config_sha256": sha, "config": resolved, **payload}
    with open(path, "w") as fh:
        # the first line carries the hash too, as for the CSV files
        fh.write(f"{HASH_PREFIX}{sha}\n")
        json.dump(_clean(body), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def read_json(path: str) -> dict:
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = "\n".join(ln for ln in lines if not ln.startswith("#"))
    return json.loads(body)


def field_rows(fld: SolutionField):
    return list(fld.rows())


FIELD_HEADER = ("x", "u", "w", "y_star", "kind")


def read_field_csv(path: str, t: float) -> SolutionField:
    """Load a ``x,u,w,y_star,kind`` table written by the ``solve`` command."""
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].split(",")[:4] != list(FIELD_HEADER[:4]):
        raise ValueError(f"{path}: expected header {','.join(FIELD_HEADER)}")
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) < 4:
            raise ValueError(f"{path}: short row {ln!r}")
        rows.append((*map(float, parts[:4]), parts[4] if len(parts) > 4 else ""))
    if not rows:
        raise ValueError(f"{path}: no rows")
    x, u, w, ys, kinds = zip(*rows)
    kinds = [Kind(k) for k in kinds] if all(kinds) else []
    return SolutionField(np.array(x), float(t), np.array(u), np.array(w), np.array(ys), kinds)
