"""Serialising estimator results: JSON records, CSV tables and plain-text reports.

Every emitted document carries the tool version, the seed and a hash of the
table specification. Nothing time- or host-dependent is written, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math

import numpy as np

from . import __version__
from .geometry import BilliardTable, table_to_spec

__all__ = ["table_hash", "header", "to_jsonable", "dump_json", "dump_csv", "dump_text"]


def table_hash(table: BilliardTable | None) -> str | None:
    if table is None:
        return None
    text = json.dumps(table_to_spec(table), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def header(command: str, table=None, seed=None, params=None) -> dict:
    return {
        "tool": "sinai-billiard",
        "version": __version__,
        "command": command,
        "seed": seed,
        "table": table_to_spec(table) if table is not None else None,
        "table_sha256": table_hash(table),
        "params": params or {},
    }


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return to_jsonable(obj.to_dict())
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def dump_json(record: dict) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True, indent=2) + "\n"


def dump_csv(head: dict, columns, rows) -> str:
    """CSV with ``# key: value`` provenance lines ahead of the column header."""
    buf = io.StringIO()
    for key in ("tool", "version", "command", "seed", "table_sha256"):
        buf.write(f"# {key}: {head.get(key)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def dump_text(head: dict, lines) -> str:
    out = [f"{k}: {head.get(k)}" for k in ("tool", "version", "command", "seed", "table_sha256")]
    out.append("")
    out.extend(lines)
    return "\n".join(out) + "\n"
