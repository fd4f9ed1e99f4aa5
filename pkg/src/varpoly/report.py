"""Deterministic JSON reports: sorted keys, every float written as %.12e."""

from __future__ import annotations

import json
import math

import numpy as np

from .polyhedral import ConeRep, PolytopeRep


def to_plain(obj):
    """Convert arrays, cones and polytopes into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, ConeRep):
        return {"dim": obj.dim,
                "generators": to_plain(obj.generators) if obj.generators is not None else None,
                "halfspaces": to_plain(obj.halfspaces) if obj.halfspaces is not None else None}
    if isinstance(obj, PolytopeRep):
        return {"points": to_plain(obj.points), "rays": to_plain(obj.rays)}
    return obj


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        # negative zero prints as zero so identical runs stay byte-identical
        return "%.12e" % (obj + 0.0)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _emit(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [pad + json.dumps(k) + ": " + _emit(obj[k], indent, level + 1) for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc) -> str:
    return _emit(to_plain(doc), 2, 0) + "\n"


def report(command: str, inputs: dict, verdicts: dict, certificates: dict | None = None,
           tables: dict | None = None, provenance: dict | None = None, status: int = 0) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "verdicts": verdicts,
        "certificates": certificates or {},
        "tables": tables or {},
        "provenance": provenance or {},
        "status": status,
    }
