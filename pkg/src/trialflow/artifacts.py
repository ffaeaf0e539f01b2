"""Deterministic serialization for files the pipeline writes.

Two rules make reruns byte-identical: every artifact opens with '#'
metadata lines carrying the tool version, seed, and parameters (never a
timestamp), and all JSON is rendered canonically (sorted keys, floats
through %.6g, explicit nulls, finite values only).
"""
from __future__ import annotations

import json
from typing import Any, Mapping

from .errors import NonFiniteError

TOOL_VERSION = "0.1.0"


def artifact_header(kind: str, seed: int | None = None,
                    params: Mapping[str, Any] | None = None) -> str:
    """Comment block stamped at the top of CSV artifacts."""
    lines = [f"# trialflow {kind} v{TOOL_VERSION}"]
    if seed is not None:
        lines.append(f"# seed={seed}")
    for key in sorted(params or {}):
        lines.append(f"# {key}={params[key]}")
    return "\n".join(lines) + "\n"


def _format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise NonFiniteError(f"non-finite value {x!r} in JSON payload")
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return "%.6g" % x


def _ser(obj: Any) -> str:
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, bool):  # pragma: no cover - handled above
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, Mapping):
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            items.append(f"{json.dumps(key, ensure_ascii=False)}:{_ser(obj[key])}")
        return "{" + ",".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_ser(v) for v in obj) + "]"
    if hasattr(obj, "tolist"):  # numpy scalar or array
        return _ser(obj.tolist())
    raise TypeError(f"cannot canonically serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Render obj as deterministic JSON text.

    Keys sorted, floats through %.6g (integral floats as integers),
    non-finite values rejected, numpy scalars and arrays unwrapped.
    """
    return _ser(obj)


def write_json_artifact(path, payload: Mapping[str, Any], *, kind: str,
                        seed: int | None = None,
                        params: Mapping[str, Any] | None = None) -> None:
    """JSON artifact with metadata folded into a `_meta` key."""
    meta: dict[str, Any] = {"tool": f"trialflow {kind}", "version": TOOL_VERSION}
    if seed is not None:
        meta["seed"] = seed
    if params:
        meta["params"] = dict(params)
    body = dict(payload)
    body["_meta"] = meta
    with open(path, "w") as fh:
        fh.write(canonical_json(body))
        fh.write("\n")
