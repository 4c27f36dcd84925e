"""JSON document format for MDPs.

A document is an object with ``num_states``, ``num_actions``,
``transitions`` (nested ``[S][A][S]`` array) and ``rewards`` (``[S][A]``).
Floats are written with ``repr`` precision, so load(save(m)) == m bit-exactly.
Unknown top-level keys are ignored on load (the empirical-model sidecar uses
this to attach ``counts``).
"""
from __future__ import annotations

import json
import numbers
import os
from pathlib import Path

import numpy as np

from .errors import ParseError
from .mdp import Mdp

REQUIRED = ("num_states", "num_actions", "transitions", "rewards")


def mdp_to_document(m: Mdp) -> dict:
    return {
        "num_states": m.num_states,
        "num_actions": m.num_actions,
        "transitions": m.transitions.tolist(),
        "rewards": m.rewards.tolist(),
    }


def dumps_document(doc: dict) -> bytes:
    # one (s, a) row per line keeps documents diffable
    lines = ["{"]
    keys = list(doc)
    for i, key in enumerate(keys):
        value = doc[key]
        end = "," if i < len(keys) - 1 else ""
        if key in ("transitions", "counts") and isinstance(value, list):
            rows = []
            for block in value:
                inner = ",\n    ".join(json.dumps(row) for row in block)
                rows.append("   [\n    " + inner + "\n   ]")
            lines.append(f' {json.dumps(key)}: [\n' + ",\n".join(rows) + f"\n ]{end}")
        elif key == "rewards" and isinstance(value, list):
            inner = ",\n  ".join(json.dumps(row) for row in value)
            lines.append(f' {json.dumps(key)}: [\n  ' + inner + f"\n ]{end}")
        else:
            lines.append(f" {json.dumps(key)}: {json.dumps(value)}{end}")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def codec_save(m: Mdp) -> bytes:
    return dumps_document(mdp_to_document(m))


def save_mdp(m: Mdp, path) -> None:
    Path(path).write_bytes(codec_save(m))


def _read_source(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, os.PathLike):
        return Path(source).read_text()
    if isinstance(source, str):
        if source.lstrip().startswith("{"):
            return source
        return Path(source).read_text()
    raise TypeError(f"cannot load an MDP from {type(source).__name__}")


def _is_number(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool)


def _int_field(doc, key) -> int:
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ParseError(f"{key} must be a positive integer", key)
    return value


def _array(value, shape, where):
    """Check a nested list against ``shape`` and return a float array."""
    if len(shape) == 0:
        if not _is_number(value):
            raise ParseError(f"expected a number, got {type(value).__name__}", where)
        return
    if not isinstance(value, list):
        raise ParseError("expected an array", where)
    if len(value) != shape[0]:
        raise ParseError(f"expected {shape[0]} entries, got {len(value)}", where)
    for i, item in enumerate(value):
        _array(item, shape[1:], f"{where}[{i}]")


def document_to_mdp(doc) -> Mdp:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    for key in REQUIRED:
        if key not in doc:
            raise ParseError(f"missing field {key!r}", key)
    S = _int_field(doc, "num_states")
    A = _int_field(doc, "num_actions")
    _array(doc["transitions"], (S, A, S), "transitions")
    _array(doc["rewards"], (S, A), "rewards")
    return Mdp(np.array(doc["transitions"], dtype=float), np.array(doc["rewards"], dtype=float))


def load_document(source) -> dict:
    text = _read_source(source)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc


def codec_load(source) -> Mdp:
    """Parse a document from bytes, a JSON string or a file path; validation errors propagate."""
    return document_to_mdp(load_document(source))


load_mdp = codec_load
