"""Loading and validating system/source documents (JSON)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from jsonschema import Draft202012Validator

from .dynamics import EndoMap
from .measure import AmsdecError, FiniteSpace, InvalidMeasureError, SignedMeasure
from .numeric import FLOAT, MODES, RATIONAL, parse_scalar
from .sources import DEFAULT_BUDGET, InvalidSourceError, MarkovSource

BUDGET_ENV = "AMSDEC_BUDGET"

_number = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+|\.\d*)?([eE][-+]?\d+)?\s*$"}]}
_label = {"type": ["string", "integer"]}
_options = {
    "numeric_mode": {"enum": list(MODES)},
    "schedule": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
    "budget": {"type": "integer", "minimum": 1},
    "max_depth": {"type": "integer", "minimum": 1},
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
}

SYSTEM_SCHEMA = {
    "type": "object",
    "required": ["points", "map", "measure"],
    "properties": {
        "points": {"type": "array", "items": _label, "minItems": 1},
        "map": {"type": "array", "items": _label},
        "measure": {"type": "array", "items": _number},
        **_options,
    },
    "additionalProperties": False,
}

SOURCE_SCHEMA = {
    "type": "object",
    "required": ["type", "states", "transition", "initial"],
    "properties": {
        "type": {"enum": ["markov", "hmm"]},
        "states": {"type": "array", "items": _label, "minItems": 1},
        "transition": {"type": "array", "items": {"type": "array", "items": _number}},
        "initial": {"type": "array", "items": _number},
        "emission": {"type": "array", "items": _label},
        **_options,
    },
    "additionalProperties": False,
}


class DocumentError(AmsdecError):
    """Invalid input document; ``diagnostics`` lists one message per problem."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


@dataclass
class FiniteSystem:
    space: FiniteSpace
    t: EndoMap
    p: SignedMeasure
    mode: str
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    kind = "system"


@dataclass
class SourceSystem:
    source: MarkovSource
    mode: str
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    kind = "source"


def _path(err) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (("." if parts else "") + str(p)))
    return "".join(parts) or "<root>"


def _schema_errors(doc: dict, schema: dict) -> list[str]:
    v = Draft202012Validator(schema)
    return [f"field {_path(e)}: {e.message}" for e in sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))]


def parse_document(doc: Any, numeric: str | None = None) -> FiniteSystem | SourceSystem:
    """Validate a decoded document and build the system it describes."""
    if not isinstance(doc, dict):
        raise DocumentError(["document root must be an object"])
    is_source = "type" in doc
    errors = _schema_errors(doc, SOURCE_SCHEMA if is_source else SYSTEM_SCHEMA)
    if errors:
        raise DocumentError(errors)
    mode = numeric or doc.get("numeric_mode", RATIONAL)
    if mode not in MODES:
        raise DocumentError([f"numeric mode must be one of {MODES}, got {mode!r}"])
    options = {k: doc[k] for k in _options if k in doc and k != "numeric_mode"}

    def scalars(values, where):
        out = []
        for i, v in enumerate(values):
            try:
                out.append(parse_scalar(v, mode))
            except (ValueError, ZeroDivisionError, TypeError) as exc:
                raise DocumentError([f"field {where}[{i}]: {exc}"]) from None
        return out

    if is_source:
        n = len(doc["states"])
        if doc["type"] == "hmm" and "emission" not in doc:
            raise DocumentError(["field emission: required for type 'hmm'"])
        trans = [scalars(row, f"transition[{i}]") for i, row in enumerate(doc["transition"])]
        for i, row in enumerate(trans):
            if len(row) != n:
                raise DocumentError([f"field transition[{i}]: expected {n} entries, got {len(row)}"])
        if len(trans) != n:
            raise DocumentError([f"field transition: expected {n} rows, got {len(trans)}"])
        try:
            src = MarkovSource(tuple(doc["states"]), trans, scalars(doc["initial"], "initial"), doc.get("emission"))
        except InvalidSourceError as exc:
            raise DocumentError([str(exc)]) from None
        return SourceSystem(src, mode, options, doc)

    points = doc["points"]
    try:
        space = FiniteSpace(tuple(points))
    except ValueError as exc:
        raise DocumentError([f"field points: {exc}"]) from None
    if len(doc["map"]) != space.size:
        raise DocumentError([f"field map: expected {space.size} images, got {len(doc['map'])}"])
    bad = [i for i, y in enumerate(doc["map"]) if y not in space.points]
    if bad:
        raise DocumentError([f"field map[{i}]: {doc['map'][i]!r} is not a point" for i in bad])
    t = EndoMap.from_labels(space, doc["map"])
    weights = scalars(doc["measure"], "measure")
    if len(weights) != space.size:
        raise DocumentError([f"field measure: expected {space.size} weights, got {len(weights)}"])
    p = SignedMeasure(space, weights)
    if not p.is_probability():
        raise DocumentError([f"field measure: weights must be nonnegative and sum to 1 (sum is {p.total_mass()})"])
    return FiniteSystem(space, t, p, mode, options, doc)


def load_document(path: str | os.PathLike, numeric: str | None = None) -> FiniteSystem | SourceSystem:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return parse_document(doc, numeric)


def resolve_budget(flag: int | None, options: dict) -> int:
    """Explicit flag, then ``AMSDEC_BUDGET``, then the document, then the default."""
    if flag is not None:
        return flag
    env = os.environ.get(BUDGET_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise DocumentError([f"{BUDGET_ENV}={env!r} is not an integer"]) from None
    return int(options.get("budget", DEFAULT_BUDGET))


def parse_schedule(text: str) -> list[int]:
    """``"1..8"``, ``"1,2,4"`` or ``"pow2:10"`` (``1, 2, ..., 2^10``)."""
    text = text.strip()
    if text.startswith("pow2:"):
        k = int(text[5:])
        return [2**i for i in range(k + 1)]
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out or any(n < 1 for n in out):
        raise ValueError(f"bad schedule {text!r}")
    return sorted(set(out))


__all__ = [
    "DocumentError",
    "FiniteSystem",
    "SourceSystem",
    "parse_document",
    "load_document",
    "resolve_budget",
    "parse_schedule",
    "FLOAT",
    "RATIONAL",
    "InvalidMeasureError",
]
