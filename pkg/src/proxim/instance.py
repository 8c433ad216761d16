"""JSON instance files and report files.

An instance file is a UTF-8 JSON object with the keys ``norm``, ``G``, ``H``
and optionally ``name``, ``map``, ``gauge``, ``probes``, ``solver`` and
``falsifier``.  Files are validated against ``schemas/instance.schema.json``
before anything is built from them; every failure is raised as a
:class:`~proxim.errors.SchemaError` carrying a line and column.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import ConfigError, SchemaError
from .geometry import Box, FiniteCloud, GridBox, Interval, NormTag, Point, Segment, SetDescriptor
from .maps import (Affine, AffineShift, Branch, Constant, CyclicMap, ExplicitProbes, Expr, Gauge,
                   HalfImaginaryProbes, Linear, Named, Rational, Tabulated)

SIGNIFICANT_DIGITS = 15


@dataclass(frozen=True)
class Instance:
    """A pair of sets with an optional map, gauge, probes and run settings."""

    name: str
    G: SetDescriptor
    H: SetDescriptor
    map: Optional[CyclicMap] = None
    gauge: Optional[Gauge] = None
    probes: object = None
    solver: dict = field(default_factory=dict)
    falsifier: dict = field(default_factory=dict)

    @property
    def norm(self) -> NormTag:
        return self.G.norm

    def require_map(self) -> CyclicMap:
        if self.map is None:
            raise ConfigError(f"instance {self.name!r} has no map")
        return self.map

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "norm": self.norm.to_json(),
            "G": descriptor_to_json(self.G),
            "H": descriptor_to_json(self.H),
        }
        if self.map is not None:
            out["map"] = {"G": self.map.forward.to_json(), "H": self.map.backward.to_json()}
        if self.gauge is not None:
            out["gauge"] = self.gauge.to_json()
        if self.probes is not None:
            out["probes"] = self.probes.to_json()
        if self.solver:
            out["solver"] = dict(self.solver)
        if self.falsifier:
            out["falsifier"] = dict(self.falsifier)
        return out

    def with_settings(self, **changes) -> "Instance":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# descriptors


def descriptor_to_json(S: SetDescriptor) -> dict:
    if isinstance(S, GridBox):
        bounds = S.uniform_bounds()
        if bounds is not None:
            return {"type": "gridbox", "grid": S.grid, "bounds": [list(b) for b in bounds]}
        return {"type": "gridbox", "grid": S.grid, "lo": list(S.lo), "hi": list(S.hi)}
    if isinstance(S, Box):
        return {"type": "box", "lo": list(S.lo), "hi": list(S.hi)}
    if isinstance(S, Interval):
        return {"type": "interval", "lo": S.lo, "hi": S.hi}
    if isinstance(S, Segment):
        return {"type": "segment", "a": list(S.a.coords), "b": list(S.b.coords)}
    if isinstance(S, FiniteCloud):
        return {"type": "cloud", "points": [list(p.coords) for p in S.members]}
    raise TypeError(f"cannot serialize {type(S).__name__}")


def descriptor_from_json(obj: dict, norm: NormTag) -> SetDescriptor:
    kind = obj["type"]
    if kind == "interval":
        return Interval(obj["lo"], obj["hi"], norm)
    if kind == "box":
        return Box(tuple(obj["lo"]), tuple(obj["hi"]), norm)
    if kind == "segment":
        return Segment(Point(tuple(obj["a"]), norm), Point(tuple(obj["b"]), norm))
    if kind == "cloud":
        return FiniteCloud(tuple(Point(tuple(p), norm) for p in obj["points"]))
    if kind == "gridbox":
        if "bounds" in obj:
            return GridBox.uniform(obj["grid"], obj["bounds"], norm)
        return GridBox(tuple(obj["lo"]), tuple(obj["hi"]), norm, obj["grid"])
    raise ValueError(f"unknown descriptor type {kind!r}")


def branch_from_json(obj: dict, side: str) -> Branch:
    kind = obj["kind"]
    if kind == "constant":
        return Constant(tuple(obj["value"]))
    if kind == "affine":
        return Affine(tuple(map(tuple, obj["matrix"])), tuple(obj["offset"]))
    if kind == "expr":
        return Expr(tuple(obj["exprs"]))
    if kind == "named":
        return Named(obj["name"], side)
    raise ValueError(f"unknown branch kind {kind!r}")


def gauge_from_json(obj: dict) -> Gauge:
    kind = obj["kind"]
    if kind == "linear":
        return Linear(obj["beta"])
    if kind == "affine-shift":
        return AffineShift()
    if kind == "rational":
        return Rational()
    if kind == "tabulated":
        return Tabulated(tuple(obj["s"]), tuple(obj["psi"]))
    raise ValueError(f"unknown gauge kind {kind!r}")


def probes_from_json(obj: dict, norm: NormTag):
    if obj["family"] == "half-imaginary":
        return HalfImaginaryProbes(obj.get("fraction", 0.9))
    pairs = tuple((Point(tuple(p["u"]), norm), Point(tuple(p["v"]), norm)) for p in obj["pairs"])
    return ExplicitProbes(pairs)


# ---------------------------------------------------------------------------
# parsing with diagnostics


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("proxim").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _line_col(text: str, pos: int):
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def locate(text: str, path, at_key: bool = False) -> tuple:
    """Best-effort line/column of the JSON value at ``path`` (keys and indices).

    Object keys are found by scanning forward for their quoted names; array
    indices are resolved by counting top-level elements of the array.  With
    ``at_key`` the position of the final key itself is returned.
    """
    pos = 0
    decoder = json.JSONDecoder()
    for i, part in enumerate(path):
        if isinstance(part, str):
            hit = text.find(json.dumps(part), pos)
            if hit < 0:
                break
            if at_key and i == len(path) - 1:
                return _line_col(text, hit)
            pos = text.index(":", hit) + 1
        else:
            start = text.find("[", pos)
            if start < 0:
                break
            pos = start + 1
            for _ in range(int(part)):
                while text[pos] in " \t\r\n":
                    pos += 1
                try:
                    _, pos = decoder.raw_decode(text, pos)
                except json.JSONDecodeError:
                    break
                pos = text.index(",", pos) + 1
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return _line_col(text, pos)


_TAGS = ("type", "kind", "family")


def _specific(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    """Descend through ``oneOf`` failures into the branch selected by the tag key."""
    while err.validator == "oneOf" and err.context:
        branches = {}
        for sub in err.context:
            branches.setdefault(sub.schema_path[0], []).append(sub)
        chosen = [errs for errs in branches.values()
                  if not any(e.relative_path and e.relative_path[0] in _TAGS for e in errs)]
        if len(chosen) != 1:
            break
        err = max(chosen[0], key=lambda e: len(e.absolute_path))
    return err


def _schema_message(err: jsonschema.ValidationError):
    err = _specific(err)
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        extra = [k for k in err.instance if k not in allowed]
        if extra:
            path.append(extra[0])
            return f"{'/'.join(str(p) for p in path)}: {err.message}", path, True
    message = err.message
    if err.validator == "oneOf" and isinstance(err.instance, dict):
        tag = next((t for t in _TAGS if t in err.instance), None)
        if tag is not None:
            message = f"unsupported {tag} {err.instance[tag]!r} or invalid fields for it"
    where = "/".join(str(p) for p in path) or "<root>"
    return f"{where}: {message}", path, False


def parse_instance(text: str, source: str = "<string>", default_name: str = "") -> Instance:
    """Validate and build an :class:`Instance` from JSON ``text``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, exc.lineno, exc.colno, source) from None
    validator = jsonschema.Draft202012Validator(load_schema("instance"))
    best = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if best is not None:
        msg, path, at_key = _schema_message(best)
        line, col = locate(text, path, at_key)
        raise SchemaError(msg, line, col, source)
    return _build(doc, text, source, default_name)


def _build(doc: dict, text: str, source: str, default_name: str) -> Instance:
    def fail(exc, path):
        line, col = locate(text, path)
        where = "/".join(map(str, path))
        raise SchemaError(f"{where}: {exc}", line, col, source) from None

    norm = NormTag.parse(doc["norm"])
    sets = {}
    for key in ("G", "H"):
        try:
            sets[key] = descriptor_from_json(doc[key], norm)
        except (ValueError, TypeError) as exc:
            fail(exc, [key])
    G, H = sets["G"], sets["H"]
    name = doc.get("name", default_name)
    T = gauge = probes = None
    if "map" in doc:
        try:
            T = CyclicMap(branch_from_json(doc["map"]["G"], "G"), branch_from_json(doc["map"]["H"], "H"), G, H, name)
        except (ValueError, TypeError) as exc:
            fail(exc, ["map"])
    if "gauge" in doc:
        try:
            gauge = gauge_from_json(doc["gauge"])
        except (ValueError, TypeError) as exc:
            fail(exc, ["gauge"])
    if "probes" in doc:
        try:
            probes = probes_from_json(doc["probes"], norm)
            for u, v in (probes.items if isinstance(probes, ExplicitProbes) else ()):
                G.check_point(u)
                H.check_point(v)
        except (ValueError, TypeError) as exc:
            fail(exc, ["probes"])
    solver = dict(doc.get("solver", {}))
    if "u0" in solver and len(solver["u0"]) != G.dim:
        fail(ValueError(f"u0 has {len(solver['u0'])} coordinates, G has dimension {G.dim}"), ["solver", "u0"])
    return Instance(name, G, H, T, gauge, probes, solver, dict(doc.get("falsifier", {})))


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"not UTF-8: {exc.reason}", 1, 1, str(path)) from None
    return parse_instance(text, str(path), default_name=path.stem)


def dump_instance(inst: Instance) -> str:
    return dumps(inst.to_json())


# ---------------------------------------------------------------------------
# reports


def canonical(value):
    """Round floats to 15 significant digits; non-finite floats become strings."""
    if isinstance(value, (bool, type(None), str)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        x = float(f"{x:.{SIGNIFICANT_DIGITS}g}")
        return 0.0 if x == 0 else x
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [canonical(v) for v in value]
    if hasattr(value, "value"):  # enums
        return canonical(value.value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(payload) -> str:
    return json.dumps(canonical(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def validate_report(payload: dict):
    jsonschema.validate(canonical(payload), load_schema("report"))


def write_atomic(path, text: str):
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(path, payload: dict):
    validate_report(payload)
    write_atomic(path, dumps(payload))
