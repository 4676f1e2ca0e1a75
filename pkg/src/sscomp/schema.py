"""Hyperparameter constraint language: AST, JSON dialect, validation.

The AST covers categorical sets (``Enum``), numeric intervals (``Range``),
records (``Record``), the boolean connectives ``AnyOf``/``AllOf``/``Not``
and the constants ``TOP``/``BOTTOM``. Every node is an immutable dataclass,
so structural equality is plain ``==``.

The JSON dialect is a strict subset of JSON Schema; see ``docs/grammar.md``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Iterable, Union

from .errors import ExplosionError, ParseError, UnboundedDimension, UnsupportedFeature

Value = Union[bool, int, float, str]

REAL = "real"
INTEGER = "integer"
UNIFORM = "uniform"
LOGUNIFORM = "loguniform"

DEFAULT_ENUM_CAP = 10_000


def value_kind(v: Any) -> str | None:
    """Return ``boolean``, ``number`` or ``string``; ``None`` for non-values."""
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "string"
    # numpy scalars
    if hasattr(v, "dtype") and hasattr(v, "item"):
        return value_kind(v.item())
    return None


def values_equal(a: Any, b: Any) -> bool:
    ka = value_kind(a)
    return ka is not None and ka == value_kind(b) and a == b


def value_key(v: Value) -> tuple:
    """Hashable key under which two values are equal iff ``values_equal``."""
    return (value_kind(v), v)


# ---------------------------------------------------------------------------
# AST


class Schema:
    """Base class of all schema nodes."""

    __slots__ = ()

    def __and__(self, other: Schema) -> AllOf:
        return AllOf((self, other))

    def __or__(self, other: Schema) -> AnyOf:
        return AnyOf((self, other))

    def __invert__(self) -> Not:
        return Not(self)


@dataclass(frozen=True)
class _Top(Schema):
    def __repr__(self):
        return "TOP"

    def __str__(self):
        return "⊤"


@dataclass(frozen=True)
class _Bottom(Schema):
    def __repr__(self):
        return "BOTTOM"

    def __str__(self):
        return "⊥"


TOP = _Top()
BOTTOM = _Bottom()


@dataclass(frozen=True)
class Enum(Schema):
    values: tuple

    def __post_init__(self):
        values = tuple(_native(v) for v in self.values)
        if not values:
            raise ValueError("Enum needs at least one value; use BOTTOM for the empty set")
        seen = set()
        for v in values:
            if value_kind(v) is None:
                raise ValueError(f"unsupported enum value {v!r}")
            if isinstance(v, float) and math.isnan(v):
                raise ValueError("NaN is not a valid enum value")
            k = value_key(v)
            if k in seen:
                raise ValueError(f"duplicate enum value {v!r}")
            seen.add(k)
        object.__setattr__(self, "values", values)

    def __contains__(self, v: Any) -> bool:
        return any(values_equal(v, w) for w in self.values)

    def __str__(self):
        return "[" + ", ".join(_fmt_value(v) for v in self.values) + "]"


@dataclass(frozen=True)
class Range(Schema):
    """Numeric interval. Both ends are exclusive unless stated otherwise."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_exclusive: bool = True
    hi_exclusive: bool = True
    kind: str = REAL
    distribution: str = UNIFORM

    def __post_init__(self):
        if self.kind not in (REAL, INTEGER):
            raise ValueError(f"unknown range kind {self.kind!r}")
        if self.distribution not in (UNIFORM, LOGUNIFORM):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("range bounds must not be NaN")
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_exclusive", True)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_exclusive", True)
        if range_is_empty(self.lo, self.hi, self.lo_exclusive, self.hi_exclusive, self.kind):
            raise ValueError(f"empty range {self}; use BOTTOM")
        if self.distribution == LOGUNIFORM and not self.lo > 0:
            raise ValueError("loguniform requires a positive lower bound")

    def __contains__(self, v: Any) -> bool:
        if value_kind(v) != "number":
            return False
        if isinstance(v, float) and math.isnan(v):
            return False
        if self.kind == INTEGER and not float(v).is_integer():
            return False
        if v < self.lo or (v == self.lo and self.lo_exclusive):
            return False
        if v > self.hi or (v == self.hi and self.hi_exclusive):
            return False
        return True

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def integer_bounds(self) -> tuple[int, int]:
        """Smallest and largest integer members."""
        lo = math.floor(self.lo) + 1 if self.lo_exclusive else math.ceil(self.lo)
        hi = math.ceil(self.hi) - 1 if self.hi_exclusive else math.floor(self.hi)
        return int(lo), int(hi)

    def __str__(self):
        left = "(" if self.lo_exclusive else "["
        right = ")" if self.hi_exclusive else "]"
        body = f"{left}{_fmt_value(self.lo)}..{_fmt_value(self.hi)}{right}"
        if self.kind == INTEGER:
            body = "int" + body
        if self.distribution == LOGUNIFORM:
            body = "log" + body
        return body


def range_is_empty(lo, hi, lo_exclusive, hi_exclusive, kind=REAL) -> bool:
    if lo > hi:
        return True
    if lo == hi and (lo_exclusive or hi_exclusive or math.isinf(lo)):
        return True
    if kind == INTEGER and math.isfinite(lo) and math.isfinite(hi):
        ilo = math.floor(lo) + 1 if lo_exclusive else math.ceil(lo)
        ihi = math.ceil(hi) - 1 if hi_exclusive else math.floor(hi)
        return ilo > ihi
    return False


@dataclass(frozen=True)
class Record(Schema):
    """Mapping instance whose listed keys are all present and valid.

    Keys not listed are unconstrained, so ``Record({"R": s})`` reads as
    "R is present and satisfies s".
    """

    properties: tuple = ()

    def __post_init__(self):
        props = self.properties
        items = list(props.items()) if isinstance(props, Mapping) else list(props)
        names = [k for k, _ in items]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate record keys in {names}")
        for k, s in items:
            if not isinstance(k, str):
                raise ValueError(f"record key must be a string, got {k!r}")
            if not isinstance(s, Schema):
                raise ValueError(f"record value for {k!r} is not a Schema")
        object.__setattr__(self, "properties", tuple(sorted(items, key=lambda kv: kv[0])))

    @property
    def props(self) -> dict[str, Schema]:
        return dict(self.properties)

    def keys(self) -> list[str]:
        return [k for k, _ in self.properties]

    def __str__(self):
        return "dict{" + ", ".join(f"{k}: {s}" for k, s in self.properties) + "}"


@dataclass(frozen=True)
class AnyOf(Schema):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _schema_tuple(self.children))

    def __str__(self):
        return "(" + " ∨ ".join(str(c) for c in self.children) + ")"


@dataclass(frozen=True)
class AllOf(Schema):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _schema_tuple(self.children))

    def __str__(self):
        return "(" + " ∧ ".join(str(c) for c in self.children) + ")"


@dataclass(frozen=True)
class Not(Schema):
    child: Schema

    def __post_init__(self):
        if not isinstance(self.child, Schema):
            raise ValueError("Not needs a Schema child")

    def __str__(self):
        return f"¬{self.child}"


def _schema_tuple(children) -> tuple:
    children = tuple(children)
    for c in children:
        if not isinstance(c, Schema):
            raise ValueError(f"{c!r} is not a Schema")
    return children


def _native(v):
    if hasattr(v, "dtype") and hasattr(v, "item"):
        return v.item()
    return v


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def make_enum(values: Iterable[Value]) -> Schema:
    """``Enum`` over the distinct values, or ``BOTTOM`` when there are none."""
    out, seen = [], set()
    for v in values:
        k = value_key(_native(v))
        if k not in seen:
            seen.add(k)
            out.append(_native(v))
    return Enum(tuple(out)) if out else BOTTOM


def make_range(lo=-math.inf, hi=math.inf, lo_exclusive=True, hi_exclusive=True,
               kind=REAL, distribution=UNIFORM) -> Schema:
    """``Range`` over the interval, or ``BOTTOM`` when it is empty."""
    if range_is_empty(lo, hi, lo_exclusive, hi_exclusive, kind):
        return BOTTOM
    return Range(lo, hi, lo_exclusive, hi_exclusive, kind, distribution)


def schema_size(s: Schema) -> int:
    """Number of AST nodes."""
    if isinstance(s, Record):
        return 1 + sum(schema_size(c) for _, c in s.properties)
    if isinstance(s, (AnyOf, AllOf)):
        return 1 + sum(schema_size(c) for c in s.children)
    if isinstance(s, Not):
        return 1 + schema_size(s.child)
    return 1


# ---------------------------------------------------------------------------
# JSON dialect

_KEYS = frozenset({
    "enum", "minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum",
    "type", "properties", "anyOf", "allOf", "not", "distribution",
})
_TYPES = ("number", "integer", "string", "boolean", "object")


def parse_schema(text: str) -> Schema:
    """Parse a schema document (JSON text) into an AST."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}", e.msg) from None
    except ValueError as e:
        raise ParseError("document", str(e)) from None
    return schema_from_json(doc)


def _reject_constant(name):
    raise ValueError(f"{name} is not allowed in schema documents")


def schema_from_json(doc: Any, path: str = "") -> Schema:
    """Convert an already-decoded JSON value into an AST."""
    where = path or "/"
    if doc is True:
        return TOP
    if doc is False:
        return BOTTOM
    if not isinstance(doc, dict):
        raise ParseError(where, f"expected an object or boolean, got {type(doc).__name__}")
    unknown = sorted(set(doc) - _KEYS)
    if unknown:
        raise UnsupportedFeature(where, f"unsupported keys {unknown}")
    if not doc:
        return TOP

    parts: list[Schema] = []
    typ = doc.get("type")
    if typ is not None and typ not in _TYPES:
        raise UnsupportedFeature(f"{path}/type", f"unsupported type {typ!r}")

    numeric_keys = [k for k in ("minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum")
                    if k in doc]
    if "distribution" in doc and not (numeric_keys or typ in ("number", "integer")):
        raise ParseError(f"{path}/distribution", "distribution only applies to numeric ranges")

    if "enum" in doc:
        values = doc["enum"]
        if not isinstance(values, list):
            raise ParseError(f"{path}/enum", "enum must be a list")
        for i, v in enumerate(values):
            if value_kind(v) is None:
                raise UnsupportedFeature(f"{path}/enum/{i}", f"unsupported enum value {v!r}")
        if len({value_key(v) for v in values}) != len(values):
            raise ParseError(f"{path}/enum", "enum values must be distinct")
        if numeric_keys or "distribution" in doc:
            raise ParseError(where, "enum cannot be combined with range keywords")
        if typ is not None:
            values = [v for v in values if _has_type(v, typ)]
        parts.append(make_enum(values))
    elif typ == "boolean":
        parts.append(Enum((True, False)))
    elif typ == "string":
        raise UnsupportedFeature(where, "free-form strings need an enum")
    elif typ in ("number", "integer") or numeric_keys:
        if typ not in (None, "number", "integer"):
            raise ParseError(where, f"range keywords on type {typ!r}")
        parts.append(_parse_range(doc, path, typ))

    if "properties" in doc or typ == "object":
        if typ not in (None, "object"):
            raise ParseError(where, "properties require type object")
        props = doc.get("properties", {})
        if not isinstance(props, dict):
            raise ParseError(f"{path}/properties", "properties must be an object")
        parts.append(Record(tuple(
            (k, schema_from_json(v, f"{path}/properties/{k}")) for k, v in props.items()
        )))

    for key, cls in (("anyOf", AnyOf), ("allOf", AllOf)):
        if key in doc:
            items = doc[key]
            if not isinstance(items, list) or not items:
                raise ParseError(f"{path}/{key}", f"{key} must be a nonempty list")
            parts.append(cls(tuple(
                schema_from_json(c, f"{path}/{key}/{i}") for i, c in enumerate(items)
            )))
    if "not" in doc:
        parts.append(Not(schema_from_json(doc["not"], f"{path}/not")))

    if not parts:
        raise ParseError(where, "schema has no constraint keywords")
    return parts[0] if len(parts) == 1 else AllOf(tuple(parts))


def _has_type(v, typ) -> bool:
    kind = value_kind(v)
    if typ == "integer":
        return kind == "number" and float(v).is_integer()
    return {"number": "number", "string": "string", "boolean": "boolean"}.get(typ) == kind


def _parse_range(doc, path, typ) -> Schema:
    def bound(inclusive_key, exclusive_key, default):
        if inclusive_key in doc and exclusive_key in doc:
            raise ParseError(path or "/", f"both {inclusive_key} and {exclusive_key} given")
        for key, exclusive in ((inclusive_key, False), (exclusive_key, True)):
            if key in doc:
                v = doc[key]
                if value_kind(v) != "number":
                    raise ParseError(f"{path}/{key}", f"{key} must be a number")
                return v, exclusive
        return default, True

    lo, lo_ex = bound("minimum", "exclusiveMinimum", -math.inf)
    hi, hi_ex = bound("maximum", "exclusiveMaximum", math.inf)
    dist = doc.get("distribution", UNIFORM)
    if dist not in (UNIFORM, LOGUNIFORM):
        raise UnsupportedFeature(f"{path}/distribution", f"unknown distribution {dist!r}")
    kind = INTEGER if typ == "integer" else REAL
    if range_is_empty(lo, hi, lo_ex, hi_ex, kind):
        return BOTTOM
    if dist == LOGUNIFORM and not lo > 0:
        raise ParseError(f"{path}/distribution", "loguniform requires a positive lower bound")
    return Range(lo, hi, lo_ex, hi_ex, kind, dist)


def schema_to_json(s: Schema) -> Any:
    """Inverse of ``schema_from_json`` on ASTs."""
    if s is TOP or isinstance(s, _Top):
        return True
    if s is BOTTOM or isinstance(s, _Bottom):
        return False
    if isinstance(s, Enum):
        return {"enum": list(s.values)}
    if isinstance(s, Range):
        out: dict[str, Any] = {"type": "integer" if s.kind == INTEGER else "number"}
        if math.isfinite(s.lo):
            out["exclusiveMinimum" if s.lo_exclusive else "minimum"] = s.lo
        if math.isfinite(s.hi):
            out["exclusiveMaximum" if s.hi_exclusive else "maximum"] = s.hi
        if s.distribution != UNIFORM:
            out["distribution"] = s.distribution
        return out
    if isinstance(s, Record):
        return {"type": "object", "properties": {k: schema_to_json(c) for k, c in s.properties}}
    if isinstance(s, AnyOf):
        return {"anyOf": [schema_to_json(c) for c in s.children]}
    if isinstance(s, AllOf):
        return {"allOf": [schema_to_json(c) for c in s.children]}
    if isinstance(s, Not):
        return {"not": schema_to_json(s.child)}
    raise TypeError(f"not a schema: {s!r}")


def serialize_schema(s: Schema) -> str:
    return json.dumps(schema_to_json(s), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    path: tuple = ()
    construct: str | None = None
    message: str = ""
    schema_path: tuple = field(default=(), compare=False)

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "ok"
        where = "/".join(str(p) for p in self.path) or "<root>"
        return f"{where}: {self.message} ({self.construct})"


_OK = ValidationResult(True)


def validate_instance(schema: Schema, instance: Any) -> ValidationResult:
    """Check membership of ``instance`` in the set ``schema`` denotes.

    Failures are returned, never raised.
    """
    return _check(schema, instance, (), ())


def _fail(path, schema_path, construct, message):
    return ValidationResult(False, path, construct, message, schema_path)


def _check(s: Schema, x: Any, path: tuple, spath: tuple) -> ValidationResult:
    if isinstance(s, _Top):
        return _OK
    if isinstance(s, _Bottom):
        return _fail(path, spath, "false", "nothing is accepted here")
    if isinstance(s, Enum):
        if x in s:
            return _OK
        return _fail(path, spath, "enum", f"{x!r} is not one of {s}")
    if isinstance(s, Range):
        if x in s:
            return _OK
        return _fail(path, spath, "range", f"{x!r} is not in {s}")
    if isinstance(s, Record):
        if not isinstance(x, Mapping):
            return _fail(path, spath, "type", f"expected a record, got {x!r}")
        for k, c in s.properties:
            if k not in x:
                return _fail(path + (k,), spath + ("properties", k), "required",
                             f"missing hyperparameter {k!r}")
            r = _check(c, x[k], path + (k,), spath + ("properties", k))
            if not r:
                return r
        return _OK
    if isinstance(s, AllOf):
        for i, c in enumerate(s.children):
            r = _check(c, x, path, spath + ("allOf", i))
            if not r:
                return r
        return _OK
    if isinstance(s, AnyOf):
        failures = []
        for i, c in enumerate(s.children):
            r = _check(c, x, path, spath + ("anyOf", i))
            if r:
                return _OK
            failures.append(r)
        detail = "; ".join(str(f) for f in failures)
        return _fail(path, spath, "anyOf", f"no alternative accepts the value [{detail}]")
    if isinstance(s, Not):
        if _check(s.child, x, path, spath + ("not",)):
            return _fail(path, spath, "not", f"value matches the excluded schema {s.child}")
        return _OK
    raise TypeError(f"not a schema: {s!r}")


# ---------------------------------------------------------------------------
# Brute-force enumeration (test oracle)


def interior_points(r: Range, cuts: int, bounds: bool = False) -> list:
    """``cuts`` evenly spaced points strictly inside ``r``.

    Integer ranges round each point to the nearest integer and drop
    duplicates. With ``bounds=True`` the finite end points are added.
    """
    if not r.bounded:
        raise UnboundedDimension(f"cannot discretize unbounded range {r}")
    pts = [r.lo + (r.hi - r.lo) * i / (cuts + 1) for i in range(1, cuts + 1)]
    if bounds:
        pts = [r.lo] + pts + [r.hi]
    if r.kind == INTEGER:
        pts = [int(round(p)) for p in pts]
    out, seen = [], set()
    for p in pts:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def enumerate_discretized(schema: Schema, cuts: int, cap: int = DEFAULT_ENUM_CAP,
                          bounds: bool = False) -> list:
    """Every discretized instance of ``schema``.

    Candidate values for each record key are pooled from every Enum and
    Range (replaced by ``cuts`` interior points) that constrains the key
    anywhere in the AST; the Cartesian product of the pools is then
    filtered by ``validate_instance``.
    """
    if cuts < 2:
        raise ValueError("cuts must be at least 2")
    candidates = _candidates(schema, cuts, cap, bounds)
    return [c for c in candidates if validate_instance(schema, c)]


_ABSENT = object()


def _candidates(s: Schema, cuts, cap, bounds) -> list:
    scalars: list = []
    records: list[Record] = []

    def walk(node):
        if isinstance(node, Enum):
            scalars.extend(node.values)
        elif isinstance(node, Range):
            scalars.extend(interior_points(node, cuts, bounds))
        elif isinstance(node, Record):
            records.append(node)
        elif isinstance(node, (AnyOf, AllOf)):
            for c in node.children:
                walk(c)
        elif isinstance(node, Not):
            walk(node.child)

    walk(s)
    out = _dedup(scalars)
    if not records:
        return out

    keys: list[str] = []
    for rec in records:
        for k in rec.keys():
            if k not in keys:
                keys.append(k)
    pools = []
    for k in keys:
        pool: list = []
        for rec in records:
            if k in rec.props:
                pool.extend(_candidates(rec.props[k], cuts, cap, bounds))
        pool = _dedup(pool)
        if any(k not in rec.props for rec in records):
            pool.append(_ABSENT)
        pools.append(pool)
    size = math.prod(len(p) for p in pools)
    if size > cap:
        raise ExplosionError(f"{size} candidate instances exceed the cap of {cap}")
    for combo in itertools.product(*pools):
        out.append({k: v for k, v in zip(keys, combo) if v is not _ABSENT})
    return out


def _dedup(values: list) -> list:
    out, seen = [], []
    for v in values:
        if isinstance(v, Mapping):
            if v not in seen:
                seen.append(v)
                out.append(v)
        elif not any(not isinstance(w, Mapping) and values_equal(v, w) for w in out):
            out.append(v)
    return out
