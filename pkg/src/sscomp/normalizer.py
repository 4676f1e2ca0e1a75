"""Rewrite one operator's schema into a disjunction of flat grids.

A grid maps each hyperparameter to a *dimension*: a categorical set
(``Enum``) or a numeric interval (``Range``). The normalizer makes a single
bottom-up pass; at each node it simplifies the (already normalized)
children and then hoists disjunctions above conjunctions and records.

Rewrites applied by ``simplify``::

    s ∨ ⊥ ⇒ s          s ∨ ⊤ ⇒ ⊤          s ∧ ⊤ ⇒ s          s ∧ ⊥ ⇒ ⊥
    ¬(a ∨ b) ⇒ ¬a ∧ ¬b        ¬(a ∧ b) ⇒ ¬a ∨ ¬b        ¬¬a ⇒ a
    [c0] ∧ [c1] ⇒ [c0 ∩ c1]   [c0] ∧ ¬[c1] ⇒ [c0 ∖ c1]  ¬[c0] ∧ ¬[c1] ⇒ ¬[c0 ∪ c1]
    [c] ∧ (a..b) ⇒ [c filtered by (a..b)]    (a..b) ∧ (c..d) ⇒ intersection
    dict{k: a, ...} ∧ dict{k: b, ...} ⇒ dict{k: a ∧ b, ...}

Rewrites applied by ``hoist``::

    (a ∨ b) ∧ (c ∨ d) ⇒ (a ∧ c) ∨ (a ∧ d) ∨ (b ∧ c) ∨ (b ∧ d)
    dict{k: a ∨ b, ...} ⇒ dict{k: a, ...} ∨ dict{k: b, ...}
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Callable, Iterator

from .errors import ExplosionError, NotNormalizable
from .schema import (
    BOTTOM, TOP, AllOf, AnyOf, Enum, Not, Range, Record, Schema, _Bottom, _Top,
    make_enum, make_range, schema_from_json, schema_to_json, value_kind,
)

DEFAULT_DISJUNCT_CAP = 10_000

Dimension = Enum | Range
Grid = dict  # hyperparameter name -> Dimension

# Aliases matching the vocabulary of search-space tools.
Categorical = Enum
Continuous = Range


def disjunct_cap(cap: int | None = None) -> int:
    """Resolve the disjunct cap: explicit value, then env var, then default."""
    if cap is not None:
        return cap
    env = os.environ.get("SSCOMP_DISJUNCT_CAP")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"SSCOMP_DISJUNCT_CAP must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError("SSCOMP_DISJUNCT_CAP must be positive")
        return value
    return DEFAULT_DISJUNCT_CAP


@dataclass(frozen=True)
class NormalizedSpace:
    """Disjunction of flat grids. Zero disjuncts means the empty space."""

    disjuncts: tuple

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(dict(g) for g in self.disjuncts))

    def __len__(self):
        return len(self.disjuncts)

    def __iter__(self) -> Iterator[Grid]:
        return iter(self.disjuncts)

    def keys(self) -> list[str]:
        return sorted(self.disjuncts[0]) if self.disjuncts else []

    def to_schema(self) -> Schema:
        records = [Record(tuple(g.items())) for g in self.disjuncts]
        if not records:
            return BOTTOM
        return records[0] if len(records) == 1 else AnyOf(tuple(records))

    def to_json(self) -> dict:
        return {"disjuncts": [grid_to_json(g) for g in self.disjuncts]}

    @classmethod
    def from_json(cls, doc: dict) -> NormalizedSpace:
        return cls(tuple(grid_from_json(g) for g in doc["disjuncts"]))

    def __str__(self):
        if not self.disjuncts:
            return "⊥"
        return " ∨ ".join(format_grid(g) for g in self.disjuncts)


def grid_to_json(grid: Grid) -> dict:
    return {k: schema_to_json(d) for k, d in sorted(grid.items())}


def grid_from_json(doc: dict) -> Grid:
    out = {}
    for k, v in doc.items():
        dim = schema_from_json(v, f"/{k}")
        if not isinstance(dim, (Enum, Range)):
            raise ValueError(f"grid entry {k!r} is not a dimension")
        out[k] = dim
    return out


def format_grid(grid: Grid) -> str:
    return "dict{" + ", ".join(f"{k}: {d}" for k, d in sorted(grid.items())) + "}"


def same_disjuncts(a, b) -> bool:
    """Multiset equality of two grid sequences (disjunct order ignored)."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        return False
    remaining = list(b)
    for g in a:
        for i, h in enumerate(remaining):
            if g == h:
                del remaining[i]
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Local rewrites


def _flatten(children, cls) -> list:
    out = []
    for c in children:
        if isinstance(c, cls):
            out.extend(c.children)
        else:
            out.append(c)
    return out


def _dedup(items) -> list:
    out = []
    for x in items:
        if x not in out:
            out.append(x)
    return out


def _enum_filter(e: Enum, keep: Callable) -> Schema:
    return make_enum(v for v in e.values if keep(v))


def _range_and(a: Range, b: Range) -> Schema:
    if a.lo > b.lo or (a.lo == b.lo and a.lo_exclusive):
        lo, lo_ex = a.lo, a.lo_exclusive
    else:
        lo, lo_ex = b.lo, b.lo_exclusive
    if a.hi < b.hi or (a.hi == b.hi and a.hi_exclusive):
        hi, hi_ex = a.hi, a.hi_exclusive
    else:
        hi, hi_ex = b.hi, b.hi_exclusive
    kind = "integer" if "integer" in (a.kind, b.kind) else "real"
    return make_range(lo, hi, lo_ex, hi_ex, kind, a.distribution)


def _is_not(s, cls) -> bool:
    return isinstance(s, Not) and isinstance(s.child, cls)


def _conj(a: Schema, b: Schema, local: Callable[[Schema], Schema]) -> Schema | None:
    """Combine two conjuncts into one node, or None if no rewrite applies."""
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Enum):
            if isinstance(y, Enum):
                return _enum_filter(x, lambda v: v in y)
            if _is_not(y, Enum):
                return _enum_filter(x, lambda v: v not in y.child)
            if isinstance(y, Range):
                return _enum_filter(x, lambda v: v in y)
            if _is_not(y, Range):
                return _enum_filter(x, lambda v: v not in y.child)
            if isinstance(y, Record):
                return BOTTOM
        if _is_not(x, Enum) and _is_not(y, Enum):
            merged = make_enum(x.child.values + y.child.values)
            return Not(merged)
        if isinstance(x, Range):
            if isinstance(y, Range):
                return _range_and(x, y)
            if _is_not(y, Enum):
                if any(v in x for v in y.child.values):
                    return None
                return x
            if isinstance(y, Record):
                return BOTTOM
        if isinstance(x, Record):
            if isinstance(y, Record):
                return _merge_records(x, y, local)
            if _is_not(y, Enum) or _is_not(y, Range):
                return x
    return None


def _merge_records(a: Record, b: Record, local) -> Schema:
    pa, pb = a.props, b.props
    merged = {}
    for k in list(pa) + [k for k in pb if k not in pa]:
        if k in pa and k in pb:
            s = local(AllOf((pa[k], pb[k])))
        else:
            s = pa[k] if k in pa else pb[k]
        if isinstance(s, _Bottom):
            return BOTTOM
        merged[k] = s
    return local(Record(tuple(merged.items())))


def _simplify_node(s: Schema, local: Callable[[Schema], Schema] | None = None) -> Schema:
    """Apply simplification rewrites at ``s`` whose children are simplified."""
    if local is None:
        local = _simplify_node
    if isinstance(s, Record):
        if any(isinstance(c, _Bottom) for _, c in s.properties):
            return BOTTOM
        return s
    if isinstance(s, AnyOf):
        items = [c for c in _flatten(s.children, AnyOf) if not isinstance(c, _Bottom)]
        if any(isinstance(c, _Top) for c in items):
            return TOP
        items = _dedup(items)
        if not items:
            return BOTTOM
        return items[0] if len(items) == 1 else AnyOf(tuple(items))
    if isinstance(s, AllOf):
        items = [c for c in _flatten(s.children, AllOf) if not isinstance(c, _Top)]
        if any(isinstance(c, _Bottom) for c in items):
            return BOTTOM
        acc: list[Schema] = []
        for x in items:
            i = 0
            while i < len(acc):
                c = _conj(acc[i], x, local)
                if c is None:
                    i += 1
                    continue
                if isinstance(c, _Bottom):
                    return BOTTOM
                del acc[i]
                x = c
                i = 0
            acc.append(x)
        acc = _dedup(acc)
        if not acc:
            return TOP
        return acc[0] if len(acc) == 1 else AllOf(tuple(acc))
    if isinstance(s, Not):
        c = s.child
        if isinstance(c, _Top):
            return BOTTOM
        if isinstance(c, _Bottom):
            return TOP
        if isinstance(c, Not):
            return c.child
        if isinstance(c, AnyOf):
            return local(AllOf(tuple(local(Not(x)) for x in c.children)))
        if isinstance(c, AllOf):
            return local(AnyOf(tuple(local(Not(x)) for x in c.children)))
        return s
    return s


def _alternatives(s: Schema) -> tuple:
    return s.children if isinstance(s, AnyOf) else (s,)


def _hoist_node(s: Schema, cap: int, local: Callable[[Schema], Schema] | None = None) -> Schema:
    """Apply hoisting rewrites at ``s`` whose children are hoisted."""
    finish = local if local is not None else (lambda x: x)
    if isinstance(s, AllOf) and any(isinstance(c, AnyOf) for c in s.children):
        lists = [_alternatives(c) for c in s.children]
        _check_cap(math.prod(len(x) for x in lists), cap)
        out = [finish(AllOf(combo)) for combo in itertools.product(*lists)]
        return _join(out, local, cap)
    if isinstance(s, Record) and any(isinstance(c, AnyOf) for _, c in s.properties):
        keys = [k for k, _ in s.properties]
        lists = [_alternatives(c) for _, c in s.properties]
        _check_cap(math.prod(len(x) for x in lists), cap)
        out = [finish(Record(tuple(zip(keys, combo)))) for combo in itertools.product(*lists)]
        return _join(out, local, cap)
    if isinstance(s, AnyOf) and any(isinstance(c, AnyOf) for c in s.children):
        return _join(list(s.children), local, cap)
    return s


def _join(items, local, cap) -> Schema:
    if local is not None:
        out = _simplify_node(AnyOf(tuple(items)))
    else:
        out = AnyOf(tuple(_flatten(items, AnyOf)))
    _check_cap(len(_alternatives(out)), cap)
    return out


def _check_cap(n: int, cap: int):
    if n > cap:
        raise ExplosionError(f"{n} disjuncts exceed the cap of {cap}")


def _rebuild(s: Schema, f: Callable[[Schema], Schema]) -> Schema:
    if isinstance(s, Record):
        return Record(tuple((k, f(c)) for k, c in s.properties))
    if isinstance(s, AnyOf):
        return AnyOf(tuple(f(c) for c in s.children))
    if isinstance(s, AllOf):
        return AllOf(tuple(f(c) for c in s.children))
    if isinstance(s, Not):
        return Not(f(s.child))
    return s


# ---------------------------------------------------------------------------
# Public passes


def simplify(s: Schema) -> Schema:
    """Bottom-up simplification without hoisting."""
    return _simplify_node(_rebuild(s, simplify))


def hoist(s: Schema, cap: int | None = None) -> Schema:
    """Bottom-up disjunction hoisting without simplification."""
    cap = disjunct_cap(cap)

    def go(node):
        return _hoist_node(_rebuild(node, go), cap)

    return go(s)


class Normalizer:
    """Single bottom-up pass interleaving ``simplify`` and ``hoist`` per node.

    ``visits`` counts AST nodes entered by the pass; it equals the size of
    the input, which is the termination bound.
    """

    def __init__(self, cap: int | None = None):
        self.cap = disjunct_cap(cap)
        self.visits = 0

    def local(self, s: Schema) -> Schema:
        return _hoist_node(_simplify_node(s, self.local), self.cap, self.local)

    def rewrite(self, s: Schema) -> Schema:
        self.visits += 1
        return self.local(_rebuild(s, self.rewrite))

    def normalize(self, s: Schema) -> NormalizedSpace:
        return to_space(self.rewrite(s))


def normalize(s: Schema, cap: int | None = None) -> NormalizedSpace:
    return Normalizer(cap).normalize(s)


def to_space(s: Schema) -> NormalizedSpace:
    """Convert a rewritten schema into grids, failing on any non-flat residue."""
    if isinstance(s, _Bottom):
        return NormalizedSpace(())
    if isinstance(s, _Top):
        raise NotNormalizable("⊤ (no hyperparameter record)")
    grids = []
    for d in _alternatives(s):
        if not isinstance(d, Record):
            raise NotNormalizable(str(d))
        for k, dim in d.properties:
            if not isinstance(dim, (Enum, Range)):
                raise NotNormalizable(f"{k}: {dim}")
        grids.append(dict(d.properties))
    keysets = {frozenset(g) for g in grids}
    if len(keysets) > 1:
        raise NotNormalizable(
            "disjuncts bind different hyperparameters: "
            + " vs ".join(str(sorted(k)) for k in keysets)
        )
    return NormalizedSpace(tuple(_dedup(grids)))


def strip_to_leading_record(s: Schema) -> Schema:
    """Drop side constraints: keep only the leading record of a top-level AllOf."""
    if isinstance(s, AllOf) and s.children and isinstance(s.children[0], Record):
        return s.children[0]
    return s


def dimension_kind(dim: Dimension) -> str:
    if isinstance(dim, Enum):
        return "categorical"
    return "continuous"


def is_single_value(dim: Dimension) -> bool:
    return isinstance(dim, Enum) and len(dim.values) == 1


__all__ = [
    "Categorical", "Continuous", "DEFAULT_DISJUNCT_CAP", "Dimension", "Grid",
    "NormalizedSpace", "Normalizer", "disjunct_cap", "format_grid", "grid_from_json",
    "grid_to_json", "hoist", "normalize", "same_disjuncts", "simplify",
    "strip_to_leading_record", "to_space", "value_kind",
]
