"""Combine per-operator normal forms into tool-specific search spaces.

Three backends share one naming scheme. A hyperparameter ``hp`` of a step
displayed as ``op`` is mangled to ``op__hp``. Every choice gets a
*discriminant* dimension keyed ``<path>__D``, where ``<path>`` joins the
choice's position indices with ``_`` (empty for a choice at the root).
Its value names the selected alternative: the step's display name, or the
alternative's own path for composite alternatives.

* ``compile_flat``: a disjunction of flat grids (SMAC-style).
* ``compile_grid``: the flat space with every continuous dimension
  replaced by sampled values (GridSearchCV-style).
* ``compile_nested``: a tree mirroring the pipeline (hyperopt-style).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import EmptySpace, ExplosionError, NameCollision, ParseError
from .normalizer import disjunct_cap, grid_from_json, grid_to_json
from .operators.registry import Registry
from .pipeline import (
    Choice, Par, PipelineExpr, Seq, Step, display_names, items, path_label,
)
from .sampling import draw_distinct
from .schema import Enum, Range, value_kind

SEP = "__"
DISCRIMINANT = "D"


def mangle(display: str, hp: str) -> str:
    return f"{display}{SEP}{hp}"


def discriminant_key(path: tuple) -> str:
    return f"{path_label(path)}{SEP}{DISCRIMINANT}"


def is_discriminant(name: str) -> bool:
    return name.endswith(SEP + DISCRIMINANT) and not name[: -len(SEP + DISCRIMINANT)].isidentifier()


def alternative_label(alt: PipelineExpr, path: tuple, names: dict) -> str:
    if isinstance(alt, Step):
        return names[path]
    return path_label(path)


# ---------------------------------------------------------------------------
# Space types


@dataclass(frozen=True)
class FlatSpace:
    """Disjunction of flat grids over mangled names."""

    disjuncts: tuple
    backend = "flat"

    def __post_init__(self):
        object.__setattr__(self, "disjuncts", tuple(dict(g) for g in self.disjuncts))

    def __len__(self):
        return len(self.disjuncts)

    def __iter__(self):
        return iter(self.disjuncts)

    def flat(self) -> FlatSpace:
        return self


@dataclass(frozen=True)
class GridSpace(FlatSpace):
    """Flat space whose dimensions are all categorical."""

    backend = "grid"

    def __post_init__(self):
        super().__post_init__()
        for g in self.disjuncts:
            for k, d in g.items():
                if not isinstance(d, Enum):
                    raise ValueError(f"grid dimension {k!r} is not categorical: {d}")

    def points(self, disjunct: dict):
        """Every point of one disjunct, row-major over sorted keys."""
        keys = sorted(disjunct)
        for combo in itertools.product(*(disjunct[k].values for k in keys)):
            yield dict(zip(keys, combo))

    def size(self) -> int:
        return sum(math.prod(len(d.values) for d in g.values()) for g in self.disjuncts)


@dataclass(frozen=True)
class NestedLeaf:
    """A step's normalized disjunction (grids may carry a discriminant)."""

    grids: tuple

    def __post_init__(self):
        object.__setattr__(self, "grids", tuple(dict(g) for g in self.grids))


@dataclass(frozen=True)
class NestedRecord:
    """Steps of a sequence or parallel node, by position."""

    entries: tuple
    fixed: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NestedChoice:
    key: str
    alternatives: tuple
    fixed: dict = field(default_factory=dict)


NestedNode = Union[NestedLeaf, NestedRecord, NestedChoice]


@dataclass(frozen=True)
class NestedSpace:
    root: NestedRecord
    backend = "nested"

    def flat(self) -> FlatSpace:
        return FlatSpace(tuple(flatten_nested(self.root)))


def flatten_nested(node: NestedNode, cap: int | None = None) -> list[dict]:
    """Expand a nested space into the equivalent flat disjunct list."""
    cap = disjunct_cap(cap)
    if isinstance(node, NestedLeaf):
        out = [dict(g) for g in node.grids]
    elif isinstance(node, NestedRecord):
        out = _product([flatten_nested(e, cap) for e in node.entries], cap)
    else:
        out = [g for alt in node.alternatives for g in flatten_nested(alt, cap)]
    if getattr(node, "fixed", None):
        out = [_merge(g, node.fixed) for g in out]
    return out


# ---------------------------------------------------------------------------
# Compilation


def _step_grids(step: Step, display: str, registry: Registry, cap) -> list[dict]:
    if step.bindings is not None:
        grids = [{k: Enum((v,)) for k, v in step.bindings}]
    else:
        space = registry[step.op].normalized(cap)
        if not len(space):
            raise EmptySpace(f"operator {step.op!r} admits no configuration")
        grids = space.disjuncts
    return [{mangle(display, k): d for k, d in g.items()} for g in grids]


def _merge(a: dict, b: dict) -> dict:
    clash = set(a) & set(b)
    if clash:
        raise NameCollision(f"mangled names collide: {sorted(clash)}")
    return {**a, **b}


def _product(lists: list[list[dict]], cap: int) -> list[dict]:
    n = math.prod(len(x) for x in lists)
    if n > cap:
        raise ExplosionError(f"{n} disjuncts exceed the cap of {cap}")
    out = []
    for combo in itertools.product(*lists):
        g: dict = {}
        for part in combo:
            g = _merge(g, part)
        out.append(g)
    return out


def _tag(grids: list[dict], key: str, label: str) -> list[dict]:
    return [_merge(g, {key: Enum((label,))}) for g in grids]


def _check_labels(node: Choice, path: tuple, names: dict):
    labels = [alternative_label(a, path + (j,), names) for j, a in enumerate(node.alternatives)]
    if len(set(labels)) != len(labels):
        raise NameCollision(f"choice at {path_label(path) or 'root'} has duplicate labels {labels}")
    return labels


def compile_flat(p: PipelineExpr, registry: Registry, cap: int | None = None) -> FlatSpace:
    cap = disjunct_cap(cap)
    names = display_names(p)

    def go(node, path) -> list[dict]:
        if isinstance(node, Step):
            return _step_grids(node, names[path], registry, cap)
        if isinstance(node, Choice):
            labels = _check_labels(node, path, names)
            key = discriminant_key(path)
            out = []
            for j, alt in enumerate(node.alternatives):
                out.extend(_tag(go(alt, path + (j,)), key, labels[j]))
                if len(out) > cap:
                    raise ExplosionError(f"{len(out)} disjuncts exceed the cap of {cap}")
            return out
        return _product([go(c, path + (i,)) for i, c in enumerate(items(node))], cap)

    return FlatSpace(tuple(go(p, ())))


def compile_grid(p: PipelineExpr, registry: Registry, cuts: int = 3, seed: int = 0,
                 cap: int | None = None) -> GridSpace:
    """Flat space with each continuous dimension replaced by ``cuts`` draws.

    Draws come from the dimension's distribution using ``seed``; a given
    (name, range) pair is sampled once and reused across disjuncts.
    """
    if cuts < 1:
        raise ValueError("cuts must be positive")
    flat = compile_flat(p, registry, cap)
    rng = np.random.default_rng(seed)
    cache: dict = {}
    out = []
    for g in flat.disjuncts:
        new = {}
        for k in sorted(g):
            d = g[k]
            if isinstance(d, Range):
                if (k, d) not in cache:
                    cache[(k, d)] = Enum(tuple(draw_distinct(d, cuts, rng)))
                d = cache[(k, d)]
            new[k] = d
        out.append(new)
    return GridSpace(tuple(out))


def compile_nested(p: PipelineExpr, registry: Registry, cap: int | None = None) -> NestedSpace:
    cap = disjunct_cap(cap)
    names = display_names(p)

    def go(node, path) -> NestedNode:
        if isinstance(node, Step):
            return NestedLeaf(tuple(_step_grids(node, names[path], registry, cap)))
        if isinstance(node, Choice):
            labels = _check_labels(node, path, names)
            key = discriminant_key(path)
            alts = []
            for j, alt in enumerate(node.alternatives):
                sub = go(alt, path + (j,))
                tag = {key: Enum((labels[j],))}
                if isinstance(sub, NestedLeaf):
                    sub = NestedLeaf(tuple(_merge(g, tag) for g in sub.grids))
                else:
                    sub = type(sub)(**{**sub.__dict__, "fixed": _merge(sub.fixed, tag)})
                alts.append(sub)
            return NestedChoice(key, tuple(alts))
        return NestedRecord(tuple(go(c, path + (i,)) for i, c in enumerate(items(node))))

    root = go(p, ())
    if not isinstance(root, NestedRecord) or isinstance(p, Choice):
        root = NestedRecord((root,))
    space = NestedSpace(root)
    # expanding checks the disjunct cap and name collisions across steps
    flatten_nested(root, cap)
    return space


def compile_space(p: PipelineExpr, registry: Registry, backend: str = "flat", cuts: int = 3,
                  seed: int = 0, cap: int | None = None):
    if backend == "flat":
        return compile_flat(p, registry, cap)
    if backend == "grid":
        return compile_grid(p, registry, cuts, seed, cap)
    if backend == "nested":
        return compile_nested(p, registry, cap)
    raise ValueError(f"unknown backend {backend!r}")


def cardinality(p: PipelineExpr, registry: Registry) -> int:
    """Number of flat disjuncts, counted directly over the expression tree."""
    if isinstance(p, Step):
        return 1 if p.bindings is not None else len(registry[p.op].normalized())
    if isinstance(p, Choice):
        return sum(cardinality(a, registry) for a in p.alternatives)
    return math.prod(cardinality(c, registry) for c in items(p))


# ---------------------------------------------------------------------------
# Membership


def grid_contains(grid: dict, point: dict) -> bool:
    if set(grid) != set(point):
        return False
    return all(point[k] in d for k, d in grid.items())


def space_contains(space, point: dict) -> bool:
    return any(grid_contains(g, point) for g in space.flat().disjuncts)


# ---------------------------------------------------------------------------
# Wire format


def _nested_to_json(node: NestedNode) -> dict:
    if isinstance(node, NestedLeaf):
        out: dict[str, Any] = {"grids": [grid_to_json(g) for g in node.grids]}
    elif isinstance(node, NestedRecord):
        out = {"steps": {str(i): _nested_to_json(e) for i, e in enumerate(node.entries)}}
    else:
        out = {"choice": node.key, "alternatives": [_nested_to_json(a) for a in node.alternatives]}
    if getattr(node, "fixed", None):
        out["fixed"] = grid_to_json(node.fixed)
    return out


def _nested_from_json(doc: dict, path: str) -> NestedNode:
    if not isinstance(doc, dict):
        raise ParseError(path or "/", "nested node must be an object")
    fixed = grid_from_json(doc["fixed"]) if "fixed" in doc else {}
    if "grids" in doc:
        return NestedLeaf(tuple(grid_from_json(g) for g in doc["grids"]))
    if "steps" in doc:
        steps = doc["steps"]
        order = sorted(steps, key=int)
        if order != [str(i) for i in range(len(order))]:
            raise ParseError(f"{path}/steps", "step keys must be 0..n-1")
        return NestedRecord(tuple(_nested_from_json(steps[k], f"{path}/steps/{k}") for k in order),
                            fixed)
    if "choice" in doc:
        alts = tuple(_nested_from_json(a, f"{path}/alternatives/{i}")
                     for i, a in enumerate(doc["alternatives"]))
        return NestedChoice(doc["choice"], alts, fixed)
    raise ParseError(path or "/", "expected grids, steps or choice")


def space_to_json(space) -> dict:
    if isinstance(space, NestedSpace):
        return {"backend": "nested", "space": _nested_to_json(space.root)}
    return {"backend": space.backend, "disjuncts": [grid_to_json(g) for g in space.disjuncts]}


def serialize_space(space, format: str | None = None) -> str:
    """Stable JSON text (sorted keys) for a compiled space."""
    if format is not None and format != space.backend:
        raise ValueError(f"space is {space.backend!r}, not {format!r}")
    if not len(space.flat()):
        raise EmptySpace("refusing to serialize an empty space")
    return json.dumps(space_to_json(space), indent=2, sort_keys=True) + "\n"


def space_from_json(doc: dict):
    backend = doc.get("backend")
    if backend == "nested":
        root = _nested_from_json(doc["space"], "/space")
        if not isinstance(root, NestedRecord):
            raise ParseError("/space", "nested space root must be a steps record")
        return NestedSpace(root)
    if backend in ("flat", "grid"):
        grids = tuple(grid_from_json(g) for g in doc["disjuncts"])
        return GridSpace(grids) if backend == "grid" else FlatSpace(grids)
    raise ParseError("/backend", f"unknown backend {backend!r}")


def parse_space(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} column {e.colno}", e.msg) from None
    try:
        return space_from_json(doc)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ParseError):
            raise
        raise ParseError("document", f"malformed space: {e}") from None


def point_to_json(point: dict) -> dict:
    return {k: point[k] for k in sorted(point)}


def check_point(point: Any) -> dict:
    if not isinstance(point, dict):
        raise ParseError("/", "a point must be a JSON object")
    for k, v in point.items():
        if value_kind(v) is None:
            raise ParseError(f"/{k}", f"unsupported value {v!r}")
    return point
