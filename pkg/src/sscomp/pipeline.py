"""Pipeline expressions: ``>>`` (sequence), ``&`` (parallel), ``|`` (choice).

Expressions are immutable. Each step moves through three lifecycle
states: *planned* (no hyperparameters bound), *trainable* (configured)
and *trained* (carries a fitted model). ``configure`` and ``fit`` return
new expressions and never modify their argument.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Iterator

import numpy as np

from .errors import (
    ArityError, ConfigError, LifecycleError, ParseError, SchemaViolation, TrainingError,
)
from .operators.builtins import make_estimator
from .operators.registry import TRANSFORMER, Registry
from .schema import validate_instance


class LifecycleState(IntEnum):
    PLANNED = 0
    TRAINABLE = 1
    TRAINED = 2

    def __str__(self):
        return self.name.lower()


class PipelineExpr:
    __slots__ = ()

    def __rshift__(self, other: PipelineExpr) -> Seq:
        return seq(self, other)

    def __and__(self, other: PipelineExpr) -> Par:
        return par(self, other)

    def __or__(self, other: PipelineExpr) -> Choice:
        if isinstance(self, Choice):
            return Choice(self.alternatives + (other,))
        return choice(self, other)


@dataclass(frozen=True)
class Step(PipelineExpr):
    """One operator occurrence.

    ``name`` is the display name used for name mangling; it defaults to
    the operator name.
    """

    op: str
    bindings: Any = None
    learned: Any = None
    name: str | None = None

    def __post_init__(self):
        if self.bindings is not None:
            items = self.bindings.items() if isinstance(self.bindings, Mapping) else self.bindings
            object.__setattr__(self, "bindings", tuple(sorted(items)))
        if self.name is None:
            object.__setattr__(self, "name", self.op)

    @property
    def config(self) -> dict | None:
        return None if self.bindings is None else dict(self.bindings)

    def __repr__(self):
        parts = [repr(self.op)]
        if self.name != self.op:
            parts.append(f"name={self.name!r}")
        if self.bindings is not None:
            parts.append(f"bindings={self.config!r}")
        if self.learned is not None:
            parts.append("trained")
        return f"Step({', '.join(parts)})"

    def __str__(self):
        if self.bindings is None:
            return self.name
        return f"{self.name}({', '.join(f'{k}={v!r}' for k, v in self.bindings)})"


@dataclass(frozen=True)
class Seq(PipelineExpr):
    left: PipelineExpr
    right: PipelineExpr

    def __str__(self):
        return " >> ".join(_str_in(c, Seq) for c in items(self))


@dataclass(frozen=True)
class Par(PipelineExpr):
    left: PipelineExpr
    right: PipelineExpr

    def __str__(self):
        return " & ".join(_str_in(c, Par) for c in items(self))


@dataclass(frozen=True)
class Choice(PipelineExpr):
    alternatives: tuple

    def __post_init__(self):
        alts = tuple(self.alternatives)
        if len(alts) < 2:
            raise ArityError(f"choice needs at least 2 alternatives, got {len(alts)}")
        for a in alts:
            if not isinstance(a, PipelineExpr):
                raise TypeError(f"{a!r} is not a pipeline expression")
        object.__setattr__(self, "alternatives", alts)

    def __str__(self):
        return " | ".join(_str_in(c, Choice) for c in self.alternatives)


_PRECEDENCE = {Choice: 0, Par: 1, Seq: 2, Step: 3}


def _str_in(child, parent_cls) -> str:
    s = str(child)
    if _PRECEDENCE[type(child)] <= _PRECEDENCE[parent_cls]:
        return f"({s})"
    return s


def seq(a: PipelineExpr, b: PipelineExpr) -> Seq:
    return Seq(a, b)


def par(a: PipelineExpr, b: PipelineExpr) -> Par:
    return Par(a, b)


def choice(*alternatives: PipelineExpr) -> Choice:
    return Choice(tuple(alternatives))


def items(node: PipelineExpr) -> list[PipelineExpr]:
    """Children with chains of the same combinator flattened.

    ``(a >> b) >> c`` and ``a >> (b >> c)`` both yield ``[a, b, c]``; these
    positions are the step indices used in mangled names and nested spaces.
    """
    if isinstance(node, Choice):
        return list(node.alternatives)
    if isinstance(node, (Seq, Par)):
        cls = type(node)
        out = []
        for c in (node.left, node.right):
            out.extend(items(c) if isinstance(c, cls) else [c])
        return out
    return []


def walk(node: PipelineExpr, path: tuple = ()) -> Iterator[tuple[tuple, PipelineExpr]]:
    """Pre-order (path, node) pairs; same-combinator chains count as one node."""
    yield path, node
    for i, c in enumerate(items(node)):
        yield from walk(c, path + (i,))


def steps(node: PipelineExpr) -> list[tuple[tuple, Step]]:
    return [(p, n) for p, n in walk(node) if isinstance(n, Step)]


def display_names(node: PipelineExpr) -> dict[tuple, str]:
    """Unique display name per step path; repeated names get ``_1``, ``_2``..."""
    found = steps(node)
    counts = Counter(s.name for _, s in found)
    seen: Counter = Counter()
    out = {}
    for path, s in found:
        if counts[s.name] > 1:
            seen[s.name] += 1
            out[path] = f"{s.name}_{seen[s.name]}"
        else:
            out[path] = s.name
    return out


def path_label(path: tuple) -> str:
    return "_".join(str(i) for i in path)


def state(p: PipelineExpr) -> LifecycleState:
    """Lifecycle state: a composite is only as bound as its least-bound step."""
    if isinstance(p, Step):
        if p.bindings is None:
            return LifecycleState.PLANNED
        if p.learned is None:
            return LifecycleState.TRAINABLE
        return LifecycleState.TRAINED
    if isinstance(p, Choice):
        return LifecycleState.PLANNED
    return min(state(p.left), state(p.right))


def shape(p: PipelineExpr):
    """Topology with steps reduced to their display names."""
    if isinstance(p, Step):
        return p.name
    if isinstance(p, Choice):
        return ("choice",) + tuple(shape(a) for a in p.alternatives)
    return (type(p).__name__.lower(), shape(p.left), shape(p.right))


def map_steps(p: PipelineExpr, f, path: tuple = ()) -> PipelineExpr:
    """Rebuild ``p`` with ``f(path, step)`` applied to every step."""
    if isinstance(p, Step):
        return f(path, p)
    if isinstance(p, Choice):
        return Choice(tuple(map_steps(a, f, path + (i,)) for i, a in enumerate(p.alternatives)))
    # number the flattened positions in order so paths agree with ``walk``
    cls = type(p)
    counter = iter(range(len(items(p))))

    def rebuild(node):
        if isinstance(node, cls):
            left = rebuild(node.left)
            return cls(left, rebuild(node.right))
        return map_steps(node, f, path + (next(counter),))

    return rebuild(p)


# ---------------------------------------------------------------------------
# Configuration


def configure_step(step: Step, bindings: Mapping, registry: Registry, path=()) -> Step:
    spec = registry[step.op]
    known = set(spec.hyperparameter_names())
    unknown = sorted(set(bindings) - known)
    if unknown:
        raise SchemaViolation(f"{step.name}: unknown hyperparameters {unknown}", path)
    config = {**spec.defaults, **(step.config or {}), **dict(bindings)}
    result = validate_instance(spec.hyperparams, config)
    if not result:
        raise SchemaViolation(f"{step.name}: {result}", tuple(path) + result.path)
    return Step(step.op, config, None, step.name)


def configure(p: PipelineExpr, bindings: Mapping, registry: Registry) -> PipelineExpr:
    """Bind hyperparameters, returning a new expression.

    For a single step ``bindings`` holds hyperparameter values. For a
    composite it maps display names to such records; unnamed steps keep
    their current bindings. Unbound hyperparameters take their defaults.
    """
    if isinstance(p, Step):
        return configure_step(p, bindings, registry)
    names = display_names(p)
    by_name = {v: k for k, v in names.items()}
    unknown = sorted(set(bindings) - set(by_name))
    if unknown:
        raise SchemaViolation(f"no steps named {unknown}")
    wanted = {by_name[n]: b for n, b in bindings.items()}

    def bind(path, step):
        if path in wanted:
            return configure_step(step, wanted[path], registry, (names[path],))
        return step

    return map_steps(p, bind)


def configure_all(p: PipelineExpr, registry: Registry) -> PipelineExpr:
    """Give every unconfigured step its defaults."""
    def bind(path, step):
        return configure_step(step, {}, registry) if step.bindings is None else step

    return map_steps(p, bind)


# ---------------------------------------------------------------------------
# Training and inference


def _require_impl(p: PipelineExpr, registry: Registry):
    for _, s in steps(p):
        if s.learned is None and registry[s.op].impl is None:
            raise ConfigError(f"operator {s.op!r} has no implementation (compile-only)")


def fit(p: PipelineExpr, X, y, registry: Registry, seed: int | None = 0) -> PipelineExpr:
    """Train a trainable pipeline; returns a new, trained expression.

    Data flows left to right through sequences and is copied into each
    parallel branch. Steps that are already trained are kept frozen.
    """
    st = state(p)
    if st < LifecycleState.TRAINABLE:
        raise LifecycleError(f"cannot fit a {st} pipeline; bind its choices and hyperparameters")
    _require_impl(p, registry)
    trained, _ = _fit(p, X, np.asarray(y), registry, seed, need_output=False)
    return trained


def _fit(node, X, y, registry, seed, need_output):
    if isinstance(node, Step):
        if node.learned is not None:
            return node, (_apply_step(node, X, registry) if need_output else None)
        spec = registry[node.op]
        try:
            est = make_estimator(spec.impl, node.config, seed)
            est.fit(X, y)
            out = None
            if need_output:
                out = est.transform(X) if spec.kind == TRANSFORMER else est.predict(X)
        except TrainingError:
            raise
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            raise TrainingError(f"{node.name}: {e}") from e
        return Step(node.op, node.bindings, est, node.name), out
    if isinstance(node, Seq):
        left, out = _fit(node.left, X, y, registry, seed, need_output=True)
        right, out = _fit(node.right, out, y, registry, seed, need_output)
        return Seq(left, right), out
    if isinstance(node, Par):
        left, a = _fit(node.left, X, y, registry, seed, need_output)
        right, b = _fit(node.right, X, y, registry, seed, need_output)
        return Par(left, right), ((a, b) if need_output else None)
    raise LifecycleError("cannot fit an unresolved choice")


def _apply_step(step: Step, X, registry: Registry | None):
    est = step.learned
    kind = registry[step.op].kind if registry is not None else None
    if kind == TRANSFORMER or (kind is None and not hasattr(est, "predict")):
        return est.transform(X)
    return est.predict(X)


def _apply(node, X, registry):
    if isinstance(node, Step):
        try:
            return _apply_step(node, X, registry)
        except TrainingError:
            raise
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            raise TrainingError(f"{node.name}: {e}") from e
    if isinstance(node, Seq):
        return _apply(node.right, _apply(node.left, X, registry), registry)
    if isinstance(node, Par):
        return (_apply(node.left, X, registry), _apply(node.right, X, registry))
    raise LifecycleError("cannot apply an unresolved choice")


def _require_trained(p: PipelineExpr, what: str):
    st = state(p)
    if st != LifecycleState.TRAINED:
        raise LifecycleError(f"cannot {what} with a {st} pipeline; fit it first")


def predict(p: PipelineExpr, X, registry: Registry | None = None) -> np.ndarray:
    _require_trained(p, "predict")
    out = _apply(p, X, registry)
    if isinstance(out, tuple) or np.ndim(out) != 1:
        raise TrainingError("pipeline does not end in an estimator")
    return out


def transform(p: PipelineExpr, X, registry: Registry | None = None):
    _require_trained(p, "transform")
    return _apply(p, X, registry)


# ---------------------------------------------------------------------------
# Serialization


def pipeline_to_json(p: PipelineExpr) -> dict:
    if isinstance(p, Step):
        out: dict[str, Any] = {"step": p.op}
        if p.name != p.op:
            out["name"] = p.name
        if p.bindings is not None:
            out["bindings"] = p.config
        return out
    if isinstance(p, Choice):
        return {"choice": [pipeline_to_json(a) for a in p.alternatives]}
    tag = "seq" if isinstance(p, Seq) else "par"
    # left-associated chains are written flat; parsing folds them back to the left
    spine, node = [], p
    while isinstance(node, type(p)):
        spine.append(node.right)
        node = node.left
    spine.append(node)
    return {tag: [pipeline_to_json(c) for c in reversed(spine)]}


def pipeline_from_json(doc: Any, registry: Registry | None = None, path: str = "") -> PipelineExpr:
    where = path or "/"
    if not isinstance(doc, dict):
        raise ParseError(where, "pipeline node must be an object")
    tags = [t for t in ("step", "seq", "par", "choice") if t in doc]
    if len(tags) != 1:
        raise ParseError(where, "node needs exactly one of step/seq/par/choice")
    tag = tags[0]
    allowed = {"step", "name", "bindings"} if tag == "step" else {tag}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ParseError(where, f"unknown keys {unknown}")
    if tag == "step":
        op = doc["step"]
        if not isinstance(op, str):
            raise ParseError(f"{path}/step", "operator name must be a string")
        if registry is not None:
            registry[op]
        name = doc.get("name", op)
        bindings = doc.get("bindings")
        step = Step(op, None, None, name)
        if bindings is not None:
            if not isinstance(bindings, dict):
                raise ParseError(f"{path}/bindings", "bindings must be an object")
            if registry is not None:
                return configure_step(step, bindings, registry, (name,))
            step = Step(op, bindings, None, name)
        return step
    children = doc[tag]
    if not isinstance(children, list) or len(children) < 2:
        raise ParseError(f"{path}/{tag}", f"{tag} needs a list of at least 2 nodes")
    nodes = [pipeline_from_json(c, registry, f"{path}/{tag}/{i}") for i, c in enumerate(children)]
    if tag == "choice":
        return Choice(tuple(nodes))
    cls = Seq if tag == "seq" else Par
    out = nodes[0]
    for n in nodes[1:]:
        out = cls(out, n)
    return out


_TOKEN = re.compile(r"\s*(?:(>>)|([&|()])|([A-Za-z_][A-Za-z0-9_]*))")


def parse_expression(text: str, registry: Registry | None = None) -> PipelineExpr:
    """Parse ``PCA >> (J48 | LR)``-style text.

    Precedence follows Python: ``>>`` binds tighter than ``&``, which binds
    tighter than ``|``.
    """
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"column {pos + 1}", f"unexpected character {text[pos]!r}")
        tokens.append((m.group(1) or m.group(2) or m.group(3), m.start(m.lastindex) + 1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    i = 0

    def peek():
        return tokens[i][0] if i < len(tokens) else None

    def take(expected=None):
        nonlocal i
        if i >= len(tokens):
            raise ParseError("end of input", f"expected {expected or 'an operator'}")
        tok, col = tokens[i]
        if expected is not None and tok != expected:
            raise ParseError(f"column {col}", f"expected {expected!r}, got {tok!r}")
        i += 1
        return tok, col

    def atom():
        tok, col = take()
        if tok == "(":
            e = alt()
            take(")")
            return e
        if not (tok[0].isalpha() or tok[0] == "_"):
            raise ParseError(f"column {col}", f"expected an operator, got {tok!r}")
        if registry is not None:
            registry[tok]
        return Step(tok)

    def chain(sub, op, build):
        e = sub()
        while peek() == op:
            take(op)
            e = build(e, sub())
        return e

    def sequence():
        return chain(atom, ">>", Seq)

    def parallel():
        return chain(sequence, "&", Par)

    def alt():
        first = parallel()
        alts = [first]
        while peek() == "|":
            take("|")
            alts.append(parallel())
        return first if len(alts) == 1 else Choice(tuple(alts))

    expr = alt()
    if i != len(tokens):
        raise ParseError(f"column {tokens[i][1]}", f"unexpected {tokens[i][0]!r}")
    return expr


def parse_pipeline(text: str, registry: Registry | None = None) -> PipelineExpr:
    """Parse a pipeline file: a JSON tree, or combinator expression text."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"line {e.lineno} column {e.colno}", e.msg) from None
        return pipeline_from_json(doc, registry)
    return parse_expression(text, registry)


def serialize_pipeline(p: PipelineExpr) -> str:
    return json.dumps(pipeline_to_json(p), indent=2, sort_keys=True)
