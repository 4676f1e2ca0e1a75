"""Map search points back to configured pipelines, and configurations to points."""

from __future__ import annotations

from collections.abc import Mapping

from .backends import (
    alternative_label, discriminant_key, grid_contains, is_discriminant, mangle, space_contains,
)
from .errors import (
    ConsistencyError, DecodeError, MissingHyperparameter, NotInSpace, UnknownDiscriminant,
)
from .operators.registry import Registry
from .pipeline import Choice, LifecycleState, PipelineExpr, Step, display_names, state, steps
from .schema import validate_instance


def _pairs(a: PipelineExpr, b: PipelineExpr | None, cls) -> list:
    """Flattened positions of ``a`` paired with the matching subtrees of ``b``."""
    if isinstance(a, cls):
        if b is None:
            return _pairs(a.left, None, cls) + _pairs(a.right, None, cls)
        if not isinstance(b, cls):
            raise NotInSpace(f"expected {cls.__name__.lower()} node, found {b}")
        return _pairs(a.left, b.left, cls) + _pairs(a.right, b.right, cls)
    return [(a, b)]


def _rebuild(a: PipelineExpr, children: list, cls):
    """Rebuild a same-combinator chain of ``a`` with new leaves in order."""
    it = iter(children)

    def go(node):
        if isinstance(node, cls):
            left = go(node.left)
            return cls(left, go(node.right))
        return next(it)

    return go(a)


def _step_keys(step: Step, registry: Registry) -> list[str]:
    if step.bindings is not None:
        return [k for k, _ in step.bindings]
    return registry[step.op].hyperparameter_names()


def decode_point(p: PipelineExpr, space, point: Mapping, registry: Registry) -> PipelineExpr:
    """Resolve every choice by its discriminant and configure every step.

    ``space`` may be ``None`` to skip the membership check. The result is
    validated against the registry's schemas; a failure there means the
    space admitted a point the schemas reject and is reported as a
    ``ConsistencyError``.
    """
    names = display_names(p)
    used: set = set()

    def go(node, path):
        if isinstance(node, Step):
            display = names[path]
            config = {}
            for hp in _step_keys(node, registry):
                key = mangle(display, hp)
                if key not in point:
                    raise MissingHyperparameter(f"point has no value for {key!r}")
                config[hp] = point[key]
                used.add(key)
            learned = node.learned if node.config == config else None
            return Step(node.op, config, learned, display)
        if isinstance(node, Choice):
            key = discriminant_key(path)
            if key not in point:
                raise UnknownDiscriminant(f"point has no discriminant {key!r}")
            used.add(key)
            for j, alt in enumerate(node.alternatives):
                if alternative_label(alt, path + (j,), names) == point[key]:
                    return go(alt, path + (j,))
            raise UnknownDiscriminant(f"{key}={point[key]!r} names no alternative")
        cls = type(node)
        kids = [go(c, path + (i,)) for i, (c, _) in enumerate(_pairs(node, None, cls))]
        return _rebuild(node, kids, cls)

    out = go(p, ())
    extra = sorted(set(point) - used)
    if extra:
        raise DecodeError(f"point has keys outside the selected path: {extra}")
    if space is not None and not space_contains(space, dict(point)):
        raise NotInSpace("point lies outside every disjunct of the space")
    _check_consistent(out, registry)
    return out


def _check_consistent(p: PipelineExpr, registry: Registry):
    names = display_names(p)
    for path, step in steps(p):
        display = names[path]
        result = validate_instance(registry[step.op].hyperparams, step.config)
        if not result:
            raise ConsistencyError(f"{display}: decoded configuration rejected: {result}",
                                   (display,) + result.path)


def _candidates(pl, node, path, names):
    """Every point fragment under which ``node`` instantiates ``pl``."""
    if isinstance(pl, Choice):
        for j, alt in enumerate(pl.alternatives):
            tag = {discriminant_key(path): alternative_label(alt, path + (j,), names)}
            for frag in _candidates(alt, node, path + (j,), names):
                yield {**tag, **frag}
        return
    if isinstance(pl, Step):
        if isinstance(node, Step) and node.op == pl.op and node.bindings is not None:
            yield {mangle(names[path], k): v for k, v in node.bindings}
        return
    try:
        pairs = _pairs(pl, node, type(pl))
    except NotInSpace:
        return
    yield from _product(pairs, path, names, 0)


def _product(pairs, path, names, i):
    if i == len(pairs):
        yield {}
        return
    pl, node = pairs[i]
    for head in _candidates(pl, node, path + (i,), names):
        for tail in _product(pairs, path, names, i + 1):
            yield {**head, **tail}


def encode_config(p: PipelineExpr, space, planned: PipelineExpr | None = None) -> dict:
    """The search point that decodes to the configured pipeline ``p``.

    With ``planned`` the discriminants come from matching ``p`` against
    the planned expression; otherwise from the disjunct that contains the
    configuration.
    """
    if state(p) < LifecycleState.TRAINABLE:
        raise NotInSpace("only fully configured, choice-free pipelines can be encoded")
    if planned is not None:
        names = display_names(planned)
        for point in _candidates(planned, p, (), names):
            if space_contains(space, point):
                return dict(sorted(point.items()))
        raise NotInSpace(f"{p} is not an instance of {planned} inside the space")
    names = display_names(p)
    point = {mangle(names[path], k): v for path, s in steps(p) for k, v in s.bindings}
    for g in space.flat().disjuncts:
        tags = {k: d.values[0] for k, d in g.items() if is_discriminant(k)}
        if grid_contains(g, {**point, **tags}):
            return dict(sorted({**point, **tags}.items()))
    raise NotInSpace(f"{p} lies outside every disjunct of the space")
