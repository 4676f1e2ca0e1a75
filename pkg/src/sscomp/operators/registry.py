"""Operator specs and the registry that names them."""

from __future__ import annotations

import json
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from ..errors import DuplicateOperator, InvalidDefaults, ParseError, UnknownOperator
from ..normalizer import NormalizedSpace, normalize, strip_to_leading_record
from ..schema import AllOf, Record, Schema, schema_from_json, schema_to_json, validate_instance

TRANSFORMER = "transformer"
ESTIMATOR = "estimator"

_ENTRY_KEYS = {"hyperparams", "defaults", "kind", "impl"}


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    hyperparams: Schema
    defaults: Mapping = field(default_factory=dict)
    kind: str = ESTIMATOR
    impl: str | None = None

    def __post_init__(self):
        if not self.name.isidentifier():
            raise ValueError(f"operator name {self.name!r} is not an identifier")
        if self.kind not in (TRANSFORMER, ESTIMATOR):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        hp = self.hyperparams
        if not (isinstance(hp, Record) or (
                isinstance(hp, AllOf) and hp.children and isinstance(hp.children[0], Record))):
            raise ValueError(
                f"{self.name}: hyperparams must be a record, or allOf a record and constraints"
            )
        object.__setattr__(self, "defaults", dict(self.defaults))
        result = validate_instance(hp, self.defaults)
        if not result:
            raise InvalidDefaults(f"{self.name}: defaults rejected: {result}")

    @property
    def record(self) -> Record:
        hp = self.hyperparams
        return hp if isinstance(hp, Record) else hp.children[0]

    def hyperparameter_names(self) -> list[str]:
        return self.record.keys()

    def unconstrained(self) -> OperatorSpec:
        """Copy without side constraints (the leading record only)."""
        return replace(self, hyperparams=strip_to_leading_record(self.hyperparams))

    def normalized(self, cap: int | None = None) -> NormalizedSpace:
        return _normalize_cached(self.hyperparams, cap)

    def to_json(self) -> dict:
        out = {
            "hyperparams": schema_to_json(self.hyperparams),
            "defaults": dict(self.defaults),
            "kind": self.kind,
        }
        if self.impl is not None:
            out["impl"] = self.impl
        return out


@lru_cache(maxsize=256)
def _normalize_cached(schema: Schema, cap: int | None) -> NormalizedSpace:
    return normalize(schema, cap)


class Registry(Mapping):
    """Immutable name -> OperatorSpec mapping."""

    def __init__(self, specs: Mapping[str, OperatorSpec] | None = None):
        self._specs = dict(specs or {})

    def __getitem__(self, name: str) -> OperatorSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownOperator(f"operator {name!r} is not registered") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._specs)

    def __len__(self) -> int:
        return len(self._specs)

    def __repr__(self):
        return f"Registry({sorted(self._specs)})"

    def lookup(self, name: str) -> OperatorSpec:
        return self[name]

    def register(self, spec: OperatorSpec) -> Registry:
        if spec.name in self._specs:
            raise DuplicateOperator(f"operator {spec.name!r} is already registered")
        return Registry({**self._specs, spec.name: spec})

    def merge(self, other: Registry) -> Registry:
        out = self
        for spec in other.values():
            out = out.register(spec)
        return out

    def unconstrained(self) -> Registry:
        return Registry({k: v.unconstrained() for k, v in self._specs.items()})

    def to_json(self) -> dict:
        return {k: v.to_json() for k, v in self._specs.items()}


def register(registry: Registry, spec: OperatorSpec) -> Registry:
    return registry.register(spec)


def registry_from_json(doc: Any, source: str = "<registry>") -> Registry:
    if not isinstance(doc, dict):
        raise ParseError(source, "registry must be a JSON object")
    reg = Registry()
    for name, entry in doc.items():
        where = f"{source}:/{name}"
        if not isinstance(entry, dict):
            raise ParseError(where, "operator entry must be an object")
        unknown = sorted(set(entry) - _ENTRY_KEYS)
        if unknown:
            raise ParseError(where, f"unknown keys {unknown}")
        if "hyperparams" not in entry:
            raise ParseError(where, "missing hyperparams")
        schema = schema_from_json(entry["hyperparams"], f"/{name}/hyperparams")
        defaults = entry.get("defaults", {})
        if not isinstance(defaults, dict):
            raise ParseError(f"{where}/defaults", "defaults must be an object")
        try:
            spec = OperatorSpec(name, schema, defaults, entry.get("kind", ESTIMATOR),
                                entry.get("impl"))
        except ValueError as e:
            raise ParseError(where, str(e)) from None
        reg = reg.register(spec)
    return reg


def load_registry(path: str | Path) -> Registry:
    """Load a registry file; ``example`` and ``builtin`` name the bundled ones."""
    if str(path) in BUNDLED:
        return load_bundled(str(path))
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    return registry_from_json(doc, str(path))


BUNDLED = {"example": "example_ops.json", "builtin": "builtin_ops.json"}


def bundled_path(name: str):
    return resources.files("sscomp.operators") / "data" / BUNDLED[name]


def load_bundled(name: str) -> Registry:
    text = bundled_path(name).read_text()
    return registry_from_json(json.loads(text), f"<bundled {name}>")


def default_registry() -> Registry:
    """Running-example operators (compile-only) together with the built-ins."""
    return load_bundled("example").merge(load_bundled("builtin"))
