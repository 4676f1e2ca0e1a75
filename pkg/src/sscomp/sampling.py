"""Random draws from grid dimensions (shared by the grid backend and search)."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DegenerateRange, UnboundedDimension
from .schema import INTEGER, LOGUNIFORM, Enum, Range

_MAX_RETRIES = 100
_ENUMERABLE = 1_000_000


def _check_bounded(r: Range):
    if not r.bounded:
        raise UnboundedDimension(f"cannot sample from unbounded range {r}")


def _draw_real(r: Range, rng: np.random.Generator) -> float:
    for _ in range(_MAX_RETRIES):
        if r.lo == r.hi:
            return float(r.lo)
        if r.distribution == LOGUNIFORM:
            v = math.exp(rng.uniform(math.log(r.lo), math.log(r.hi)))
        else:
            v = float(rng.uniform(r.lo, r.hi))
        if v in r:
            return v
    raise UnboundedDimension(f"could not draw an interior point of {r}")


def _draw_integer(r: Range, rng: np.random.Generator) -> int:
    lo, hi = r.integer_bounds()
    if r.distribution == LOGUNIFORM:
        # continuous log-uniform over [lo - 1/2, hi + 1/2], rounded
        a, b = max(lo - 0.5, lo / 2), hi + 0.5
        v = int(round(math.exp(rng.uniform(math.log(a), math.log(b)))))
        return min(max(v, lo), hi)
    return int(rng.integers(lo, hi + 1))


def draw_value(dim, rng: np.random.Generator):
    """One value from a dimension, as a native Python scalar."""
    if isinstance(dim, Enum):
        return dim.values[int(rng.integers(len(dim.values)))]
    _check_bounded(dim)
    if dim.kind == INTEGER:
        return _draw_integer(dim, rng)
    return _draw_real(dim, rng)


def _integer_weights(r: Range, lo: int, hi: int) -> np.ndarray:
    ks = np.arange(lo, hi + 1, dtype=float)
    if r.distribution == LOGUNIFORM:
        left = np.maximum(ks - 0.5, ks / 2)
        w = np.log((ks + 0.5) / left)
    else:
        w = np.ones_like(ks)
    return w / w.sum()


def draw_distinct(r: Range, cuts: int, rng: np.random.Generator) -> list:
    """``cuts`` distinct values from ``r``, sorted ascending.

    Integer ranges with fewer than ``cuts`` members yield all of them and
    emit a ``DegenerateRange`` warning.
    """
    if cuts < 1:
        raise ValueError("cuts must be positive")
    _check_bounded(r)
    if r.kind == INTEGER:
        lo, hi = r.integer_bounds()
        count = hi - lo + 1
        if count <= cuts:
            if count < cuts:
                warnings.warn(f"{r} has only {count} integer values (< {cuts} cuts)",
                              DegenerateRange, stacklevel=2)
            return list(range(lo, hi + 1))
        if count <= _ENUMERABLE:
            picks = rng.choice(count, size=cuts, replace=False, p=_integer_weights(r, lo, hi))
            return sorted(int(lo + k) for k in picks)
    if r.lo == r.hi:
        return [r.lo]
    values: list = []
    for _ in range(_MAX_RETRIES * cuts):
        v = draw_value(r, rng)
        if v not in values:
            values.append(v)
        if len(values) == cuts:
            break
    return sorted(values)
