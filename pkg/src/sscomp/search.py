"""Random and exhaustive search over compiled spaces.

A trial whose decode, fit or predict raises gets the sentinel loss
``WORST`` (the largest finite float) instead of aborting the search.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from .backends import (
    GridSpace, NestedChoice, NestedLeaf, NestedRecord, NestedSpace, compile_space,
)
from .decode import decode_point
from .errors import ConfigError, EmptySpace, ExplosionError
from .operators.dataset import Dataset
from .operators.registry import Registry, default_registry
from .pipeline import PipelineExpr, fit, parse_pipeline, predict, steps
from .sampling import draw_value

WORST = sys.float_info.max
ACCURACY = "accuracy"
ERROR_RATE = "error-rate"
DEFAULT_EVAL_CAP = 100_000


@dataclass(frozen=True)
class Objective:
    """Stratified k-fold cross-validation loss on a dataset.

    The loss is the mean per-fold error rate whichever metric is named;
    ``metric`` only selects how scores are reported.
    """

    data: Dataset
    metric: str = ACCURACY
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.metric not in (ACCURACY, ERROR_RATE):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.folds > len(self.data):
            raise ConfigError(f"{self.folds} folds exceed the {len(self.data)} rows")

    def score(self, loss: float) -> float:
        return 1.0 - loss if self.metric == ACCURACY else loss


def stratified_folds(y, folds: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays: rows of each class are shuffled, then dealt
    round-robin with one running counter so remainders land on the
    lowest-numbered folds."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    k = 0
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        for i in rng.permutation(idx):
            buckets[k % folds].append(int(i))
            k += 1
    return [np.array(sorted(b), dtype=int) for b in buckets]


def cross_validate(trainable: PipelineExpr, objective: Objective,
                   registry: Registry | None = None) -> float:
    """Mean per-fold error rate; training errors propagate."""
    registry = registry if registry is not None else default_registry()
    X, y = objective.data.X, np.asarray(objective.data.y)
    losses = []
    for test in stratified_folds(y, objective.folds, objective.seed):
        train = np.setdiff1d(np.arange(len(y)), test)
        model = fit(trainable, X[train], y[train], registry, seed=objective.seed)
        pred = predict(model, X[test], registry)
        losses.append(float(np.mean(pred != y[test])))
    return float(np.mean(losses))


# ---------------------------------------------------------------------------
# History


@dataclass(frozen=True)
class Trial:
    index: int
    point: dict
    loss: float
    status: str = "ok"
    message: str = ""
    duration: float = 0.0

    def __post_init__(self):
        if (self.status == "error") != (self.loss == WORST):
            raise ValueError("a trial has WORST loss exactly when it failed")

    @property
    def failed(self) -> bool:
        return self.status == "error"

    def to_json(self, timings: bool = False) -> dict:
        out = {"index": self.index, "point": self.point, "loss": self.loss,
               "status": self.status}
        if self.message:
            out["message"] = self.message
        if timings:
            out["duration"] = self.duration
        return out


@dataclass
class SearchHistory:
    trials: list = field(default_factory=list)

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def best(self) -> int | None:
        """Index of the lowest loss, earliest on ties."""
        if not self.trials:
            return None
        return min(range(len(self.trials)), key=lambda i: (self.trials[i].loss, i))

    @property
    def best_trial(self) -> Trial | None:
        return None if self.best is None else self.trials[self.best]

    @property
    def best_loss(self) -> float | None:
        t = self.best_trial
        return None if t is None else t.loss

    @property
    def failures(self) -> int:
        return sum(t.failed for t in self.trials)

    def convergence(self) -> list[tuple[int, float]]:
        out, best = [], math.inf
        for t in self.trials:
            best = min(best, t.loss)
            out.append((t.index, best))
        return out

    def convergence_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "best_loss"])
        for i, b in self.convergence():
            w.writerow([i, repr(b)])
        return buf.getvalue()

    def summary(self) -> dict:
        t = self.best_trial
        return {"summary": True, "trials": len(self), "failures": self.failures,
                "best": self.best, "best_loss": None if t is None else t.loss,
                "best_point": None if t is None else t.point}

    def to_jsonl(self, timings: bool = False) -> str:
        lines = [json.dumps(t.to_json(timings), sort_keys=True) for t in self.trials]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> SearchHistory:
        trials = []
        for line in text.splitlines():
            doc = json.loads(line)
            if doc.get("summary"):
                continue
            trials.append(Trial(doc["index"], doc["point"], doc["loss"], doc["status"],
                                doc.get("message", ""), doc.get("duration", 0.0)))
        return cls(trials)


# ---------------------------------------------------------------------------
# Sampling


def _sample_grid(grid: dict, rng) -> dict:
    return {k: draw_value(grid[k], rng) for k in sorted(grid)}


def _sample_nested(node, rng) -> dict:
    if isinstance(node, NestedLeaf):
        out = _sample_grid(node.grids[int(rng.integers(len(node.grids)))], rng)
    elif isinstance(node, NestedRecord):
        out = {}
        for entry in node.entries:
            out.update(_sample_nested(entry, rng))
    else:
        alt = node.alternatives[int(rng.integers(len(node.alternatives)))]
        out = _sample_nested(alt, rng)
    fixed = getattr(node, "fixed", None) or {}
    out.update(_sample_grid(fixed, rng))
    return out


def sample_point(space, rng: np.random.Generator) -> dict:
    """Draw one point.

    Flat and grid spaces pick a disjunct uniformly. Nested spaces pick
    uniformly at each choice, then uniformly among the chosen leaf's grids.
    """
    if isinstance(space, NestedSpace):
        if not space.root.entries:
            raise EmptySpace("nested space has no steps")
        return dict(sorted(_sample_nested(space.root, rng).items()))
    if not len(space.disjuncts):
        raise EmptySpace("cannot sample from an empty space")
    grid = space.disjuncts[int(rng.integers(len(space.disjuncts)))]
    return _sample_grid(grid, rng)


# ---------------------------------------------------------------------------
# Drivers

Evaluator = Callable[[PipelineExpr], float]


def _evaluator(objective, registry: Registry) -> Evaluator:
    if isinstance(objective, Objective):
        return lambda trainable: cross_validate(trainable, objective, registry)
    if callable(objective):
        return objective
    raise TypeError("objective must be an Objective or a callable")


def _require_impls(p: PipelineExpr, registry: Registry):
    missing = sorted({s.op for _, s in steps(p) if s.learned is None and registry[s.op].impl is None})
    if missing:
        raise ConfigError(f"operators without an implementation: {missing}")


def _run(p, space, point, index, evaluate, registry) -> Trial:
    start = time.perf_counter()
    try:
        trainable = decode_point(p, space, point, registry)
        loss = float(evaluate(trainable))
        if not math.isfinite(loss):
            raise ValueError(f"objective returned {loss}")
        return Trial(index, point, loss, duration=time.perf_counter() - start)
    except Exception as e:  # every failure becomes a WORST trial
        msg = f"{type(e).__name__}: {e}"
        return Trial(index, point, WORST, "error", msg, time.perf_counter() - start)


def random_search(p: PipelineExpr, space, objective, iters: int, seed: int = 0,
                  registry: Registry | None = None) -> SearchHistory:
    """``iters`` independent trials; trial ``i`` draws from ``default_rng([seed, i])``.

    ``objective`` is an ``Objective`` or any callable mapping a trainable
    pipeline to a loss.
    """
    registry = registry if registry is not None else default_registry()
    if isinstance(objective, Objective):
        _require_impls(p, registry)
    evaluate = _evaluator(objective, registry)
    history = SearchHistory()
    for i in range(iters):
        point = sample_point(space, np.random.default_rng([seed, i]))
        history.trials.append(_run(p, space, point, i, evaluate, registry))
    return history


def grid_points(space: GridSpace):
    for g in space.disjuncts:
        yield from space.points(g)


def grid_search(p: PipelineExpr, space: GridSpace, objective, registry: Registry | None = None,
                cap: int = DEFAULT_EVAL_CAP) -> SearchHistory:
    """Evaluate every grid point once, disjunct by disjunct, row-major over sorted keys."""
    if not isinstance(space, GridSpace):
        raise TypeError("grid_search needs a GridSpace")
    registry = registry if registry is not None else default_registry()
    n = space.size()
    if n > cap:
        raise ExplosionError(f"{n} grid points exceed the evaluation cap of {cap}")
    if isinstance(objective, Objective):
        _require_impls(p, registry)
    evaluate = _evaluator(objective, registry)
    history = SearchHistory()
    for i, point in enumerate(grid_points(space)):
        history.trials.append(_run(p, space, point, i, evaluate, registry))
    return history


# ---------------------------------------------------------------------------
# Estimator wrapper


class CashSearch(ClassifierMixin, BaseEstimator):
    """Joint operator selection and tuning as a scikit-learn classifier.

    ``fit`` compiles ``planned`` (a pipeline or expression text), searches
    with cross-validation on the training data and refits the best
    configuration on all of it.
    """

    def __init__(self, planned: Any = None, registry: Registry | None = None, strategy: str = "random",
                 backend: str = "flat", iters: int = 50, cuts: int = 3, folds: int = 5,
                 seed: int = 0, constraints: bool = True):
        self.planned = planned
        self.registry = registry
        self.strategy = strategy
        self.backend = backend
        self.iters = iters
        self.cuts = cuts
        self.folds = folds
        self.seed = seed
        self.constraints = constraints

    def _registry(self) -> Registry:
        reg = self.registry if self.registry is not None else default_registry()
        return reg if self.constraints else reg.unconstrained()

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.planned is None:
            raise ConfigError("CashSearch needs a planned pipeline")
        reg = self._registry()
        p = self.planned
        if isinstance(p, str):
            p = parse_pipeline(p, reg)
        objective = Objective(Dataset(X, y), folds=self.folds, seed=self.seed)
        if self.strategy == "grid":
            space = compile_space(p, reg, "grid", self.cuts, self.seed)
            history = grid_search(p, space, objective, reg)
        elif self.strategy == "random":
            space = compile_space(p, reg, self.backend, self.cuts, self.seed)
            history = random_search(p, space, objective, self.iters, self.seed, reg)
        else:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        best = history.best_trial
        if best is None or best.failed:
            raise ConfigError("no trial succeeded")
        trainable = decode_point(p, space, best.point, reg)
        self.history_ = history
        self.best_point_ = best.point
        self.best_loss_ = best.loss
        self.best_pipeline_ = fit(trainable, X, y, reg, seed=self.seed)
        self.classes_ = np.unique(y)
        return self

    def predict(self, X):
        check_is_fitted(self, "best_pipeline_")
        return predict(self.best_pipeline_, np.asarray(X, dtype=float), self._registry())
