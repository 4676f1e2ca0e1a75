"""CSV datasets: header row, numeric feature columns, label in the last column."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ParseError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()
    label_name: str = "label"

    def __len__(self):
        return len(self.y)


def _parse_labels(raw: list[str]) -> np.ndarray:
    for cast in (int, float):
        try:
            return np.array([cast(v) for v in raw])
        except ValueError:
            continue
    return np.array(raw)


def read_csv(lines, source: str = "<csv>") -> Dataset:
    rows = list(csv.reader(lines))
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(source, "empty dataset")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise ParseError(f"{source}:1", "need at least one feature column and a label column")
    X = np.empty((len(body), len(header) - 1))
    labels = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{source}:{i}", f"expected {len(header)} fields, got {len(row)}")
        try:
            X[i - 2] = [float(v) for v in row[:-1]]
        except ValueError as e:
            raise ParseError(f"{source}:{i}", f"non-numeric feature: {e}") from None
        labels.append(row[-1].strip())
    return Dataset(X, _parse_labels(labels), tuple(header[:-1]), header[-1])


def load_csv(path: str | Path) -> Dataset:
    if str(path) in BUNDLED_DATA:
        path = bundled_data_path(str(path))
        with path.open() as fh:
            return read_csv(fh, str(path))
    with open(path, newline="") as fh:
        return read_csv(fh, str(path))


def write_csv(data: Dataset, path: str | Path):
    names = list(data.feature_names) or [f"x{i}" for i in range(data.X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + [data.label_name])
        for xs, label in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xs] + [label])


BUNDLED_DATA = {"ablation": "ablation.csv"}


def bundled_data_path(name: str):
    return resources.files("sscomp.operators") / "data" / BUNDLED_DATA[name]


def make_ablation_data(n: int = 120, seed: int = 0, noise: float = 6.0,
                       margin: float = 0.1) -> Dataset:
    """Three classes separated along ``x0`` plus three distractor columns.

    Class ``c`` puts ``x0`` within ``1 - margin`` of ``2 * (c - 1)``, so a
    gap of ``2 * margin`` separates neighbouring classes. The other columns
    are Gaussian noise scaled by 3 (``x1``) and ``noise`` (``n0``, ``n1``).
    Linear and neighbour models nearly separate it when well tuned; a
    single split cannot.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    x0 = 2.0 * (y - 1) + rng.uniform(margin - 1, 1 - margin, n)
    x1 = rng.normal(0, 1, n)
    distract = rng.normal(0, 1, (n, 2))
    X = np.column_stack([x0, 3.0 * x1, noise * distract])
    return Dataset(X, y, ("x0", "x1", "n0", "n1"), "label")
