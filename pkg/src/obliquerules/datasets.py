"""Dataset container, CSV ingestion, and bundled synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Task


class DataError(Exception):
    """Raised for unreadable, malformed, or semantically invalid input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    task: Task
    n_skipped_rows: int = 0
    label_names: tuple[str, ...] = ()  # raw labels behind 0/1, classification only

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError("features must be n x d with one target per row")
        if X.shape[0] < 2:
            raise DataError("dataset has fewer than two usable rows")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("one feature name required per column")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def load_csv(path, target_column: str, task) -> Dataset:
    """Read a headered CSV into a Dataset.

    Rows containing any empty cell are skipped (counted in
    ``n_skipped_rows``); a non-empty cell that fails to parse as a number is
    an error reported with its line number.  Classification targets may be
    arbitrary strings but exactly two distinct values must occur; they map
    to {0, 1} in sorted order.
    """
    task = Task(task)
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header")
        target_idx = header.index(target_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != target_idx)

        rows: list[list[float]] = []
        raw_targets: list[str] = []
        line_numbers: list[int] = []
        skipped = 0
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise DataError(
                    f"{path}:{line_no}: expected {len(header)} cells, got {len(record)}"
                )
            cells = [c.strip() for c in record]
            if any(c == "" for c in cells):
                skipped += 1
                continue
            feats = []
            for i, cell in enumerate(cells):
                if i == target_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: non-numeric value {cell!r} "
                        f"in column {header[i]!r}"
                    ) from None
            rows.append(feats)
            raw_targets.append(cells[target_idx])
            line_numbers.append(line_no)

    if len(rows) < 2:
        raise DataError(f"{path}: fewer than two usable rows")

    X = np.asarray(rows, dtype=float)
    label_names: tuple[str, ...] = ()
    if task is Task.CLASSIFICATION:
        distinct = sorted(set(raw_targets))
        if len(distinct) != 2:
            raise DataError(
                f"{path}: classification target needs exactly 2 distinct labels, "
                f"found {len(distinct)}"
            )
        mapping = {distinct[0]: 0.0, distinct[1]: 1.0}
        y = np.array([mapping[t] for t in raw_targets])
        label_names = tuple(distinct)
    else:
        y = np.empty(len(raw_targets))
        for k, cell in enumerate(raw_targets):
            try:
                y[k] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}:{line_numbers[k]}: non-numeric regression "
                    f"target {cell!r} in column {target_column!r}"
                ) from None

    return Dataset(
        name=path.stem,
        feature_names=feature_names,
        X=X,
        y=y,
        task=task,
        n_skipped_rows=skipped,
        label_names=label_names,
    )


def write_csv(dataset: Dataset, path, target_column: str = "target"):
    """Write a Dataset back out; floats use shortest round-trip repr."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(dataset.feature_names) + [target_column])
        for row, target in zip(dataset.X, dataset.y):
            if dataset.task is Task.CLASSIFICATION and dataset.label_names:
                tcell = dataset.label_names[int(target)]
            else:
                tcell = repr(float(target))
            writer.writerow([repr(float(v)) for v in row] + [tcell])


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------


def _finish_classification(name, X, clean_labels, noise, rng) -> Dataset:
    y = clean_labels.astype(float)
    if noise > 0:
        flip = rng.random(y.shape[0]) < noise
        y = np.where(flip, 1.0 - y, y)
    names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
    return Dataset(name=name, feature_names=names, X=X, y=y,
                   task=Task.CLASSIFICATION, label_names=("0", "1"))


def make_oblique(n: int = 1000, d: int = 6, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Half-space target y = 1{x1 + x2 >= 0}; remaining features are noise."""
    if d < 2:
        raise ValueError("need at least 2 features")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    labels = X[:, 0] + X[:, 1] >= 0
    return _finish_classification("oblique", X, labels, noise, rng)


def make_rotated_box(n: int = 1000, d: int = 6, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Diamond target: y = 1 inside {|x1 + x2| <= 1 and |x1 - x2| <= 1}."""
    if d < 2:
        raise ValueError("need at least 2 features")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    labels = (np.abs(X[:, 0] + X[:, 1]) <= 1.0) & (np.abs(X[:, 0] - X[:, 1]) <= 1.0)
    return _finish_classification("rotated_box", X, labels, noise, rng)


def make_staircase(n: int = 1000, d: int = 6, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Axis-parallel-friendly target: y = 1{x2 >= s(x1)} with a 3-level staircase
    s(x1) = 1 for x1 < -0.5, 0 for -0.5 <= x1 < 0.5, -1 for x1 >= 0.5."""
    if d < 2:
        raise ValueError("need at least 2 features")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    step = np.where(X[:, 0] < -0.5, 1.0, np.where(X[:, 0] < 0.5, 0.0, -1.0))
    labels = X[:, 1] >= step
    return _finish_classification("staircase", X, labels, noise, rng)


SYNTHETIC_GENERATORS = {
    "oblique": make_oblique,
    "rotated-box": make_rotated_box,
    "staircase": make_staircase,
}
