"""Named tabular datasets and their CSV form.

CSV layout: a header row, one target column, and every other column a
numeric predictor in file order.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InsufficientDataError, SchemaError, ValidationError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    target_name: str = "y"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1:
            raise ValidationError(f"expected 2-D X and 1-D y, got {X.shape} and {y.shape}")
        if X.shape[0] < 1:
            raise InsufficientDataError("dataset has no rows")
        if X.shape[0] != y.shape[0]:
            raise SchemaError(f"{X.shape[0]} rows in X but {y.shape[0]} targets")
        if len(self.feature_names) != X.shape[1]:
            raise SchemaError(f"{len(self.feature_names)} names for {X.shape[1]} columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self):
        return self.X.shape[0]

    def to_frame(self):
        import pandas as pd

        frame = pd.DataFrame(self.X, columns=list(self.feature_names))
        frame[self.target_name] = self.y
        return frame


def read_csv(path, target):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target not in header:
            raise ValidationError(f"{path}: target column {target!r} not in header {header}")
        t = header.index(target)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{line_no}: expected {len(header)} cells, found {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ValidationError(f"{path}:{line_no}: non-numeric cell {bad!r}") from None
    if not rows:
        raise InsufficientDataError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    names = tuple(h for i, h in enumerate(header) if i != t)
    return Dataset(np.delete(table, t, axis=1), table[:, t], names, target)


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_csv(dataset, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, dataset.target_name])
        for row, target in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    return path
