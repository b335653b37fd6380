"""Warning datasets: CSV ingestion, min-max scaling and time-ordered splits."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadLabel,
    EmptyDataset,
    MissingColumn,
    NonNumericCell,
    TooFewRows,
)

TEST_CLAMP = (-0.5, 1.5)


@dataclass(frozen=True)
class Schema:
    """Which CSV columns play which role. Everything else is a feature."""

    label: str = "label"
    timestamp: str = "timestamp"
    project: str | None = "project"


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WarningDataset:
    project: str
    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        X = _frozen(self.features, np.float64)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1), np.float64)
        y = _frozen(self.labels, np.int64)
        t = _frozen(self.timestamps, np.int64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("features must be an n x d matrix with d >= 1")
        n = X.shape[0]
        if y.shape != (n,) or t.shape != (n,):
            raise ValueError(f"labels/timestamps must have {n} entries")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match feature width")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        ones = int(self.labels.sum())
        return self.n - ones, ones

    def take(self, idx) -> WarningDataset:
        idx = np.asarray(idx, dtype=np.int64)
        return WarningDataset(
            self.project,
            self.features[idx],
            self.feature_names,
            self.labels[idx],
            self.timestamps[idx],
        )

    def replace(self, **changes) -> WarningDataset:
        fields = dict(
            project=self.project,
            features=self.features,
            feature_names=self.feature_names,
            labels=self.labels,
            timestamps=self.timestamps,
        )
        fields.update(changes)
        return WarningDataset(**fields)

    def append(self, features, labels, timestamps) -> WarningDataset:
        features = np.asarray(features, dtype=np.float64).reshape(-1, self.d)
        return self.replace(
            features=np.vstack([self.features, features]),
            labels=np.concatenate([self.labels, np.asarray(labels, dtype=np.int64)]),
            timestamps=np.concatenate([self.timestamps, np.asarray(timestamps, dtype=np.int64)]),
        )

    def digest(self) -> str:
        """Content hash, used to prove a dataset was not touched."""
        h = hashlib.sha256()
        h.update(self.project.encode())
        h.update("\x1f".join(self.feature_names).encode())
        for a in (self.features, self.labels, self.timestamps):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class TrainTestSplit:
    train: WarningDataset
    test: WarningDataset
    train_fraction: float


@dataclass(frozen=True, eq=False)
class NormParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, X, clamp=None):
        X = np.asarray(X, dtype=np.float64)
        span = self.maximum - self.minimum
        constant = span == 0
        out = (X - self.minimum) / np.where(constant, 1.0, span)
        out[:, constant] = 0.5
        if clamp is not None:
            out = np.clip(out, *clamp)
        return out


# --- CSV -------------------------------------------------------------------

def _parse_number(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row, col, text) from None
    if not math.isfinite(value):
        raise NonNumericCell(row, col, text)
    return value


def _parse_timestamp(text, row, col):
    try:
        return int(text)
    except ValueError:
        value = _parse_number(text, row, col)
    if value != int(value):
        raise NonNumericCell(row, col, text)
    return int(value)


def load_csv(path, schema: Schema | None = None) -> WarningDataset:
    """Read one project's warnings from ``path``.

    Rows are numbered from 1 (the first data row) in error messages.
    When the schema's project column is absent the file stem names the
    project.
    """
    schema = schema or Schema()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} has no header row") from None
        for required in (schema.label, schema.timestamp):
            if required not in header:
                raise MissingColumn(required)
        roles = {schema.label, schema.timestamp}
        has_project = schema.project is not None and schema.project in header
        if has_project:
            roles.add(schema.project)
        feature_cols = [i for i, h in enumerate(header) if h not in roles]
        if not feature_cols:
            raise MissingColumn("<feature>")
        li, ti = header.index(schema.label), header.index(schema.timestamp)
        pi = header.index(schema.project) if has_project else None

        X, y, t = [], [], []
        project = path.stem
        for r, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise NonNumericCell(r, "<row width>", f"{len(cells)} cells")
            label = cells[li].strip()
            if label not in ("0", "1", "0.0", "1.0"):
                raise BadLabel(r, label)
            y.append(int(float(label)))
            t.append(_parse_timestamp(cells[ti].strip(), r, header[ti]))
            X.append([_parse_number(cells[c].strip(), r, header[c]) for c in feature_cols])
            if pi is not None:
                project = cells[pi].strip() or project
    if not X:
        raise EmptyDataset(f"{path} has no data rows")
    return WarningDataset(
        project=project,
        features=np.array(X, dtype=np.float64),
        feature_names=tuple(header[c] for c in feature_cols),
        labels=np.array(y),
        timestamps=np.array(t),
    )


def format_number(v: float) -> str:
    """Shortest text that reads back to the same float; integral values drop '.0'."""
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_csv(data: WarningDataset, path, schema: Schema | None = None, include_project=True):
    schema = schema or Schema()
    header = list(data.feature_names) + [schema.label, schema.timestamp]
    with_project = include_project and schema.project is not None
    if with_project:
        header.append(schema.project)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [format_number(v) for v in data.features[i]]
            row += [str(int(data.labels[i])), str(int(data.timestamps[i]))]
            if with_project:
                row.append(data.project)
            w.writerow(row)


def discover(directory) -> list[Path]:
    """Per-project CSV files in a data directory, sorted by name."""
    return sorted(Path(directory).glob("*.csv"))


# --- preprocessing ----------------------------------------------------------

def fit_norm(train: WarningDataset) -> NormParams:
    return NormParams(train.features.min(axis=0), train.features.max(axis=0))


def normalize(split: TrainTestSplit) -> tuple[TrainTestSplit, NormParams]:
    """Min-max scale both halves using training ranges only."""
    params = fit_norm(split.train)
    train = split.train.replace(features=params.apply(split.train.features, clamp=(0.0, 1.0)))
    test = split.test.replace(features=params.apply(split.test.features, clamp=TEST_CLAMP))
    return TrainTestSplit(train, test, split.train_fraction), params


def time_split(data: WarningDataset, train_fraction: float = 0.8) -> TrainTestSplit:
    """Train on the oldest rows, test on the newest.

    Timestamp ties keep file order. Tiny projects (n <= 4), or fractions
    that would leave one side empty, are split 50:50 instead.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = data.n
    if n < 2:
        raise TooFewRows(f"need at least 2 rows to split, got {n}")
    order = np.argsort(data.timestamps, kind="stable")
    cut = math.floor(n * train_fraction + 1e-9)
    if n <= 4 or cut == 0 or cut == n:
        cut = n // 2
    return TrainTestSplit(data.take(order[:cut]), data.take(order[cut:]), train_fraction)
