"""Tabular ingestion, encoding, splitting and the synthetic XOR environment."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import DataError

MISSING = "?"
STD_FLOOR = 1e-8


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: Literal["numeric", "categorical"]
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and len(self.categories) < 2:
            raise ValueError(f"categorical column {self.name!r} needs at least 2 categories")


@dataclass(frozen=True)
class FeatureSchema:
    """Layout of a delimited file.

    ``columns`` are the feature columns in file order. The target sits at
    ``target_position`` in each row (negative values count from the end).
    """

    columns: tuple[ColumnSpec, ...]
    target_column: str
    positive_label: str
    target_position: int = -1

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be unique")
        if self.target_column in names:
            raise ValueError("target column must not be listed among feature columns")

    @property
    def n_fields(self) -> int:
        return len(self.columns) + 1

    @property
    def target_index(self) -> int:
        return self.target_position % self.n_fields

    def column(self, name: str) -> ColumnSpec:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(f"unknown column {name!r}")

    def field_index(self, name: str) -> int:
        """Position of a column within a raw file row."""
        if name == self.target_column:
            return self.target_index
        idx = [c.name for c in self.columns].index(name)
        return idx if idx < self.target_index else idx + 1


@dataclass(frozen=True)
class RawTable:
    rows: tuple[tuple[str, ...], ...]
    dropped: int = 0

    def __len__(self):
        return len(self.rows)

    def subset(self, indices: Iterable[int]) -> "RawTable":
        return RawTable(tuple(self.rows[i] for i in indices), 0)


@dataclass(frozen=True, eq=False)
class DatasetMatrix:
    """Standardized feature matrix with binary targets and aligned names.

    ``standardization`` maps every numeric column that was encoded into this
    matrix to its (mean, std) pair. Entries survive ``drop_features`` so a
    pruned matrix still knows how the missing column was scaled.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    standardization: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, order="C")
        y = np.array(self.targets, dtype=np.int8).ravel()
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if X.shape[1] != len(self.feature_names):
            raise DataError(f"{X.shape[1]} columns but {len(self.feature_names)} feature names")
        if not np.isin(y, (0, 1)).all():
            raise DataError("targets must be binary (0/1)")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "standardization", dict(self.standardization))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.index(name)]

    def with_features(self, features: np.ndarray) -> "DatasetMatrix":
        return DatasetMatrix(features, self.targets, self.feature_names, self.standardization)

    def take(self, rows) -> "DatasetMatrix":
        rows = np.asarray(rows)
        return DatasetMatrix(self.features[rows], self.targets[rows], self.feature_names, self.standardization)

    def same_as(self, other: "DatasetMatrix") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.targets, other.targets)
        )


@dataclass(frozen=True)
class SplitPair:
    train: DatasetMatrix
    test: DatasetMatrix


# -- ingestion ----------------------------------------------------------------


def load_table(
    path: str | Path,
    schema: FeatureSchema,
    used_columns: Sequence[str] | None = None,
    has_header: bool = False,
) -> RawTable:
    """Parse a comma-separated file into whitespace-stripped string rows.

    Rows with ``?`` in any used column (default: every schema column plus the
    target) are dropped and counted. Blank lines and lines starting with ``|``
    are skipped. Categorical values outside the schema raise ``DataError``.
    """
    if used_columns is None:
        used_columns = [c.name for c in schema.columns]
    used = [schema.field_index(name) for name in used_columns]
    used.append(schema.target_index)
    checks = [
        (schema.field_index(c.name), c.name, frozenset(c.categories))
        for c in schema.columns
        if c.kind == "categorical" and c.name in used_columns
    ]

    rows = []
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        for lineno, record in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if record[0].startswith("|"):
                continue
            record = tuple(v.strip() for v in record)
            if len(record) != schema.n_fields:
                raise DataError(
                    f"{path}:{lineno}: expected {schema.n_fields} fields, found {len(record)}"
                )
            if any(record[i] == MISSING for i in used):
                dropped += 1
                continue
            for i, name, cats in checks:
                if record[i] not in cats:
                    raise DataError(f"{path}:{lineno}: unknown category {record[i]!r} for column {name!r}")
            rows.append(record)
    return RawTable(tuple(rows), dropped)


def resolve_features(schema: FeatureSchema, feature_list: Sequence[str]) -> list[tuple[str, str | None]]:
    """Expand a feature list into (column, category-or-None) encoded units.

    Entries may be a numeric column, a categorical column (expanded to every
    category) or a single indicator written ``column=value``.
    """
    if not feature_list:
        raise DataError("feature_list is empty")
    units: list[tuple[str, str | None]] = []
    for entry in feature_list:
        name, sep, value = entry.partition("=")
        try:
            col = schema.column(name)
        except KeyError:
            raise DataError(f"feature {entry!r} is not in the schema") from None
        if sep:
            if col.kind != "categorical" or value not in col.categories:
                raise DataError(f"feature {entry!r} does not name a category of {name!r}")
            units.append((name, value))
        elif col.kind == "categorical":
            units.extend((name, cat) for cat in col.categories)
        else:
            units.append((name, None))
    names = [n if v is None else f"{n}={v}" for n, v in units]
    if len(set(names)) != len(names):
        raise DataError("feature_list produces duplicate columns")
    return units


def used_columns(schema: FeatureSchema, feature_list: Sequence[str]) -> list[str]:
    seen: dict[str, None] = {}
    for name, _ in resolve_features(schema, feature_list):
        seen[name] = None
    return list(seen)


def encode_standardize(
    raw: RawTable,
    schema: FeatureSchema,
    feature_list: Sequence[str],
    stats: Mapping[str, tuple[float, float]] | None = None,
) -> DatasetMatrix:
    """Encode raw rows into a ``DatasetMatrix``.

    Numeric columns are z-scored with population statistics of ``raw`` (or the
    supplied ``stats``, for encoding a test split with training statistics).
    Categorical units become 0/1 indicators named ``column=value``.
    """
    units = resolve_features(schema, feature_list)
    if len(raw) == 0:
        raise DataError("no rows left to encode (all rows dropped?)")
    n = len(raw)
    X = np.empty((n, len(units)), dtype=np.float64)
    names = []
    record: dict[str, tuple[float, float]] = {}
    for j, (name, value) in enumerate(units):
        idx = schema.field_index(name)
        column = [row[idx] for row in raw.rows]
        if value is None:
            try:
                vals = np.array([float(v) for v in column], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"non-numeric value in column {name!r}: {exc}") from None
            if stats is not None and name in stats:
                mean, std = stats[name]
            else:
                mean = float(np.mean(vals))
                std = max(float(np.std(vals)), STD_FLOOR)
            X[:, j] = (vals - mean) / std
            record[name] = (mean, std)
            names.append(name)
        else:
            X[:, j] = [1.0 if v == value else 0.0 for v in column]
            names.append(f"{name}={value}")
    t_idx = schema.target_index
    y = np.array([row[t_idx].rstrip(".") == schema.positive_label for row in raw.rows], dtype=np.int8)
    return DatasetMatrix(X, y, tuple(names), record)


# -- splitting and pruning ----------------------------------------------------


def _split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = math.floor(train_fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"degenerate split: {n_train} train rows out of {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def split(data: DatasetMatrix, train_fraction: float, seed: int) -> SplitPair:
    """Deterministic shuffled split; train size is floor(train_fraction * n)."""
    if data.n_rows < 2:
        raise DataError("need at least 2 rows to split")
    tr, te = _split_indices(data.n_rows, train_fraction, seed)
    return SplitPair(data.take(tr), data.take(te))


def split_table(raw: RawTable, train_fraction: float, seed: int) -> tuple[RawTable, RawTable]:
    """Same row assignment as ``split``, applied before encoding."""
    if len(raw) < 2:
        raise DataError("need at least 2 rows to split")
    tr, te = _split_indices(len(raw), train_fraction, seed)
    return raw.subset(tr), raw.subset(te)


def encode_split(
    train_raw: RawTable, test_raw: RawTable, schema: FeatureSchema, feature_list: Sequence[str]
) -> SplitPair:
    """Encode a train/test pair, scaling the test rows with training statistics."""
    train = encode_standardize(train_raw, schema, feature_list)
    test = encode_standardize(test_raw, schema, feature_list, stats=train.standardization)
    return SplitPair(train, test)


def drop_features(data: DatasetMatrix, names: Iterable[str]) -> DatasetMatrix:
    """Remove the named columns, keeping the order of the rest."""
    names = set(names)
    unknown = names.difference(data.feature_names)
    if unknown:
        raise KeyError(f"unknown features: {sorted(unknown)}")
    keep = [j for j, name in enumerate(data.feature_names) if name not in names]
    if not keep:
        raise DataError("cannot drop every feature")
    if len(keep) == data.n_features:
        return data
    return DatasetMatrix(
        data.features[:, keep],
        data.targets,
        tuple(data.feature_names[j] for j in keep),
        data.standardization,
    )


# -- synthetic environment ------------------------------------------------------


def gen_xor_shortcut(n: int, leak_rate: float, noise_std: float = 0.0, seed: int = 0) -> DatasetMatrix:
    """XOR-of-signs task with an injected label-leaking column.

    Columns are ``x1``, ``x2`` (noisy +/-1 coordinates) and ``shortcut``,
    which equals the +/-1 label (plus noise) with probability ``leak_rate``
    and its negation otherwise. All three columns are z-scored.
    """
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if not 0.5 <= leak_rate <= 1.0:
        raise ValueError(f"leak_rate must lie in [0.5, 1.0], got {leak_rate}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    rng = np.random.default_rng(seed)
    x1 = rng.choice([-1.0, 1.0], size=n) + rng.normal(0.0, noise_std, size=n)
    x2 = rng.choice([-1.0, 1.0], size=n) + rng.normal(0.0, noise_std, size=n)
    y = (np.sign(x1) * np.sign(x2) < 0).astype(np.int8)
    agree = np.where(rng.random(n) < leak_rate, 1.0, -1.0)
    shortcut = agree * (2.0 * y - 1.0) + rng.normal(0.0, noise_std, size=n)

    raw = np.column_stack([x1, x2, shortcut])
    mean = raw.mean(axis=0)
    std = np.maximum(raw.std(axis=0), STD_FLOOR)
    names = ("x1", "x2", "shortcut")
    stats = {name: (float(m), float(s)) for name, m, s in zip(names, mean, std)}
    return DatasetMatrix((raw - mean) / std, y, names, stats)
