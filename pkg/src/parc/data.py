"""Tabular ingestion: column specs, one-hot encoding, scaling and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

#: Columns with at most this many distinct values are treated as categorical.
CATEGORICAL_THRESHOLD = 4


class DataError(ValueError):
    """Raised when a table cannot be encoded."""


@dataclass
class ColumnSpec:
    name: str
    kind: str = NUMERIC
    categories: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise DataError(
                    f"column {self.name!r}: categorical columns need at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"column {self.name!r}: duplicate categories")

    @property
    def width(self):
        """Number of encoded feature columns (drop-first one-hot)."""
        return 1 if self.kind == NUMERIC else len(self.categories) - 1

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            out["categories"] = list(self.categories)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], d["kind"], list(d.get("categories", [])))


def _is_number(cell):
    try:
        float(cell)
    except (TypeError, ValueError):
        return False
    return True


def _to_float(cell, column):
    if isinstance(cell, str) and cell.strip() == "":
        raise DataError(f"column {column!r}: missing value")
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise DataError(f"column {column!r}: non-numeric value {cell!r}") from None
    if math.isnan(value):
        raise DataError(f"column {column!r}: missing value")
    return value


def infer_specs(header, rows, threshold=CATEGORICAL_THRESHOLD, overrides=None):
    """Guess a ColumnSpec per column.

    A column is categorical when it contains a non-numeric cell, or when it
    has between 2 and ``threshold`` distinct values. Categories are kept in
    order of first appearance. ``overrides`` maps column names to a kind
    (``"numeric"``/``"categorical"``) or to a full ColumnSpec.
    """
    overrides = overrides or {}
    specs = []
    for c, name in enumerate(header):
        column = [row[c] for row in rows]
        forced = overrides.get(name)
        if isinstance(forced, ColumnSpec):
            specs.append(forced)
            continue
        distinct = list(dict.fromkeys(_norm(v) for v in column))
        if forced is None:
            numeric = all(_is_number(v) for v in column)
            kind = CATEGORICAL if (not numeric or 2 <= len(distinct) <= threshold) else NUMERIC
        else:
            kind = forced
        specs.append(ColumnSpec(name, kind, distinct if kind == CATEGORICAL else []))
    return specs


def _norm(cell):
    return cell.strip() if isinstance(cell, str) else cell


@dataclass
class EncodedDataset:
    """Encoded features and targets.

    ``X`` holds one column per numeric feature and a drop-first one-hot
    block per categorical feature, in the order of ``feature_specs``; ``Yc`` the numeric targets; ``Yd`` category indices
    (0-based) of the categorical targets.
    """

    X: np.ndarray
    Yc: np.ndarray
    Yd: np.ndarray
    feature_specs: list
    target_specs: list

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_classes(self):
        return tuple(len(s.categories) for s in self.target_specs if s.kind == CATEGORICAL)

    @property
    def onehot_mask(self):
        """Boolean mask of encoded columns coming from categorical features."""
        return np.concatenate(
            [np.full(s.width, s.kind == CATEGORICAL) for s in self.feature_specs]
            or [np.zeros(0, bool)])

    def subset(self, idx):
        idx = np.asarray(idx)
        return EncodedDataset(self.X[idx], self.Yc[idx], self.Yd[idx],
                              self.feature_specs, self.target_specs)


def encode_features(rows, specs):
    """Encode raw feature rows to a float matrix."""
    n_cols = sum(s.width for s in specs)
    X = np.zeros((len(rows), n_cols))
    for r, row in enumerate(rows):
        if len(row) != len(specs):
            raise DataError(f"row {r}: expected {len(specs)} cells, got {len(row)}")
        col = 0
        for spec, cell in zip(specs, row):
            if spec.kind == NUMERIC:
                X[r, col] = _to_float(cell, spec.name)
            else:
                h = _category_index(spec, cell)
                if h > 0:
                    X[r, col + h - 1] = 1.0
            col += spec.width
    return X


def _category_index(spec, cell):
    cell = _norm(cell)
    try:
        return spec.categories.index(cell)
    except ValueError:
        pass
    # numeric categories written differently ("1" vs "1.0")
    if _is_number(cell):
        for h, cat in enumerate(spec.categories):
            if _is_number(cat) and float(cat) == float(cell):
                return h
    raise DataError(f"column {spec.name!r}: unknown category {cell!r}")


def decode_features(X, specs):
    """Inverse of :func:`encode_features`; numeric cells come back as floats."""
    rows = []
    for x in np.asarray(X):
        row, col = [], 0
        for spec in specs:
            if spec.kind == NUMERIC:
                row.append(float(x[col]))
            else:
                block = x[col:col + spec.width]
                hot = np.flatnonzero(block > 0.5)
                row.append(spec.categories[hot[0] + 1] if hot.size else spec.categories[0])
            col += spec.width
        rows.append(row)
    return rows


def encode_targets(rows, specs):
    """Split raw target rows into a numeric matrix and a category-index matrix."""
    num = [s for s in specs if s.kind == NUMERIC]
    cat = [s for s in specs if s.kind == CATEGORICAL]
    Yc = np.zeros((len(rows), len(num)))
    Yd = np.zeros((len(rows), len(cat)), dtype=int)
    for r, row in enumerate(rows):
        if len(row) != len(specs):
            raise DataError(f"row {r}: expected {len(specs)} target cells, got {len(row)}")
        ic = id_ = 0
        for spec, cell in zip(specs, row):
            if spec.kind == NUMERIC:
                Yc[r, ic] = _to_float(cell, spec.name)
                ic += 1
            else:
                Yd[r, id_] = _category_index(spec, cell)
                id_ += 1
    return Yc, Yd


def encode(raw_table, feature_specs, target_specs=()):
    """Encode a table whose rows list feature cells then target cells."""
    nf = len(feature_specs)
    rows = [list(r) for r in raw_table]
    if not rows:
        raise DataError("empty table")
    X = encode_features([r[:nf] for r in rows], feature_specs)
    Yc, Yd = encode_targets([r[nf:] for r in rows], list(target_specs))
    return EncodedDataset(X, Yc, Yd, list(feature_specs), list(target_specs))


def read_csv(path):
    """Return ``(header, rows)`` of a comma-separated UTF-8 file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: line {i + 2} has {len(row)} cells, header has {len(header)}")
    return header, rows


def load_table(path, targets, overrides=None, threshold=CATEGORICAL_THRESHOLD,
               feature_specs=None, target_specs=None):
    """Read a CSV and encode it, with ``targets`` naming the target columns.

    Specs are inferred unless given (e.g. from a trained model, so that test
    data reuse the training categories).
    """
    header, rows = read_csv(path)
    missing = [t for t in targets if t not in header]
    if missing:
        raise DataError(f"target columns not found: {missing}")
    feat_idx = [i for i, h in enumerate(header) if h not in targets]
    targ_idx = [header.index(t) for t in targets]
    if feature_specs is None:
        feature_specs = infer_specs([header[i] for i in feat_idx],
                                    [[r[i] for i in feat_idx] for r in rows],
                                    threshold, overrides)
    if target_specs is None:
        target_specs = infer_specs([header[i] for i in targ_idx],
                                   [[r[i] for i in targ_idx] for r in rows],
                                   threshold, overrides)
    table = [[r[i] for i in feat_idx] + [r[i] for i in targ_idx] for r in rows]
    return encode(table, feature_specs, target_specs)


@dataclass
class Scaler:
    """Column-wise standardization; exempt columns pass through unchanged."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), np.ones(n))


def fit_scaler(X, exempt=None):
    """Fit a z-score scaler; constant columns get ``std = 1``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot fit a scaler on an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    if exempt is not None:
        exempt = np.asarray(exempt, dtype=bool)
        mean[exempt] = 0.0
        std[exempt] = 1.0
    return Scaler(mean, std)


def apply_scaler(scaler, X):
    return scaler.transform(X)


def split(dataset, test_fraction, seed=0):
    """Random train/test split; test size is ``max(1, floor(N * test_fraction))``."""
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must lie in (0, 1)")
    N = dataset.n_samples
    n_test = max(1, int(math.floor(N * test_fraction)))
    if n_test >= N:
        raise DataError("split leaves no training samples")
    perm = np.random.default_rng(seed).permutation(N)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)


def write_csv(path, header: Sequence[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
