"""Tabular data with a binary sensitive attribute: CSV ingestion, scaling,
train/test splitting and a synthetic biased generator."""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np


# generator calibration: per-unit-bias mean shift of merit and proxy
# features (in noise standard deviations) and the label logit scale
MERIT_SHIFT = 0.35
PROXY_SHIFT = 1.0
LABEL_SCALE = 1.0


class DataError(ValueError):
    """Base class for every data ingestion / validation problem."""


class MissingFileError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class InvalidSensitiveValueError(DataError):
    pass


class InvalidLabelValueError(DataError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass
class TabularDataset:
    features: np.ndarray
    sensitive: np.ndarray
    labels: np.ndarray
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        self.sensitive = np.asarray(self.sensitive).astype(np.int64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise DataError("dataset needs at least one row and one feature")
        if len(self.sensitive) != n or len(self.labels) != n:
            raise DimensionMismatchError(
                "features, sensitive and labels must have the same number of rows")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain missing or non-finite values")
        if not self.feature_names:
            self.feature_names = ["x%d" % j for j in range(d)]
        if len(self.feature_names) != d:
            raise DimensionMismatchError("feature_names length differs from feature count")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return TabularDataset(self.features[idx], self.sensitive[idx],
                              self.labels[idx], list(self.feature_names))

    def to_csv(self, path, sensitive_col="s", label_col="y"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + [sensitive_col, label_col])
            for row, s, y in zip(self.features, self.sensitive, self.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(s), int(y)])


@dataclass
class StandardizationParams:
    minimum: np.ndarray
    range: np.ndarray

    def to_dict(self):
        return {"minimum": self.minimum.tolist(), "range": self.range.tolist()}

    @classmethod
    def from_dict(cls, payload):
        return cls(np.asarray(payload["minimum"], dtype=np.float64),
                   np.asarray(payload["range"], dtype=np.float64))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0


def _parse_binary(value, what, row_no, col):
    err = InvalidSensitiveValueError if what == "sensitive" else InvalidLabelValueError
    if value not in (0.0, 1.0):
        raise err("invalid %s value %r in column %r (data row %d)" % (what, value, col, row_no))
    return int(value)


def load_csv(path, sensitive_col, label_col):
    """Read a numeric CSV with a header row.

    The sensitive and label columns are pulled out; every other column
    becomes a feature, in header order.
    """
    if not os.path.isfile(path):
        raise MissingFileError("no such file: %s" % path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty CSV file: %s" % path) from None
        for col in (sensitive_col, label_col):
            if col not in header:
                raise MissingColumnError("column %r not found in %s" % (col, path))
        s_idx = header.index(sensitive_col)
        y_idx = header.index(label_col)
        feat_idx = [j for j in range(len(header)) if j not in (s_idx, y_idx)]
        if not feat_idx:
            raise DataError("CSV has no feature columns")

        rows, sens, labs = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError("row %d has %d cells, header has %d"
                                % (row_no, len(row), len(header)))
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCellError(
                        "non-numeric cell %r in column %r (data row %d)"
                        % (cell, header[j], row_no)) from None
                if not math.isfinite(v):
                    raise NonNumericCellError(
                        "non-finite cell %r in column %r (data row %d)"
                        % (cell, header[j], row_no))
                values.append(v)
            sens.append(_parse_binary(values[s_idx], "sensitive", row_no, sensitive_col))
            labs.append(_parse_binary(values[y_idx], "label", row_no, label_col))
            rows.append([values[j] for j in feat_idx])
    if not rows:
        raise DataError("CSV has no data rows: %s" % path)
    return TabularDataset(np.array(rows), np.array(sens), np.array(labs),
                          [header[j] for j in feat_idx])


def fit_standardizer(data):
    """Min-max parameters so every fitted feature lands in [0, 1]."""
    lo = data.features.min(axis=0)
    return StandardizationParams(lo, data.features.max(axis=0) - lo)


def apply_standardizer(data, params):
    if data.d != len(params.minimum):
        raise DimensionMismatchError(
            "standardizer fitted on %d features, data has %d" % (len(params.minimum), data.d))
    scale = np.where(params.range > 0, params.range, 1.0)
    scaled = (data.features - params.minimum) / scale
    # zero-range features collapse to 0 whatever the input
    scaled[:, params.range <= 0] = 0.0
    return TabularDataset(scaled, data.sensitive.copy(), data.labels.copy(),
                          list(data.feature_names))


def invert_standardizer(features, params):
    return np.asarray(features) * params.range + params.minimum


def split(data, spec):
    """Seeded shuffle followed by a cut at round(train_fraction * N)."""
    if not 0.0 < spec.train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(spec.train_fraction * data.n))
    if n_train < 1 or n_train > data.n - 1:
        raise DataError("N=%d too small to split with fraction %g"
                        % (data.n, spec.train_fraction))
    perm = np.random.default_rng(spec.seed).permutation(data.n)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


def synth_biased(n, d, bias_strength, seed):
    """Synthetic stand-in for a biased tabular benchmark.

    The first ``ceil(d / 2)`` features are "merit" features: their mean is
    shifted with S and the label depends on them.  The remaining features
    are proxies of S that do not enter the label, so a classifier can learn
    group membership off the label direction.

    Args:
        n: number of rows (>= 100).
        d: number of features (>= 2).
        bias_strength: 0 gives features independent of S, 1 the strongest
            dependence.
        seed: RNG seed; output is bit-identical for a fixed seed.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0.0 <= bias_strength <= 1.0:
        raise ValueError("bias_strength must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, size=n)
    centred = 2.0 * s - 1.0

    n_merit = (d + 1) // 2
    x = rng.normal(size=(n, d))
    x[:, :n_merit] += MERIT_SHIFT * bias_strength * centred[:, None]
    x[:, n_merit:] += PROXY_SHIFT * bias_strength * centred[:, None]

    coef = np.zeros(d)
    coef[:n_merit] = LABEL_SCALE / math.sqrt(n_merit)
    logits = x @ coef
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
    names = ["merit%d" % j for j in range(n_merit)] + ["proxy%d" % j for j in range(d - n_merit)]
    return TabularDataset(x, s, y, names)
