"""Evaluation quantities and run aggregation.

P-rule convention: when exactly one group has no positive predictions the
P-rule is 0; when neither group does it is 1.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

METHODS_ORDER = ("rbmd", "advdebias", "roc", "oracle-threshold")


class EmptyInputError(ValueError):
    pass


class MissingGroupError(ValueError):
    pass


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("length mismatch: %d vs %d" % (a.size, b.size))
    if a.size == 0:
        raise EmptyInputError("empty input")
    return a, b


def accuracy(predictions, labels):
    p, y = _pair(predictions, labels)
    return float(np.mean(p == y))


def group_rates(predictions, sensitive):
    """Positive-prediction rates (S=0, S=1)."""
    p, s = _pair(predictions, sensitive)
    if not (np.any(s == 0) and np.any(s == 1)):
        raise MissingGroupError("both sensitive groups must be present")
    return float(np.mean(p[s == 0] == 1)), float(np.mean(p[s == 1] == 1))


def p_rule(predictions, sensitive):
    r0, r1 = group_rates(predictions, sensitive)
    if r0 == 0.0 and r1 == 0.0:
        return 1.0
    if r0 == 0.0 or r1 == 0.0:
        return 0.0
    return min(r1 / r0, r0 / r1)


def dp_difference(predictions, sensitive):
    r0, r1 = group_rates(predictions, sensitive)
    return abs(r1 - r0)


def proportion_changed(pred_f, pred_g):
    a, b = _pair(pred_f, pred_g)
    return float(np.mean(a != b))


@dataclass
class RunRecord:
    method: str
    hyperparameters: dict
    seed: int
    accuracy: float
    prule: float
    proportion_changed: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, payload):
        return cls(payload["method"], dict(payload["hyperparameters"]), int(payload["seed"]),
                   float(payload["accuracy"]), float(payload["prule"]),
                   float(payload["proportion_changed"]))


def write_records(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_records(path):
    with open(path) as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def quartile_boundaries(values):
    """25/50/75 % quantiles, linear interpolation between order statistics."""
    return tuple(float(q) for q in np.quantile(np.asarray(values, dtype=np.float64),
                                               [0.25, 0.5, 0.75], method="linear"))


def cell_index(value, boundaries):
    """Quartile index 0..3; intervals are [lo, hi) with the top one closed."""
    for k, b in enumerate(boundaries):
        if value < b:
            return k
    return len(boundaries)


@dataclass
class CellStats:
    mean: float
    std: float
    count: int

    def format(self):
        return "%.3g±%.3g (%d)" % (self.mean, self.std, self.count)


@dataclass
class QuartileGrid:
    fairness_boundaries: tuple
    accuracy_boundaries: tuple
    min_runs: int
    gate_method: str
    # cells[method][(fairness_q, accuracy_q)] -> CellStats
    cells: dict = field(default_factory=dict)
    excluded: set = field(default_factory=set)

    def methods(self):
        known = [m for m in METHODS_ORDER if m in self.cells]
        return known + sorted(m for m in self.cells if m not in METHODS_ORDER)

    def stat(self, method, fq, aq):
        """Stats for one cell, or None when absent or excluded."""
        if (fq, aq) in self.excluded:
            return None
        return self.cells.get(method, {}).get((fq, aq))

    def to_dict(self):
        out = {"fairness_boundaries": list(self.fairness_boundaries),
               "accuracy_boundaries": list(self.accuracy_boundaries),
               "min_runs": self.min_runs,
               "gate_method": self.gate_method,
               "methods": {}}
        for m in self.methods():
            rows = []
            for fq in range(4):
                row = []
                for aq in range(4):
                    st = self.stat(m, fq, aq)
                    row.append(None if st is None else
                               {"mean": st.mean, "std": st.std, "count": st.count})
                rows.append(row)
            out["methods"][m] = rows
        return out


def build_quartile_grid(reference_runs, all_runs, min_runs=2, gate_method="rbmd"):
    """Aggregate proportion_changed per (fairness quartile, accuracy quartile).

    Boundaries come from ``reference_runs`` (the AdvDebias runs).  A cell is
    excluded for every method when ``gate_method`` has fewer than
    ``min_runs`` runs in it.
    """
    reference_runs = list(reference_runs)
    if not reference_runs:
        raise EmptyInputError("reference run set is empty")
    fb = quartile_boundaries([r.prule for r in reference_runs])
    ab = quartile_boundaries([r.accuracy for r in reference_runs])

    buckets = {}
    for r in all_runs:
        key = (cell_index(r.prule, fb), cell_index(r.accuracy, ab))
        buckets.setdefault(r.method, {}).setdefault(key, []).append(r.proportion_changed)

    cells = {}
    for method, per_cell in buckets.items():
        cells[method] = {k: CellStats(float(np.mean(v)), float(np.std(v)), len(v))
                         for k, v in per_cell.items()}
    gate = cells.get(gate_method, {})
    excluded = {(fq, aq) for fq in range(4) for aq in range(4)
                if gate.get((fq, aq), CellStats(0.0, 0.0, 0)).count < min_runs}
    return QuartileGrid(fb, ab, min_runs, gate_method, cells, excluded)


def ratio_values(model, features):
    return model.ratio(features)


def ratio_histogram(model, features, bin_width=0.1):
    """Histogram of ratio values with fixed-width bins anchored at the minimum."""
    r = np.asarray(model.ratio(features))
    if r.size == 0:
        raise EmptyInputError("empty data")
    return histogram_fixed_width(r, bin_width)


def histogram_fixed_width(values, bin_width=0.1):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("empty data")
    lo, hi = float(values.min()), float(values.max())
    n_bins = max(1, int(np.ceil((hi - lo) / bin_width - 1e-12)))
    edges = lo + bin_width * np.arange(n_bins + 1)
    idx = np.clip(np.floor((values - lo) / bin_width).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return edges, counts


def calibration_pairs(blackbox, model, features):
    """(f(x), g(x)) per row, in row order."""
    return list(zip(np.asarray(blackbox.score(features)).tolist(),
                    np.asarray(model.score(features)).tolist()))


def quadrant(f_score, g_score):
    """Calibration-plot quadrant: 'kept-0', 'kept-1', '0->1' (top-left) or '1->0'."""
    before = f_score > 0.5
    after = g_score > 0.5
    if before == after:
        return "kept-1" if before else "kept-0"
    return "1->0" if before else "0->1"
