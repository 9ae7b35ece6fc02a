"""Sensitive-aware post-processing baselines.

``roc_postprocess`` is the reject-option classifier: inside the
low-confidence band it hands the favorable label to the deprived group and
the unfavorable one to everybody else.  ``fit_group_thresholds`` is a
transparent per-group threshold search used as the "oracle-threshold"
comparator; it needs the sensitive attribute at prediction time.
"""

from dataclasses import dataclass

import numpy as np

THRESHOLD_GRID = np.round(np.arange(1, 100) / 100.0, 2)


class InfeasibleTargetError(ValueError):
    def __init__(self, target, best_prule):
        super().__init__("no threshold pair reaches P-rule %.4f (best achievable %.4f)"
                         % (target, best_prule))
        self.target = target
        self.best_prule = best_prule


@dataclass(frozen=True)
class RocParams:
    theta: float
    deprived_group: int = 0
    favorable_label: int = 1

    def __post_init__(self):
        if not 0.5 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0.5, 1)")
        if self.deprived_group not in (0, 1) or self.favorable_label not in (0, 1):
            raise ValueError("deprived_group and favorable_label must be 0 or 1")


@dataclass(frozen=True)
class GroupThresholds:
    t0: float
    t1: float

    def __post_init__(self):
        for t in (self.t0, self.t1):
            if not 0.0 < t < 1.0:
                raise ValueError("thresholds must lie in (0, 1)")

    def predict(self, scores, sensitive):
        scores = np.asarray(scores, dtype=np.float64)
        t = np.where(np.asarray(sensitive) == 1, self.t1, self.t0)
        return (scores > t).astype(np.int64)

    def to_dict(self):
        return {"kind": "oracle-threshold", "t0": self.t0, "t1": self.t1}


def _check_lengths(*arrays):
    arrays = [np.asarray(a) for a in arrays]
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("length mismatch")
    return arrays


def roc_critical(scores, theta):
    scores = np.asarray(scores, dtype=np.float64)
    return np.maximum(scores, 1.0 - scores) <= theta


def roc_postprocess(scores, sensitive, params):
    scores, sensitive = _check_lengths(scores, sensitive)
    base = (scores > 0.5).astype(np.int64)
    critical = roc_critical(scores, params.theta)
    relabel = np.where(sensitive == params.deprived_group,
                       params.favorable_label, 1 - params.favorable_label)
    return np.where(critical, relabel, base)


def deprived_group(predictions, sensitive):
    """The group with the lower positive-prediction rate (0 on ties)."""
    p, s = _check_lengths(predictions, sensitive)
    return 1 if p[s == 1].mean() < p[s == 0].mean() else 0


def _prule_from_rates(r0, r1):
    both_zero = (r0 == 0) & (r1 == 0)
    one_zero = (r0 == 0) ^ (r1 == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.minimum(r0 / r1, r1 / r0)
    return np.where(both_zero, 1.0, np.where(one_zero, 0.0, ratio))


def fit_group_thresholds(scores, sensitive, labels, target_prule, grid=THRESHOLD_GRID):
    """Exhaustive search over per-group threshold pairs.

    Maximises accuracy among pairs with P-rule >= target; ties go to the
    higher P-rule, then to fewer flips relative to the 0.5 threshold, then
    to the lowest (t0, t1) in grid order.
    """
    scores, sensitive, labels = _check_lengths(scores, sensitive, labels)
    scores = scores.astype(np.float64)
    if not (np.any(sensitive == 0) and np.any(sensitive == 1)):
        raise ValueError("both sensitive groups must be present")
    grid = np.asarray(grid, dtype=np.float64)

    stats = []
    for g in (0, 1):
        sc, lab = scores[sensitive == g], labels[sensitive == g]
        pred = sc[None, :] > grid[:, None]  # (n_thresholds, n_group)
        base = sc > 0.5
        stats.append((pred.mean(axis=1),
                      (pred == (lab == 1)[None, :]).sum(axis=1),
                      (pred != base[None, :]).sum(axis=1)))
    (r0, c0, f0), (r1, c1, f1) = stats

    prule = _prule_from_rates(r0[:, None], r1[None, :])
    correct = c0[:, None] + c1[None, :]
    flips = f0[:, None] + f1[None, :]
    feasible = prule >= target_prule
    if not feasible.any():
        raise InfeasibleTargetError(target_prule, float(prule.max()))

    # lexicographic: max correct, max prule, min flips, then first in grid order
    order = np.lexsort((flips.ravel(), -prule.ravel(), -correct.ravel(),
                        ~feasible.ravel()))
    i, j = np.unravel_index(order[0], prule.shape)
    return GroupThresholds(float(grid[i]), float(grid[j]))
