"""Grid-search orchestration: one black box, many debiasing runs.

Seed of repeat ``k`` at grid point ``j`` of a method is
``base_seed + j * 1000 + k``.  ROC and oracle-threshold are deterministic
given the black box, so they run once per grid point whatever ``repeats``.
"""

import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, blackbox, datasets, metrics, rbmd

log = logging.getLogger(__name__)

STOCHASTIC_METHODS = ("rbmd", "advdebias")
KNOWN_METHODS = ("rbmd", "advdebias", "roc", "oracle-threshold")
DEFAULT_THETAS = [round(0.5 + 0.02 * k, 2) for k in range(25)]


def linspace_grid(hi, steps=6, lo=0.0):
    return [float(v) for v in np.linspace(lo, hi, steps)]


# (lambda_ratio, lambda_fair) ranges for the Law School and COMPAS benchmarks
PRESET_GRIDS = {
    "lawschool": {"lambda_ratio": linspace_grid(0.25), "lambda_fair": linspace_grid(3.0)},
    "compas": {"lambda_ratio": linspace_grid(4.0), "lambda_fair": linspace_grid(0.1)},
}


@dataclass
class PreparedData:
    train: datasets.TabularDataset
    test: datasets.TabularDataset
    scaler: datasets.StandardizationParams


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: {"synth": {"n": 5000, "d": 6, "bias": 0.8, "seed": 0}})
    split: dict = field(default_factory=lambda: {"train_fraction": 0.7, "seed": 0})
    blackbox: dict = field(default_factory=lambda: {"epochs": 2000, "learning_rate": 0.1})
    methods: dict = field(default_factory=dict)
    repeats: int = 3
    base_seed: int = 0
    output_dir: str = "runs"
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.repeats) < 1:
            raise ValueError("repeats must be >= 1")
        if not self.methods:
            raise ValueError("at least one method grid is required")
        for name, grid in self.methods.items():
            if name not in KNOWN_METHODS:
                raise ValueError("unknown method %r" % name)
            for key, values in grid.items():
                if key != "fixed" and not values:
                    raise ValueError("empty grid for %s.%s" % (name, key))

    @classmethod
    def from_dict(cls, payload):
        known = {k: payload[k] for k in cls.__dataclass_fields__ if k in payload}
        return cls(**known)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def load_data(spec):
    """Dataset from ``{"csv": path, "sensitive_col": .., "label_col": ..}``
    or ``{"synth": {"n", "d", "bias", "seed"}}``."""
    if "csv" in spec:
        return datasets.load_csv(spec["csv"], spec.get("sensitive_col", "s"),
                                 spec.get("label_col", "y"))
    if "synth" in spec:
        s = spec["synth"]
        return datasets.synth_biased(int(s.get("n", 5000)), int(s.get("d", 6)),
                                     float(s.get("bias", 0.8)), int(s.get("seed", 0)))
    raise ValueError("data spec needs a 'csv' or 'synth' entry")


def prepare(data, split_spec):
    """Split, then fit the min-max scaler on train and apply it to both parts."""
    train, test = datasets.split(data, split_spec)
    scaler = datasets.fit_standardizer(train)
    return PreparedData(datasets.apply_standardizer(train, scaler),
                        datasets.apply_standardizer(test, scaler), scaler)


def grid_points(grid):
    """Cartesian product of every list-valued entry; ``fixed`` is merged in."""
    fixed = dict(grid.get("fixed", {}))
    keys = sorted(k for k in grid if k != "fixed")
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(fixed)
        point.update(zip(keys, combo))
        yield point


def train_config(point, seed):
    kwargs = {k: v for k, v in point.items() if k in rbmd.TrainConfig.__dataclass_fields__}
    kwargs["seed"] = seed
    return rbmd.TrainConfig(**kwargs)


def _hyper(method, point):
    keys = {"rbmd": ("lambda_fair", "lambda_ratio", "ratio_hidden_layers"),
            "advdebias": ("lambda_fair",),
            "roc": ("theta",),
            "oracle-threshold": ("target_prule",)}[method]
    return {k: float(point[k]) for k in keys if k in point}


def run_one(method, point, seed, prepared, bb):
    """Train/apply one method and evaluate it on the test split."""
    train, test = prepared.train, prepared.test
    pred_f = bb.predict(test.features)
    if method == "rbmd":
        model, _ = rbmd.train_rbmd(train, bb, train_config(point, seed))
        pred = model.predict(test.features)
    elif method == "advdebias":
        model = rbmd.train_advdebias(train, train_config(point, seed))
        pred = model.predict(test.features)
    elif method == "roc":
        group = baselines.deprived_group(bb.predict(train.features), train.sensitive)
        params = baselines.RocParams(float(point["theta"]), group, 1)
        pred = baselines.roc_postprocess(bb.score(test.features), test.sensitive, params)
    elif method == "oracle-threshold":
        th = baselines.fit_group_thresholds(bb.score(train.features), train.sensitive,
                                            train.labels, float(point["target_prule"]))
        pred = th.predict(bb.score(test.features), test.sensitive)
    else:
        raise ValueError("unknown method %r" % method)
    return metrics.RunRecord(method, _hyper(method, point), int(seed),
                             metrics.accuracy(pred, test.labels),
                             metrics.p_rule(pred, test.sensitive),
                             metrics.proportion_changed(pred_f, pred))


def plan(config):
    """Every (method, grid index, repeat, point, seed) task, in a fixed order."""
    tasks = []
    for method in [m for m in KNOWN_METHODS if m in config.methods]:
        repeats = config.repeats if method in STOCHASTIC_METHODS else 1
        for j, point in enumerate(grid_points(config.methods[method])):
            for k in range(repeats):
                tasks.append((method, j, k, point, config.base_seed + j * 1000 + k))
    return tasks


def _task(args):
    method, j, k, point, seed, prepared, bb = args
    try:
        return run_one(method, point, seed, prepared, bb), None
    except (rbmd.TrainingDivergedError, baselines.InfeasibleTargetError,
            metrics.MissingGroupError) as exc:
        return None, {"method": method, "grid_index": j, "repeat": k, "seed": seed,
                      "hyperparameters": point, "error": type(exc).__name__,
                      "message": str(exc)}


def run_grid(config, prepared=None, bb=None, write=True):
    """Run every grid point x repeat; returns ``(records, failures)``.

    A failing run (divergence, infeasible target) is logged in ``failures``
    and does not stop the grid.  With ``write`` each run's record goes to
    its own file under ``output_dir/runs/`` and the aggregate is written to
    ``records.jsonl`` plus a ``failures.jsonl`` sidecar.
    """
    if prepared is None:
        prepared = prepare(load_data(config.data),
                           datasets.SplitSpec(float(config.split.get("train_fraction", 0.7)),
                                              int(config.split.get("seed", 0))))
    if bb is None:
        bb = blackbox.train_logreg(prepared.train, int(config.blackbox.get("epochs", 2000)),
                                   float(config.blackbox.get("learning_rate", 0.1)))
    tasks = [t + (prepared, bb) for t in plan(config)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    records, failures = [], []
    for task, (rec, fail) in zip(tasks, results):
        method, j, k = task[:3]
        if rec is None:
            log.warning("run %s[%d] repeat %d failed: %s", method, j, k, fail["message"])
            failures.append(fail)
            continue
        records.append(rec)
        if write:
            run_dir = os.path.join(config.output_dir, "runs")
            os.makedirs(run_dir, exist_ok=True)
            with open(os.path.join(run_dir, "%s_%03d_%02d.json" % (method, j, k)), "w") as fh:
                fh.write(rec.to_json() + "\n")
    if write:
        os.makedirs(config.output_dir, exist_ok=True)
        metrics.write_records(records, os.path.join(config.output_dir, "records.jsonl"))
        with open(os.path.join(config.output_dir, "failures.jsonl"), "w") as fh:
            for fail in failures:
                fh.write(json.dumps(fail, sort_keys=True) + "\n")
        with open(os.path.join(config.output_dir, "blackbox.json"), "w") as fh:
            json.dump(bb.to_dict(), fh, indent=2)
    return records, failures
