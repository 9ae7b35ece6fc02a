"""Delimited and JSON report emitters (figures come from ``plotting``)."""

import csv
import json
import os

from . import plotting
from .metrics import RunRecord

PARETO_COLUMNS = ["method", "lambda_fair", "lambda_ratio", "seed", "accuracy", "prule",
                  "proportion_changed", "hyperparameters"]


def _num(value):
    # repr gives the shortest string that round-trips exactly
    return "" if value is None else repr(float(value))


def write_pareto_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PARETO_COLUMNS)
        for r in records:
            writer.writerow([r.method, _num(r.hyperparameters.get("lambda_fair")),
                             _num(r.hyperparameters.get("lambda_ratio")), r.seed,
                             _num(r.accuracy), _num(r.prule), _num(r.proportion_changed),
                             json.dumps(r.hyperparameters, sort_keys=True)])


def read_pareto_csv(path):
    with open(path, newline="") as fh:
        return [RunRecord(row["method"], json.loads(row["hyperparameters"]), int(row["seed"]),
                          float(row["accuracy"]), float(row["prule"]),
                          float(row["proportion_changed"]))
                for row in csv.DictReader(fh)]


def emit_pareto(records, out_dir, stem="pareto"):
    """Write ``<stem>.csv`` and ``<stem>.svg``; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, stem + ".csv")
    svg_path = os.path.join(out_dir, stem + ".svg")
    write_pareto_csv(records, csv_path)
    plotting.pareto_figure(records, svg_path)
    return csv_path, svg_path


def grid_rows(grid):
    """CSV rows: one 4x4 block per method, fairness quartile down, accuracy across."""
    rows = [["method", "fairness_quartile", "acc_Q1", "acc_Q2", "acc_Q3", "acc_Q4"]]
    for method in grid.methods():
        for fq in range(4):
            row = [method, "Q%d" % (fq + 1)]
            for aq in range(4):
                st = grid.stat(method, fq, aq)
                row.append("NaN" if st is None else st.format())
            rows.append(row)
    return rows


def emit_grid_report(grid, out_dir, stem="quartile_grid", figure=True):
    """Write ``<stem>.csv``, ``<stem>.json`` and (optionally) ``<stem>.svg``."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, stem + ".csv")
    json_path = os.path.join(out_dir, stem + ".json")
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(grid_rows(grid))
    with open(json_path, "w") as fh:
        json.dump(grid.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths = [csv_path, json_path]
    if figure:
        svg_path = os.path.join(out_dir, stem + ".svg")
        plotting.grid_figure(grid, svg_path)
        paths.append(svg_path)
    return paths


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss_y", "loss_s", "loss_ratio", "total", "accuracy", "prule"])
        for rec in trace.records:
            writer.writerow([rec.epoch, _num(rec.loss_y), _num(rec.loss_s), _num(rec.loss_ratio),
                             _num(rec.total), _num(rec.accuracy), _num(rec.prule)])
