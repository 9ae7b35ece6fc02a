"""``fairshift`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.
Any subcommand accepts ``--config file.json`` whose keys are option names
(dashes or underscores); explicit flags win over the file.  The ``grid``
subcommand instead reads an experiment config (see ``ExperimentConfig``).
``FAIRSHIFT_SEED`` sets the default seed.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import (baselines, blackbox, datasets, experiment, explain, metrics, netcore,
               plotting, rbmd, report)

log = logging.getLogger("fairshift")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

DATA_ERRORS = (datasets.DataError, datasets.DimensionMismatchError, metrics.MissingGroupError,
               metrics.EmptyInputError, rbmd.SingleGroupError, rbmd.DimensionMismatchError,
               blackbox.DegenerateDataError, blackbox.DimensionMismatchError,
               netcore.DimensionMismatchError, baselines.InfeasibleTargetError,
               rbmd.NotLinearRatioError, explain.EmptyDataError, FileNotFoundError,
               json.JSONDecodeError)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _env_seed():
    raw = os.environ.get("FAIRSHIFT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError("FAIRSHIFT_SEED must be an integer, got %r" % raw) from None


def add_data_args(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="CSV file with a header row")
    g.add_argument("--sensitive-col", default="s")
    g.add_argument("--label-col", default="y")
    g.add_argument("--synth-n", type=int, default=5000, help="synthetic rows when --data is absent")
    g.add_argument("--synth-d", type=int, default=6)
    g.add_argument("--synth-bias", type=float, default=0.8)
    g.add_argument("--synth-seed", type=int, default=0)
    g.add_argument("--train-fraction", type=float, default=0.7)
    g.add_argument("--split-seed", type=int, default=0)


def add_train_args(p):
    g = p.add_argument_group("training")
    d = rbmd.TrainConfig()
    g.add_argument("--lambda-fair", type=float, default=d.lambda_fair)
    g.add_argument("--lambda-ratio", type=float, default=d.lambda_ratio)
    g.add_argument("--ratio-hidden", type=int, choices=(0, 2, 3), default=d.ratio_hidden_layers)
    g.add_argument("--hidden-width", type=int, default=d.hidden_width)
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--batch-size", type=int, default=d.batch_size)
    g.add_argument("--lr-g", type=float, default=d.lr_g)
    g.add_argument("--lr-h", type=float, default=d.lr_h)
    g.add_argument("--adv-steps", type=int, default=d.adv_steps_per_gen_step)
    g.add_argument("--full-batch", action="store_true")
    g.add_argument("--seed", type=int, default=None)


def data_spec(args):
    if args.data:
        return {"csv": args.data, "sensitive_col": args.sensitive_col,
                "label_col": args.label_col}
    return {"synth": {"n": args.synth_n, "d": args.synth_d, "bias": args.synth_bias,
                      "seed": args.synth_seed}}


def prepared_data(args):
    return experiment.prepare(experiment.load_data(data_spec(args)),
                              datasets.SplitSpec(args.train_fraction, args.split_seed))


def train_config(args):
    return rbmd.TrainConfig(lambda_fair=args.lambda_fair, lambda_ratio=args.lambda_ratio,
                            epochs=args.epochs, batch_size=args.batch_size, lr_g=args.lr_g,
                            lr_h=args.lr_h, adv_steps_per_gen_step=args.adv_steps,
                            ratio_hidden_layers=args.ratio_hidden, hidden_width=args.hidden_width,
                            full_batch=args.full_batch, seed=args.seed)


def get_blackbox(args, prep):
    if getattr(args, "blackbox", None):
        return blackbox.LogisticModel.load(args.blackbox)
    log.info("no --blackbox given; training one on the train split")
    return blackbox.train_logreg(prep.train)


def print_rows(rows):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerows(rows)


def evaluation_rows(name, pred, pred_f, part):
    return [["method", "split", "accuracy", "prule", "dp_difference", "proportion_changed"],
            [name, "test", repr(metrics.accuracy(pred, part.labels)),
             repr(metrics.p_rule(pred, part.sensitive)),
             repr(metrics.dp_difference(pred, part.sensitive)),
             repr(metrics.proportion_changed(pred_f, pred))]]


# -- subcommands ---------------------------------------------------------

def cmd_synth(args):
    data = datasets.synth_biased(args.n, args.d, args.bias, args.seed)
    data.to_csv(args.out, args.sensitive_col, args.label_col)
    print("wrote %d rows x %d features to %s" % (data.n, data.d, args.out))


def cmd_train_blackbox(args):
    prep = prepared_data(args)
    model = blackbox.train_logreg(prep.train, args.epochs, args.lr, args.seed)
    model.save(args.out)
    pred = model.predict(prep.test.features)
    print_rows(evaluation_rows("blackbox", pred, pred, prep.test))


def cmd_debias(args):
    prep = prepared_data(args)
    bb = get_blackbox(args, prep)
    model, trace = rbmd.train_rbmd(prep.train, bb, train_config(args))
    rbmd.save_model(model, args.out, {"config": train_config(args).to_dict(),
                                      "feature_names": prep.train.feature_names})
    if args.trace:
        report.write_trace_csv(trace, args.trace)
    print_rows(evaluation_rows("rbmd", model.predict(prep.test.features),
                               bb.predict(prep.test.features), prep.test))


def cmd_baseline(args):
    prep = prepared_data(args)
    bb = get_blackbox(args, prep)
    pred_f = bb.predict(prep.test.features)
    if args.method == "advdebias":
        model = rbmd.train_advdebias(prep.train, train_config(args))
        rbmd.save_model(model, args.out, {"config": train_config(args).to_dict()})
        pred = model.predict(prep.test.features)
    elif args.method == "roc":
        group = args.deprived_group
        if group is None:
            group = baselines.deprived_group(bb.predict(prep.train.features), prep.train.sensitive)
        params = baselines.RocParams(args.theta, group, args.favorable_label)
        pred = baselines.roc_postprocess(bb.score(prep.test.features), prep.test.sensitive, params)
        with open(args.out, "w") as fh:
            json.dump({"kind": "roc", "theta": params.theta, "deprived_group": params.deprived_group,
                       "favorable_label": params.favorable_label}, fh, indent=2)
    else:
        th = baselines.fit_group_thresholds(bb.score(prep.train.features), prep.train.sensitive,
                                            prep.train.labels, args.target_prule)
        pred = th.predict(bb.score(prep.test.features), prep.test.sensitive)
        with open(args.out, "w") as fh:
            json.dump(th.to_dict(), fh, indent=2)
    print_rows(evaluation_rows(args.method, pred, pred_f, prep.test))


def _load_any(path):
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "rbmd":
        return kind, rbmd.DebiasedModel.from_dict(payload)
    if kind == "advdebias":
        return kind, rbmd.AdvDebiasModel.from_dict(payload)
    if kind == "roc":
        return kind, baselines.RocParams(payload["theta"], payload["deprived_group"],
                                         payload["favorable_label"])
    if kind == "oracle-threshold":
        return kind, baselines.GroupThresholds(payload["t0"], payload["t1"])
    if "weights" in payload and "intercept" in payload:
        return "blackbox", blackbox.LogisticModel.from_dict(payload)
    raise datasets.DataError("unrecognised model file %s" % path)


def _predict_any(kind, model, bb, part):
    if kind in ("rbmd", "advdebias", "blackbox"):
        return model.predict(part.features)
    if kind == "roc":
        return baselines.roc_postprocess(bb.score(part.features), part.sensitive, model)
    return model.predict(bb.score(part.features), part.sensitive)


def cmd_evaluate(args):
    prep = prepared_data(args)
    kind, model = _load_any(args.model)
    if kind == "rbmd":
        bb = model.blackbox
    elif args.blackbox:
        bb = blackbox.LogisticModel.load(args.blackbox)
    elif kind == "blackbox":
        bb = model
    else:
        raise UsageError("--blackbox is required to evaluate a %s model" % kind)
    pred = _predict_any(kind, model, bb, prep.test)
    print_rows(evaluation_rows(kind, pred, bb.predict(prep.test.features), prep.test))


def cmd_grid(args):
    if args.config is None and args.preset is None:
        raise UsageError("grid needs --config or --preset")
    payload = {}
    if args.config:
        with open(args.config) as fh:
            payload = json.load(fh)
    if args.preset:
        payload.setdefault("methods", {})
        payload["methods"].setdefault("rbmd", dict(experiment.PRESET_GRIDS[args.preset]))
        payload["methods"].setdefault("advdebias",
                                      {"lambda_fair": experiment.PRESET_GRIDS[args.preset]["lambda_fair"]})
    if args.data:
        payload["data"] = {"csv": args.data, "sensitive_col": args.sensitive_col,
                           "label_col": args.label_col}
    for key in ("output_dir", "repeats", "n_jobs", "base_seed"):
        value = getattr(args, key)
        if value is not None:
            payload[key] = value
    payload.setdefault("base_seed", _env_seed())
    try:
        config = experiment.ExperimentConfig.from_dict(payload)
    except (TypeError, ValueError) as exc:
        raise UsageError("bad experiment config: %s" % exc) from None
    records, failures = experiment.run_grid(config)
    print("%d runs recorded, %d failed; records in %s"
          % (len(records), len(failures), os.path.join(config.output_dir, "records.jsonl")))


def cmd_explain(args):
    prep = prepared_data(args)
    kind, model = _load_any(args.model)
    if kind not in ("rbmd", "advdebias"):
        raise UsageError("explain needs an rbmd or advdebias model file")
    bb = model.blackbox if kind == "rbmd" else (
        blackbox.LogisticModel.load(args.blackbox) if args.blackbox else None)
    if bb is None:
        raise UsageError("--blackbox is required for an advdebias model")
    X = prep.train.features
    labels = explain.change_labels(bb.predict(X), model.predict(X))
    names = prep.train.feature_names
    os.makedirs(args.out_dir, exist_ok=True)

    tree = explain.fit_cart(X, labels, args.max_depth, args.min_leaf)
    with open(os.path.join(args.out_dir, "tree.txt"), "w") as fh:
        fh.write(tree.to_text(names) + "\n")
    with open(os.path.join(args.out_dir, "tree.json"), "w") as fh:
        fh.write(tree.to_json(names) + "\n")

    depths = [int(v) for v in args.depths.split(",")]
    sweep = explain.depth_sweep(X, labels, depths, args.min_leaf)
    with open(os.path.join(args.out_dir, "depth_sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["depth", "f1"])
        w.writerows([d, repr(v)] for d, v in sorted(sweep.items()))
    plotting.depth_sweep_figure({kind: sweep}, os.path.join(args.out_dir, "depth_sweep.svg"))

    if kind == "rbmd" and model.ratio_net.n_hidden == 0:
        w0, ws = rbmd.export_linear_ratio_weights(model)
        with open(os.path.join(args.out_dir, "ratio_weights.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["term", "weight"])
            w.writerow(["intercept", repr(w0)])
            w.writerows([n, repr(v)] for n, v in zip(names, ws))
        plotting.weights_figure(w0, ws, names, os.path.join(args.out_dir, "ratio_weights.svg"))

    print("changed rows on train: %d / %d" % (int(labels.sum()), len(labels)))
    print(tree.to_text(names))


def cmd_report(args):
    records = metrics.read_records(args.runs)
    os.makedirs(args.out_dir, exist_ok=True)
    written = list(report.emit_pareto(records, args.out_dir))
    reference = [r for r in records if r.method == args.reference_method]
    if reference:
        grid = metrics.build_quartile_grid(reference, records, args.min_runs, args.gate_method)
        written += report.emit_grid_report(grid, args.out_dir)
    else:
        log.warning("no %s runs: quartile grid skipped", args.reference_method)

    if args.model:
        prep = prepared_data(args)
        kind, model = _load_any(args.model)
        if kind != "rbmd":
            raise UsageError("--model for report must be an rbmd model")
        X = prep.test.features
        edges, counts = metrics.ratio_histogram(model, X)
        path = os.path.join(args.out_dir, "ratio_histogram.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            w.writerows([repr(float(lo)), repr(float(hi)), int(c)]
                        for lo, hi, c in zip(edges[:-1], edges[1:], counts))
        written.append(path)
        svg = os.path.join(args.out_dir, "ratio_histogram.svg")
        plotting.ratio_histogram_figure({"rbmd": (edges, counts)}, svg)
        written.append(svg)
        pairs = metrics.calibration_pairs(model.blackbox, model, X)
        path = os.path.join(args.out_dir, "calibration.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["f_score", "g_score", "quadrant"])
            w.writerows([repr(f), repr(g), metrics.quadrant(f, g)] for f, g in pairs)
        written.append(path)
        svg = os.path.join(args.out_dir, "calibration.svg")
        plotting.calibration_figure(pairs, svg)
        written.append(svg)
    for path in written:
        print(path)


# -- parser --------------------------------------------------------------

def build_parser():
    parser = Parser(prog="fairshift", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)
    sub.required = True

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values")
        p.set_defaults(func=func)
        return p

    p = command("synth", cmd_synth, "write a synthetic biased dataset as CSV")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--bias", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sensitive-col", default="s")
    p.add_argument("--label-col", default="y")
    p.add_argument("--out", required=True)

    p = command("train-blackbox", cmd_train_blackbox, "fit the logistic black box")
    add_data_args(p)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="blackbox.json")

    p = command("debias", cmd_debias, "train a ratio network on top of the black box")
    add_data_args(p)
    add_train_args(p)
    p.add_argument("--blackbox", help="black-box JSON (trained on the fly if absent)")
    p.add_argument("--out", default="rbmd.json")
    p.add_argument("--trace", help="write per-epoch losses to this CSV")

    p = command("baseline", cmd_baseline, "run a comparison method")
    add_data_args(p)
    add_train_args(p)
    p.add_argument("--method", choices=("roc", "oracle-threshold", "advdebias"), required=True)
    p.add_argument("--blackbox")
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--deprived-group", type=int, choices=(0, 1), default=None)
    p.add_argument("--favorable-label", type=int, choices=(0, 1), default=1)
    p.add_argument("--target-prule", type=float, default=0.8)
    p.add_argument("--out", default="baseline.json")

    p = command("evaluate", cmd_evaluate, "test-split metrics of a saved model")
    add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--blackbox")

    p = command("grid", cmd_grid, "grid search over method hyperparameters")
    p.add_argument("--preset", choices=sorted(experiment.PRESET_GRIDS))
    p.add_argument("--data", help="CSV file; replaces the config's data block")
    p.add_argument("--sensitive-col", default="s")
    p.add_argument("--label-col", default="y")
    p.add_argument("--output-dir", "--out-dir", dest="output_dir")
    p.add_argument("--repeats", type=int)
    p.add_argument("--n-jobs", type=int)
    p.add_argument("--base-seed", type=int)

    p = command("explain", cmd_explain, "surrogate tree over changed predictions")
    add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--blackbox")
    p.add_argument("--max-depth", type=int, default=2)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--depths", default="0,1,2,3,4,5,6")
    p.add_argument("--out-dir", default="explain")

    p = command("report", cmd_report, "Pareto/quartile-grid reports and figures")
    add_data_args(p)
    p.add_argument("--runs", required=True, help="records.jsonl from `grid`")
    p.add_argument("--out-dir", default="report")
    p.add_argument("--min-runs", type=int, default=2)
    p.add_argument("--reference-method", default="advdebias")
    p.add_argument("--gate-method", default="rbmd")
    p.add_argument("--model", help="rbmd model for ratio histogram and calibration plots")
    return parser


def _apply_config_file(parser, argv):
    """Re-parse with values from ``--config`` installed as defaults."""
    args = parser.parse_args(argv)
    if args.command == "grid" or not args.config:
        return args
    with open(args.config) as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise UsageError("--config must hold a JSON object")
    values = {k.replace("-", "_"): v for k, v in values.items()}
    known = set(vars(args))
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError("unknown option(s) in %s: %s" % (args.config, ", ".join(unknown)))
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _env_seed()
        args.func(args)
    except UsageError as exc:
        print("fairshift: usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except rbmd.TrainingDivergedError as exc:
        print("fairshift: training diverged: %s" % exc, file=sys.stderr)
        return EXIT_DIVERGED
    except DATA_ERRORS as exc:
        print("fairshift: data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print("fairshift: data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
