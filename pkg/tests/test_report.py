import csv
import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairshift import experiment, metrics, plotting, report
from fairshift.metrics import RunRecord

SVG_NS = "{http://www.w3.org/2000/svg}"

unit = st.floats(0, 1, allow_nan=False)
records_strategy = st.lists(
    st.builds(lambda m, lf, lr, seed, a, p, c: RunRecord(m, {"lambda_fair": lf, "lambda_ratio": lr},
                                                         seed, a, p, c),
              st.sampled_from(["rbmd", "advdebias", "roc"]), st.floats(0, 5), st.floats(0, 5),
              st.integers(0, 10**6), unit, unit, unit),
    max_size=12)


def marker_counts(svg_path):
    root = ET.parse(svg_path).getroot()
    out = {}
    for g in root.iter(SVG_NS + "g"):
        gid = g.get("id", "")
        if gid.startswith("markers-"):
            out[gid[len("markers-"):]] = sum(1 for _ in g.iter(SVG_NS + "use"))
    return out


def tiny_config(tmp_path, **overrides):
    payload = {"data": {"synth": {"n": 300, "d": 3, "bias": 0.8, "seed": 0}},
               "methods": {"rbmd": {"lambda_fair": [0.5, 1.0], "lambda_ratio": [0.1, 0.2],
                                    "fixed": {"epochs": 2}},
                           "roc": {"theta": [0.55, 0.6]}},
               "repeats": 3, "output_dir": str(tmp_path / "out")}
    payload.update(overrides)
    return experiment.ExperimentConfig.from_dict(payload)


class TestPareto:
    def test_empty_records(self, tmp_path):
        csv_path, svg_path = report.emit_pareto([], str(tmp_path))
        with open(csv_path) as fh:
            assert fh.read().strip() == ",".join(report.PARETO_COLUMNS)
        assert marker_counts(svg_path) == {}
        assert ET.parse(svg_path).getroot().tag == SVG_NS + "svg"

    def test_marker_count_equals_record_count(self, tmp_path):
        recs = [RunRecord("rbmd", {}, k, 0.5 + 0.01 * k, 0.7, 0.1) for k in range(7)]
        recs += [RunRecord("roc", {"theta": 0.6}, 0, 0.6, 0.9, 0.2)]
        _, svg_path = report.emit_pareto(recs, str(tmp_path))
        assert marker_counts(svg_path) == {"rbmd": 7, "roc": 1}

    @settings(max_examples=30, deadline=None)
    @given(records_strategy)
    def test_csv_roundtrip(self, tmp_path_factory, recs):
        path = str(tmp_path_factory.mktemp("p") / "p.csv")
        report.write_pareto_csv(recs, path)
        assert report.read_pareto_csv(path) == recs

    def test_columns(self, tmp_path):
        csv_path, _ = report.emit_pareto([RunRecord("roc", {"theta": 0.6}, 0, 0.6, 0.9, 0.2)],
                                         str(tmp_path))
        with open(csv_path) as fh:
            header = next(csv.reader(fh))
        assert header[:7] == ["method", "lambda_fair", "lambda_ratio", "seed", "accuracy",
                              "prule", "proportion_changed"]

    def test_byte_reproducible(self, tmp_path):
        recs = [RunRecord("rbmd", {"lambda_fair": 1.0}, k, 0.6, 0.1 * k, 0.05) for k in range(5)]
        a = report.emit_pareto(recs, str(tmp_path / "a"))
        b = report.emit_pareto(recs, str(tmp_path / "b"))
        for pa, pb in zip(a, b):
            with open(pa, "rb") as fa, open(pb, "rb") as fb:
                assert fa.read() == fb.read()


class TestGridReport:
    def grid(self):
        refs = [RunRecord("advdebias", {}, 0, a, f, 0.3) for f, a in
                [(0.1, 0.1), (0.3, 0.3), (0.6, 0.6), (0.9, 0.9)]]
        runs = refs + [RunRecord("rbmd", {}, 0, 0.95, 0.95, 0.02),
                       RunRecord("rbmd", {}, 1, 0.92, 0.95, 0.04)]
        return metrics.build_quartile_grid(refs, runs)

    def test_cells_and_nan(self, tmp_path):
        paths = report.emit_grid_report(self.grid(), str(tmp_path))
        assert [os.path.basename(p) for p in paths] == ["quartile_grid.csv", "quartile_grid.json",
                                                        "quartile_grid.svg"]
        with open(paths[0]) as fh:
            rows = list(csv.reader(fh))
        rbmd_q4 = [r for r in rows if r[:2] == ["rbmd", "Q4"]][0]
        assert rbmd_q4[2:] == ["NaN", "NaN", "NaN", "0.03±0.01 (2)"]
        assert all(c == "NaN" for r in rows[1:] if r[1] != "Q4" for c in r[2:])
        with open(paths[1]) as fh:
            payload = json.load(fh)
        assert payload["methods"]["rbmd"][3][3] == {"mean": pytest.approx(0.03), "count": 2,
                                                     "std": pytest.approx(0.01)}


class TestExperiment:
    def test_counts_and_seeds(self, tmp_path):
        config = tiny_config(tmp_path)
        records, failures = experiment.run_grid(config)
        rbmd = [r for r in records if r.method == "rbmd"]
        assert len(rbmd) == 4 * 3 and not failures
        assert len([r for r in records if r.method == "roc"]) == 2
        assert sorted({r.seed for r in rbmd}) == [j * 1000 + k for j in range(4) for k in range(3)]
        assert len(os.listdir(tmp_path / "out" / "runs")) == len(records)
        assert metrics.read_records(str(tmp_path / "out" / "records.jsonl")) == records

    def test_rerun_is_bit_identical(self, tmp_path):
        experiment.run_grid(tiny_config(tmp_path / "a"))
        experiment.run_grid(tiny_config(tmp_path / "b"))
        for name in ("records.jsonl", "blackbox.json"):
            with open(tmp_path / "a" / "out" / name, "rb") as fa, \
                    open(tmp_path / "b" / "out" / name, "rb") as fb:
                assert fa.read() == fb.read()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failures_recorded_not_fatal(self, tmp_path):
        config = tiny_config(tmp_path, methods={
            "rbmd": {"lambda_fair": [1.0], "lambda_ratio": [0.1, 1e300],
                     "fixed": {"epochs": 2, "lr_g": 1e300}}}, repeats=1)
        records, failures = experiment.run_grid(config)
        assert len(records) + len(failures) == 2
        with open(tmp_path / "out" / "failures.jsonl") as fh:
            assert len(fh.readlines()) == len(failures) >= 1

    def test_parallel_matches_serial(self, tmp_path):
        serial, _ = experiment.run_grid(tiny_config(tmp_path / "s"), write=False)
        parallel, _ = experiment.run_grid(tiny_config(tmp_path / "p", n_jobs=2), write=False)
        assert serial == parallel

    @pytest.mark.parametrize("bad", [{"repeats": 0}, {"methods": {}},
                                     {"methods": {"rbmd": {"lambda_fair": []}}},
                                     {"methods": {"nope": {"x": [1]}}}])
    def test_invalid_config(self, tmp_path, bad):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, **bad)

    def test_preset_bounds(self):
        law = experiment.PRESET_GRIDS["lawschool"]
        assert max(law["lambda_ratio"]) == 0.25 and max(law["lambda_fair"]) == 3.0
        assert len(law["lambda_fair"]) == 6
        compas = experiment.PRESET_GRIDS["compas"]
        assert max(compas["lambda_ratio"]) == 4.0 and max(compas["lambda_fair"]) == 0.1

    def test_two_by_two_grid_three_repeats(self):
        config = experiment.ExperimentConfig(methods={"rbmd": {"lambda_fair": [1, 2],
                                                               "lambda_ratio": [0.1, 0.2]}})
        assert len(experiment.plan(config)) == 12


class TestFigures:
    def test_other_figures_are_valid_svg(self, tmp_path):
        edges, counts = metrics.histogram_fixed_width(np.linspace(0.5, 1.5, 50))
        plotting.ratio_histogram_figure({"rbmd": (edges, counts)}, str(tmp_path / "h.svg"))
        plotting.calibration_figure([(0.2, 0.3), (0.7, 0.4)], str(tmp_path / "c.svg"))
        plotting.depth_sweep_figure({"rbmd": {0: 0.0, 1: 0.5}}, str(tmp_path / "d.svg"))
        plotting.weights_figure(1.0, [0.5, -0.2], ["a", "b"], str(tmp_path / "w.svg"))
        for name in ("h", "c", "d", "w"):
            assert ET.parse(str(tmp_path / (name + ".svg"))).getroot().tag == SVG_NS + "svg"
