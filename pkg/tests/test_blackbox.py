import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fairshift import blackbox
from fairshift.blackbox import LogisticModel
from fairshift.datasets import TabularDataset

finite = st.floats(-20, 20, allow_nan=False)


def blobs(n=400, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    centres = np.where(y[:, None] == 1, [3.0, 3.0], [-3.0, -3.0])
    X = centres + rng.normal(scale=0.5, size=(n, 2))
    return TabularDataset(X, rng.integers(0, 2, n), y)


class TestScoring:
    def test_zero_model(self):
        m = LogisticModel(np.zeros(3), 0.0)
        x = np.array([1.0, 2.0, 3.0])
        assert m.score(x) == 0.5
        assert m.logit(x) == 0.0
        assert m.predict(x) == 0

    def test_intercept_ln4(self):
        m = LogisticModel(np.zeros(2), math.log(4.0))
        assert m.score(np.zeros(2)) == pytest.approx(0.8, abs=1e-12)

    def test_module_level_helpers_agree(self):
        m = LogisticModel(np.array([0.5, -1.0]), 0.2)
        x = np.array([1.0, 3.0])
        assert blackbox.score(m, x) == m.score(x)
        assert blackbox.logit(m, x) == m.logit(x)
        assert blackbox.predict(m, x) == m.predict(x)

    def test_dimension_mismatch(self):
        m = LogisticModel(np.zeros(3), 0.0)
        with pytest.raises(blackbox.DimensionMismatchError):
            m.score(np.zeros(2))

    def test_extreme_logits_stay_finite(self):
        assert blackbox.sigmoid(np.array([-800.0]))[0] >= 0.0
        assert blackbox.sigmoid(np.array([800.0]))[0] == 1.0

    @settings(max_examples=200)
    @given(arrays(np.float64, 3, elements=st.floats(-5, 5)),
           arrays(np.float64, 3, elements=st.floats(-1, 1)), st.floats(-1, 1))
    def test_logit_score_roundtrip(self, x, w, b):
        # |logit| <= 16 keeps 1 - score far above float spacing
        m = LogisticModel(w, b)
        assert abs(blackbox.logit_of(m.score(x)) - m.logit(x)) < 1e-6

    @settings(max_examples=200)
    @given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite), finite)
    def test_predict_iff_positive_logit(self, x, w, b):
        m = LogisticModel(w, b)
        assert m.predict(x) == int(m.logit(x) > 0)

    @settings(max_examples=200)
    @given(arrays(np.float64, 3, elements=finite))
    def test_sigma_logit_roundtrip(self, x):
        m = LogisticModel(np.array([0.3, -0.2, 0.1]), 0.05)
        p = m.score(x)
        assert abs(blackbox.sigmoid(blackbox.logit_of(p)) - p) < 1e-9


class TestLoss:
    def test_clamped_log(self):
        loss = blackbox.binary_cross_entropy(np.array([0.0]), np.array([1.0]))
        assert loss == pytest.approx(-math.log(1e-12))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            d = int(rng.integers(1, 5))
            X = rng.normal(size=(12, d))
            y = rng.integers(0, 2, 12).astype(float)
            w = rng.normal(size=d)
            b = float(rng.normal())
            _, gw, gb = blackbox.loss_and_grad(w, b, X, y)
            theta = np.append(w, b)
            analytic = np.append(gw, gb)
            numeric = np.zeros_like(theta)
            h = 1e-6
            for i in range(len(theta)):
                up, down = theta.copy(), theta.copy()
                up[i] += h
                down[i] -= h
                numeric[i] = (blackbox.loss_and_grad(up[:-1], up[-1], X, y)[0]
                              - blackbox.loss_and_grad(down[:-1], down[-1], X, y)[0]) / (2 * h)
            err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            worst = max(worst, err)
        assert worst < 1e-5


class TestTraining:
    def test_separable_blobs(self):
        data = blobs()
        m = blackbox.train_logreg(data, epochs=2000, learning_rate=0.1)
        assert np.mean(m.predict(data.features) == data.labels) >= 0.99

    def test_noise_labels_near_chance(self):
        rng = np.random.default_rng(5)
        data = TabularDataset(rng.normal(size=(5000, 3)), rng.integers(0, 2, 5000),
                              rng.permutation(np.repeat([0, 1], 2500)))
        m = blackbox.train_logreg(data)
        assert abs(np.mean(m.predict(data.features) == data.labels) - 0.5) <= 0.05

    def test_label_symmetric_data_gives_zero_model(self):
        X = np.random.default_rng(1).normal(size=(50, 2))
        data = TabularDataset(np.vstack([X, X]), np.zeros(100), np.repeat([0, 1], 50))
        m = blackbox.train_logreg(data)
        np.testing.assert_allclose(m.weights, 0.0, atol=1e-12)
        assert m.intercept == pytest.approx(0.0, abs=1e-12)

    def test_single_class_rejected(self):
        data = TabularDataset(np.ones((5, 2)), [0, 1, 0, 1, 0], [1] * 5)
        with pytest.raises(blackbox.DegenerateDataError):
            blackbox.train_logreg(data)

    def test_deterministic_regardless_of_seed(self):
        data = blobs(100, 3)
        a = blackbox.train_logreg(data, epochs=50, seed=1)
        b = blackbox.train_logreg(data, epochs=50, seed=2)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_json_roundtrip(self, tmp_path):
        m = blackbox.train_logreg(blobs(80, 2), epochs=30)
        path = str(tmp_path / "bb.json")
        m.save(path)
        back = LogisticModel.load(path)
        np.testing.assert_array_equal(back.weights, m.weights)
        assert back.intercept == m.intercept
        assert set(m.to_dict()) == {"weights", "intercept"}
