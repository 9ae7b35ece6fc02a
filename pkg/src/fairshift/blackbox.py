"""The fixed black-box scorer: a logistic regression fit by full-batch
gradient descent."""

import json
from dataclasses import dataclass

import numpy as np

PROB_CLAMP = 1e-12


class DegenerateDataError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def logit_of(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def binary_cross_entropy(p, y):
    """Mean BCE with probabilities clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float

    @property
    def d(self):
        return len(self.weights)

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d:
            raise DimensionMismatchError(
                "input has %d features, model expects %d" % (x.shape[-1], self.d))
        return x

    def logit(self, x):
        return self._check(x) @ self.weights + self.intercept

    def score(self, x):
        return sigmoid(self.logit(x))

    def predict(self, x):
        # strict inequality: a score of exactly 0.5 is class 0
        return (self.logit(x) > 0.0).astype(np.int64) if np.ndim(x) > 1 else int(self.logit(x) > 0.0)

    def to_dict(self):
        return {"weights": [float(w) for w in self.weights], "intercept": float(self.intercept)}

    @classmethod
    def from_dict(cls, payload):
        return cls(np.asarray(payload["weights"], dtype=np.float64), float(payload["intercept"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def score(model, x):
    return model.score(x)


def logit(model, x):
    return model.logit(x)


def predict(model, x):
    return model.predict(x)


def loss_and_grad(weights, intercept, X, y):
    """Mean BCE and its gradient wrt (weights, intercept)."""
    p = sigmoid(X @ weights + intercept)
    loss = binary_cross_entropy(p, y)
    # derivative of the clamped loss: zero where the clamp is active
    active = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    resid = np.where(active, p - y, 0.0) / len(y)
    return loss, X.T @ resid, float(resid.sum())


def train_logreg(train, epochs=2000, learning_rate=0.1, seed=0):
    """Fit by plain full-batch gradient descent from zero weights.

    ``seed`` has no effect (zero initialisation, no sampling) and is kept so
    every trainer shares the same signature.
    """
    y = train.labels.astype(np.float64)
    if len(np.unique(train.labels)) < 2:
        raise DegenerateDataError("training labels contain a single class")
    X = train.features
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(epochs)):
        _, gw, gb = loss_and_grad(w, b, X, y)
        w = w - learning_rate * gw
        b = b - learning_rate * gb
    return LogisticModel(w, float(b))
