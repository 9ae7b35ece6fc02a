"""Small fully-connected ReLU networks with hand-written backprop and Adam.

Everything works on a batch ``X`` of shape (n, in_dim); a single vector is
treated as a batch of one.  The output layer is always a single linear unit.
"""

from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    pass


@dataclass
class MLP:
    layer_sizes: list
    weights: list  # weights[k] has shape (out_k, in_k)
    biases: list

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias vector per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != expected or b.shape != (expected[0],):
                raise DimensionMismatchError(
                    "layer %d: weight %s / bias %s, expected %s" % (k, w.shape, b.shape, expected))

    @property
    def n_hidden(self):
        return len(self.layer_sizes) - 2

    def params(self):
        return list(self.weights) + list(self.biases)

    def copy(self):
        return MLP(list(self.layer_sizes), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def to_dict(self):
        return {"layer_sizes": list(self.layer_sizes),
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases]}

    @classmethod
    def from_dict(cls, payload):
        return cls(payload["layer_sizes"],
                   [np.asarray(w, dtype=np.float64).reshape(o, i) for w, i, o in
                    zip(payload["weights"], payload["layer_sizes"][:-1], payload["layer_sizes"][1:])],
                   [np.asarray(b, dtype=np.float64) for b in payload["biases"]])


@dataclass
class GradBundle:
    weights: list
    biases: list
    inputs: np.ndarray = None  # d(loss)/d(x), per row

    def params(self):
        return list(self.weights) + list(self.biases)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def init(layer_sizes, seed):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLP(list(layer_sizes), weights, biases)


def _as_batch(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != net.layer_sizes[0]:
        raise DimensionMismatchError(
            "input has %d columns, network expects %d" % (x.shape[1], net.layer_sizes[0]))
    return x


def forward_cache(net, x):
    """Forward pass keeping pre-activations for ``backward``."""
    a = _as_batch(net, x)
    acts, pres = [a], []
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pres.append(z)
        a = z if k == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts[-1][:, 0], (acts, pres)


def forward(net, x):
    """Scalar network output; a float for a vector, an array for a batch."""
    out, _ = forward_cache(net, x)
    if np.asarray(x).ndim == 1:
        return float(out[0])
    return out


def backward(net, x, upstream, cache=None):
    """Gradient of ``sum_i upstream_i * forward(x_i)`` for every parameter.

    ``upstream`` is a scalar or one value per row.  The returned bundle also
    carries the per-row input gradient.  ReLU'(0) is taken as 0.
    """
    if cache is None:
        _, cache = forward_cache(net, x)
    acts, pres = cache
    n = acts[0].shape[0]
    delta = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (n,)).reshape(n, 1)
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        delta = delta @ net.weights[k]
        if k > 0:
            delta = delta * (pres[k - 1] > 0.0)
    return GradBundle(gw, gb, delta)


def adam_init(net):
    return AdamState([np.zeros_like(p) for p in net.params()],
                     [np.zeros_like(p) for p in net.params()], 0)


def adam_step(net, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update.  Returns fresh (net, state) objects."""
    t = state.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(net.params(), grads.params(), state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise DimensionMismatchError("gradient/state shapes do not match parameters")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    k = len(net.weights)
    out = MLP(list(net.layer_sizes), new_params[:k], new_params[k:])
    return out, AdamState(new_m, new_v, t)


def flatten(params):
    return np.concatenate([np.ravel(p) for p in params])


def unflatten(net, vector):
    """Rebuild a network with parameters taken from a flat vector."""
    vector = np.asarray(vector, dtype=np.float64)
    params, pos = [], 0
    for p in net.params():
        params.append(vector[pos:pos + p.size].reshape(p.shape))
        pos += p.size
    k = len(net.weights)
    return MLP(list(net.layer_sizes), params[:k], params[k:])
