"""Ratio-based debiasing of a black-box scorer.

The debiased score is ``sigmoid(r(x) * f_logit(x))`` where ``r`` is a small
network.  ``r`` is trained against an adversary that tries to recover the
sensitive attribute from the rescaled logit, while a penalty keeps ``r``
close to 1 so that few predictions move.  Only a negative ratio can flip a
prediction.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import netcore
from .blackbox import LogisticModel, sigmoid
from .metrics import accuracy, p_rule


class TrainingDivergedError(RuntimeError):
    pass


class SingleGroupError(ValueError):
    pass


class NotLinearRatioError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


ADVERSARY_SIZES = (1, 16, 16, 1)


@dataclass
class TrainConfig:
    lambda_fair: float = 1.0
    lambda_ratio: float = 0.1
    epochs: int = 300
    batch_size: int = 256
    lr_g: float = 1e-3
    lr_h: float = 1e-3
    adv_steps_per_gen_step: int = 1
    ratio_hidden_layers: int = 2
    hidden_width: int = 32
    full_batch: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.lambda_fair < 0 or self.lambda_ratio < 0:
            raise ValueError("lambda_fair and lambda_ratio must be >= 0")
        if self.ratio_hidden_layers not in (0, 2, 3):
            raise ValueError("ratio_hidden_layers must be 0, 2 or 3")
        for name in ("epochs", "batch_size", "adv_steps_per_gen_step", "hidden_width"):
            if int(getattr(self, name)) < 1:
                raise ValueError("%s must be >= 1" % name)
        if self.lr_g <= 0 or self.lr_h <= 0:
            raise ValueError("learning rates must be > 0")

    def layer_sizes(self, d):
        return [d] + [self.hidden_width] * self.ratio_hidden_layers + [1]

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    loss_y: float
    loss_s: float
    loss_ratio: float
    total: float
    accuracy: float
    prule: float


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)


@dataclass
class DebiasedModel:
    blackbox: LogisticModel
    ratio_net: netcore.MLP

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.blackbox.d:
            raise DimensionMismatchError(
                "input has %d features, model expects %d" % (x.shape[-1], self.blackbox.d))
        return x

    def ratio(self, x):
        return netcore.forward(self.ratio_net, self._check(x))

    def logit(self, x):
        x = self._check(x)
        return self.ratio(x) * self.blackbox.logit(x)

    def score(self, x):
        return sigmoid(self.logit(x))

    def predict(self, x):
        z = self.logit(x)
        return (z > 0.0).astype(np.int64) if np.ndim(z) else int(z > 0.0)

    def to_dict(self):
        return {"kind": "rbmd", "blackbox": self.blackbox.to_dict(),
                "ratio_net": self.ratio_net.to_dict()}

    @classmethod
    def from_dict(cls, payload):
        return cls(LogisticModel.from_dict(payload["blackbox"]),
                   netcore.MLP.from_dict(payload["ratio_net"]))


@dataclass
class Adversary:
    net: netcore.MLP

    def __post_init__(self):
        if self.net.layer_sizes[0] != 1:
            raise DimensionMismatchError("adversary input must be a single logit")

    def logit(self, z):
        return netcore.forward(self.net, np.asarray(z, dtype=np.float64).reshape(-1, 1))


@dataclass
class AdvDebiasModel:
    """Classifier trained from scratch with an adversarial fairness term."""
    net: netcore.MLP

    def logit(self, x):
        return netcore.forward(self.net, x)

    def score(self, x):
        return sigmoid(self.logit(x))

    def predict(self, x):
        z = self.logit(x)
        return (z > 0.0).astype(np.int64) if np.ndim(z) else int(z > 0.0)

    def to_dict(self):
        return {"kind": "advdebias", "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, payload):
        return cls(netcore.MLP.from_dict(payload["net"]))


def load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "rbmd":
        return DebiasedModel.from_dict(payload)
    if kind == "advdebias":
        return AdvDebiasModel.from_dict(payload)
    raise ValueError("unknown model kind %r in %s" % (kind, path))


def save_model(model, path, extra=None):
    payload = model.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def g_score(model, x):
    return model.score(x)


def g_predict(model, x):
    return model.predict(x)


def bce_with_logits(z, y):
    """Per-row binary cross-entropy of sigmoid(z) against y, computed stably."""
    z = np.asarray(z, dtype=np.float64)
    return np.logaddexp(0.0, z) - np.asarray(y, dtype=np.float64) * z


def ratio_penalty(ratios):
    r = np.asarray(ratios, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((r - 1.0) ** 2))


def new_adversary(rng):
    return Adversary(netcore.init(list(ADVERSARY_SIZES), rng))


def new_ratio_net(d, config, rng):
    net = netcore.init(config.layer_sizes(d), rng)
    # start at r = 1 + small, i.e. g close to f
    net.biases[-1][:] = 1.0
    return net


def rbmd_loss(X, s, y, model, adversary, config):
    """Return ``(total, (L_Y, L_S, L_ratio))`` averaged over the batch."""
    total, parts, _ = _rbmd_forward(X, s, y, model, adversary, config)
    return total, parts


def _rbmd_forward(X, s, y, model, adversary, config):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty batch")
    r, r_cache = netcore.forward_cache(model.ratio_net, X)
    fl = model.blackbox.logit(X)
    z = r * fl
    a, a_cache = netcore.forward_cache(adversary.net, z.reshape(-1, 1))
    loss_y = float(np.mean(bce_with_logits(z, y)))
    loss_s = float(np.mean(bce_with_logits(a, s)))
    loss_r = ratio_penalty(r)
    total = loss_y - config.lambda_fair * loss_s + config.lambda_ratio * loss_r
    cache = (r, r_cache, fl, z, a, a_cache)
    return total, (loss_y, loss_s, loss_r), cache


def rbmd_loss_and_grad(X, s, y, model, adversary, config):
    """Loss and its gradient wrt the ratio-network parameters (adversary frozen)."""
    total, parts, cache = _rbmd_forward(X, s, y, model, adversary, config)
    r, r_cache, fl, z, a, a_cache = cache
    n = len(r)
    # d(adversary logit)/dz
    da_dz = netcore.backward(adversary.net, None, np.ones(n), cache=a_cache).inputs[:, 0]
    dz = (sigmoid(z) - y) - config.lambda_fair * (sigmoid(a) - s) * da_dz
    dr = (dz * fl + 2.0 * config.lambda_ratio * (r - 1.0)) / n
    grads = netcore.backward(model.ratio_net, None, dr, cache=r_cache)
    return total, parts, grads


def adversary_loss_and_grad(z, s, adversary):
    """Mean BCE of the adversary predicting ``s`` from the logit ``z``."""
    a, cache = netcore.forward_cache(adversary.net, np.asarray(z, dtype=np.float64).reshape(-1, 1))
    loss = float(np.mean(bce_with_logits(a, s)))
    grads = netcore.backward(adversary.net, None, (sigmoid(a) - s) / len(a), cache=cache)
    return loss, grads


def _check_groups(train):
    if len(np.unique(train.sensitive)) < 2:
        raise SingleGroupError("training data contains a single sensitive group")


def _batches(n, config, rng):
    if config.full_batch or config.batch_size >= n:
        return [np.arange(n)]
    perm = rng.permutation(n)
    return [perm[i:i + config.batch_size] for i in range(0, n, config.batch_size)]


def _guard(total, epoch):
    if not np.isfinite(total):
        raise TrainingDivergedError("loss became non-finite at epoch %d" % epoch)


def train_rbmd(train, blackbox, config):
    """Alternating min-max training of the ratio network.

    Per mini-batch: ``adv_steps_per_gen_step`` Adam steps on the adversary
    (ratio frozen), then one Adam step on the ratio network (adversary
    frozen).  Returns ``(DebiasedModel, TrainTrace)``.
    """
    _check_groups(train)
    if blackbox.d != train.d:
        raise DimensionMismatchError("black box expects %d features, data has %d"
                                     % (blackbox.d, train.d))
    rng = np.random.default_rng(config.seed)
    X = train.features
    y = train.labels.astype(np.float64)
    s = train.sensitive.astype(np.float64)
    fl_all = blackbox.logit(X)

    model = DebiasedModel(blackbox, new_ratio_net(train.d, config, rng))
    adversary = new_adversary(rng)
    g_state = netcore.adam_init(model.ratio_net)
    h_state = netcore.adam_init(adversary.net)
    trace = TrainTrace()

    for epoch in range(config.epochs):
        for idx in _batches(len(y), config, rng):
            Xb, yb, sb = X[idx], y[idx], s[idx]
            zb = netcore.forward(model.ratio_net, Xb) * fl_all[idx]
            for _ in range(config.adv_steps_per_gen_step):
                _, h_grads = adversary_loss_and_grad(zb, sb, adversary)
                net, h_state = netcore.adam_step(adversary.net, h_grads, h_state, config.lr_h)
                adversary = Adversary(net)
            total, _, g_grads = rbmd_loss_and_grad(Xb, sb, yb, model, adversary, config)
            _guard(total, epoch)
            net, g_state = netcore.adam_step(model.ratio_net, g_grads, g_state, config.lr_g)
            model = DebiasedModel(blackbox, net)
        trace.records.append(_epoch_record(epoch, X, s, y, train, model, adversary, config))
        _guard(trace.records[-1].total, epoch)
    return model, trace


def _epoch_record(epoch, X, s, y, train, model, adversary, config):
    total, (ly, ls, lr_), _ = _rbmd_forward(X, s, y, model, adversary, config)
    pred = model.predict(X)
    return EpochRecord(epoch, ly, ls, lr_, total, accuracy(pred, train.labels),
                       p_rule(pred, train.sensitive))


def train_advdebias(train, config):
    """Adversarial in-processing baseline trained from scratch.

    Same alternating schedule as ``train_rbmd``; the adversary reads the
    classifier logit and the ratio penalty is absent.
    """
    _check_groups(train)
    rng = np.random.default_rng(config.seed)
    X = train.features
    y = train.labels.astype(np.float64)
    s = train.sensitive.astype(np.float64)
    clf = netcore.init(config.layer_sizes(train.d), rng)
    adversary = new_adversary(rng)
    c_state = netcore.adam_init(clf)
    h_state = netcore.adam_init(adversary.net)

    for epoch in range(config.epochs):
        for idx in _batches(len(y), config, rng):
            Xb, yb, sb = X[idx], y[idx], s[idx]
            zb, c_cache = netcore.forward_cache(clf, Xb)
            for _ in range(config.adv_steps_per_gen_step):
                _, h_grads = adversary_loss_and_grad(zb, sb, adversary)
                net, h_state = netcore.adam_step(adversary.net, h_grads, h_state, config.lr_h)
                adversary = Adversary(net)
            total, grads = _advdebias_loss_and_grad(zb, c_cache, sb, yb, clf, adversary, config)
            _guard(total, epoch)
            clf, c_state = netcore.adam_step(clf, grads, c_state, config.lr_g)
    return AdvDebiasModel(clf)


def advdebias_loss(X, s, y, clf, adversary, config):
    z, cache = netcore.forward_cache(clf, X)
    return _advdebias_loss_and_grad(z, cache, s, y, clf, adversary, config)[0]


def _advdebias_loss_and_grad(z, c_cache, s, y, clf, adversary, config):
    n = len(z)
    a, a_cache = netcore.forward_cache(adversary.net, z.reshape(-1, 1))
    total = float(np.mean(bce_with_logits(z, y))
                  - config.lambda_fair * np.mean(bce_with_logits(a, s)))
    da_dz = netcore.backward(adversary.net, None, np.ones(n), cache=a_cache).inputs[:, 0]
    dz = ((sigmoid(z) - y) - config.lambda_fair * (sigmoid(a) - s) * da_dz) / n
    return total, netcore.backward(clf, None, dz, cache=c_cache)


def export_linear_ratio_weights(model):
    """Coefficients ``(w0, [w1..wd])`` of a linear ratio ``w0 + w . x``."""
    net = model.ratio_net
    if net.n_hidden != 0:
        raise NotLinearRatioError("ratio not linear: network has %d hidden layers" % net.n_hidden)
    return float(net.biases[0][0]), [float(w) for w in net.weights[0][0]]
