"""Surrogate decision trees describing which rows a debiasing method changed."""

import json
from dataclasses import dataclass

import numpy as np


class EmptyDataError(ValueError):
    pass


@dataclass
class Node:
    counts: tuple  # (n_label0, n_label1) of the training rows reaching the node
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1

    @property
    def is_leaf(self):
        return self.feature < 0

    @property
    def prediction(self):
        # majority, tie -> 0
        return int(self.counts[1] > self.counts[0])


@dataclass
class CartTree:
    nodes: list
    max_depth: int

    def depth(self, i=0):
        node = self.nodes[i]
        if node.is_leaf:
            return 0
        return 1 + max(self.depth(node.left), self.depth(node.right))

    def leaf_index(self, x):
        i = 0
        while not self.nodes[i].is_leaf:
            node = self.nodes[i]
            i = node.left if x[node.feature] <= node.threshold else node.right
        return i

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.nodes[self.leaf_index(X)].prediction
        return np.array([self.nodes[self.leaf_index(x)].prediction for x in X], dtype=np.int64)

    def to_dict(self, feature_names=None):
        def build(i):
            node = self.nodes[i]
            out = {"counts": list(node.counts), "prediction": node.prediction}
            if not node.is_leaf:
                out.update({
                    "feature": node.feature,
                    "feature_name": feature_names[node.feature] if feature_names else None,
                    "threshold": node.threshold,
                    "left": build(node.left),
                    "right": build(node.right),
                })
            return out
        return {"max_depth": self.max_depth, "root": build(0)}

    def to_json(self, feature_names=None):
        return json.dumps(self.to_dict(feature_names), indent=2)

    def to_text(self, feature_names=None):
        names = feature_names or ["x%d" % j for j in range(self._n_features_hint())]
        lines = []

        def walk(i, indent):
            node = self.nodes[i]
            pad = "|   " * indent
            if node.is_leaf:
                lines.append("%sclass: %d  (n0=%d, n1=%d)"
                             % (pad, node.prediction, node.counts[0], node.counts[1]))
                return
            name = names[node.feature]
            lines.append("%s%s <= %.4g" % (pad, name, node.threshold))
            walk(node.left, indent + 1)
            lines.append("%s%s >  %.4g" % (pad, name, node.threshold))
            walk(node.right, indent + 1)

        walk(0, 0)
        return "\n".join(lines)

    def _n_features_hint(self):
        return 1 + max([n.feature for n in self.nodes] + [0])


def change_labels(pred_f, pred_g):
    a = np.asarray(pred_f)
    b = np.asarray(pred_g)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    return (a != b).astype(np.int64)


def gini(n0, n1):
    n = n0 + n1
    if n == 0:
        return 0.0
    p = n1 / n
    return 2.0 * p * (1.0 - p)


def best_split(X, y, min_leaf):
    """Best (feature, threshold, weighted_gini) or None.

    Candidates are midpoints between consecutive distinct sorted values;
    both children must keep at least ``min_leaf`` rows.  Ties keep the
    lowest feature index, then the lowest threshold.
    """
    n, d = X.shape
    total1 = int(y.sum())
    best = None
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        left1 = np.cumsum(ys)[:-1]  # positives among the first k rows, k = 1..n-1
        k = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        k = k[valid]
        l1 = left1[valid]
        r1 = total1 - l1
        pl = l1 / k
        pr = r1 / (n - k)
        impurity = (k * 2 * pl * (1 - pl) + (n - k) * 2 * pr * (1 - pr)) / n
        m = int(np.argmin(impurity))  # first minimum = lowest threshold
        score = float(impurity[m])
        if best is None or score < best[2] - 1e-12:
            pos = np.nonzero(valid)[0][m]
            best = (j, 0.5 * (xs[pos] + xs[pos + 1]), score)
    return best


def fit_cart(features, labels, max_depth, min_leaf=5):
    """Greedy binary CART with Gini impurity, no pruning."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] == 0:
        raise EmptyDataError("empty data")
    if X.shape[0] != len(y):
        raise ValueError("length mismatch")
    nodes = []

    def grow(idx, depth):
        yi = y[idx]
        n1 = int(yi.sum())
        nodes.append(Node((len(yi) - n1, n1)))
        me = len(nodes) - 1
        if depth >= max_depth or n1 == 0 or n1 == len(yi) or len(yi) < 2 * min_leaf:
            return me
        # zero-gain splits are kept: XOR-like structure needs them
        split = best_split(X[idx], yi, min_leaf)
        if split is None:
            return me
        j, thr, _ = split
        go_left = X[idx, j] <= thr
        nodes[me].feature, nodes[me].threshold = j, float(thr)
        nodes[me].left = grow(idx[go_left], depth + 1)
        nodes[me].right = grow(idx[~go_left], depth + 1)
        return me

    grow(np.arange(X.shape[0]), 0)
    return CartTree(nodes, int(max_depth))


def predict_tree(tree, x):
    return tree.predict(x)


def f1(predictions, labels):
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.size == 0:
        raise EmptyDataError("empty input")
    if p.shape != y.shape:
        raise ValueError("length mismatch")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def depth_sweep(features, labels, depths, min_leaf=5):
    """Training-set F1 of one surrogate per depth."""
    depths = sorted(set(int(d) for d in depths))
    if not depths:
        raise ValueError("no depths given")
    out = {}
    for depth in depths:
        tree = fit_cart(features, labels, depth, min_leaf)
        out[depth] = f1(tree.predict(features), labels)
    return out
