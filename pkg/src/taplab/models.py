"""Classifier internals: multinomial logistic regression and random forest.

Both models are deterministic given their seed, expose calibrated-ish class
probabilities over a fixed label set 0..K-1, and serialize to plain dicts
so fitted models can round-trip through JSON.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .errors import DegenerateTrainingError

N_CLASSES = 5


def _one_hot(y, k):
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


class LogisticModel:
    """Softmax regression trained by penalized maximum likelihood.

    The L2 penalty ``l2`` applies to the weights only, never the intercepts,
    so constant shifts of a feature column are absorbed by the intercept.
    Optimization runs until the gradient infinity-norm drops below ``gtol``
    or ``max_iter`` L-BFGS iterations elapse.
    """

    def __init__(self, l2=1.0, n_classes=N_CLASSES, gtol=1e-6, max_iter=10_000):
        self.l2 = float(l2)
        self.n_classes = int(n_classes)
        self.gtol = gtol
        self.max_iter = max_iter
        self.weights = None
        self.intercepts = None
        self.converged = False

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if len(np.unique(y)) < 2:
            raise DegenerateTrainingError("training labels contain a single class")
        n, p = X.shape
        k = self.n_classes
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        onehot = _one_hot(y, k)

        def objective(theta):
            W = theta[: k * p].reshape(k, p)
            b = theta[k * p :]
            logits = X @ W.T + b
            lse = logsumexp(logits, axis=1)
            nll = float(np.sum(w * (lse - logits[np.arange(n), y])))
            nll += 0.5 * self.l2 * float(np.sum(W * W))
            probs = np.exp(logits - lse[:, None])
            resid = (probs - onehot) * w[:, None]
            grad_w = resid.T @ X + self.l2 * W
            grad_b = resid.sum(axis=0)
            return nll, np.concatenate([grad_w.ravel(), grad_b])

        result = minimize(
            objective,
            np.zeros(k * p + k),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": self.max_iter, "maxfun": 20 * self.max_iter,
                     "gtol": self.gtol, "ftol": 0.0},
        )
        self.weights = result.x[: k * p].reshape(k, p)
        self.intercepts = result.x[k * p :]
        self.converged = bool(np.max(np.abs(result.jac)) < self.gtol)
        return self

    def predict_proba(self, X):
        logits = np.asarray(X, float) @ self.weights.T + self.intercepts
        return np.exp(logits - logsumexp(logits, axis=1)[:, None])

    def to_dict(self):
        return {
            "kind": "logistic",
            "l2": self.l2,
            "n_classes": self.n_classes,
            "weights": self.weights.tolist(),
            "intercepts": self.intercepts.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(l2=d["l2"], n_classes=d["n_classes"])
        m.weights = np.asarray(d["weights"], dtype=float)
        m.intercepts = np.asarray(d["intercepts"], dtype=float)
        m.converged = True
        return m


class ConstantModel:
    """Degenerate fallback: always emits one fixed class distribution."""

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def predict_proba(self, X):
        return np.tile(self.probs, (len(np.asarray(X)), 1))

    def to_dict(self):
        return {"kind": "constant", "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["probs"])


def _gini(class_weights):
    total = class_weights.sum()
    frac = class_weights / total
    return 1.0 - float(np.sum(frac * frac))


def _best_split(X, y, w, feature_order, min_leaf, n_classes):
    """Exhaustive best Gini split over the given features.

    Thresholds are midpoints between consecutive distinct sorted values.
    Returns (decrease, feature, threshold) or None; ties resolve to the
    earliest feature in ``feature_order`` and the lowest threshold.
    """
    n = len(y)
    onehot = _one_hot(y, n_classes) * w[:, None]
    parent_weights = onehot.sum(axis=0)
    parent_gini = _gini(parent_weights)
    total_w = parent_weights.sum()
    best = None
    for f in feature_order:
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        distinct = np.nonzero(sv[:-1] < sv[1:])[0]
        if distinct.size == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left = cum[distinct]
        right = parent_weights - left
        wl = left.sum(axis=1)
        wr = right.sum(axis=1)
        gl = 1.0 - np.sum((left / wl[:, None]) ** 2, axis=1)
        gr = 1.0 - np.sum((right / wr[:, None]) ** 2, axis=1)
        decrease = parent_gini - (wl * gl + wr * gr) / total_w
        counts_left = distinct + 1
        valid = (counts_left >= min_leaf) & (n - counts_left >= min_leaf)
        if not valid.any():
            continue
        decrease[~valid] = -np.inf
        i = int(np.argmax(decrease))
        if decrease[i] > 0 and (best is None or decrease[i] > best[0]):
            threshold = 0.5 * (sv[distinct[i]] + sv[distinct[i] + 1])
            best = (float(decrease[i]), int(f), float(threshold))
    return best


class DecisionTree:
    """CART-style classification tree (Gini impurity, midpoint thresholds).

    ``max_features`` draws a random feature subset per split from ``rng``.
    Rows with value strictly below the threshold go left.
    """

    def __init__(self, max_depth=None, min_leaf=1, max_features=None, n_classes=N_CLASSES):
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.max_features = max_features
        self.n_classes = int(n_classes)
        self.feature = []
        self.threshold = []
        self.children = []
        self.probs = []

    def fit(self, X, y, sample_weight=None, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        rng = np.random.default_rng(0) if rng is None else rng
        n_feats = X.shape[1]
        subset = n_feats if self.max_features is None else min(self.max_features, n_feats)
        self.feature, self.threshold, self.children, self.probs = [], [], [], []

        def grow(idx, depth):
            node = len(self.feature)
            self.feature.append(-1)
            self.threshold.append(0.0)
            self.children.append((-1, -1))
            dist = np.bincount(y[idx], weights=w[idx], minlength=self.n_classes)
            self.probs.append(dist / dist.sum())
            labels = y[idx]
            if (
                (self.max_depth is not None and depth >= self.max_depth)
                or len(idx) < 2 * self.min_leaf
                or np.all(labels == labels[0])
            ):
                return node
            feature_order = rng.permutation(n_feats)[:subset]
            split = _best_split(X[idx], y[idx], w[idx], feature_order, self.min_leaf, self.n_classes)
            if split is None:
                return node
            _, f, thr = split
            mask = X[idx, f] < thr
            left = grow(idx[mask], depth + 1)
            right = grow(idx[~mask], depth + 1)
            self.feature[node] = f
            self.threshold[node] = thr
            self.children[node] = (left, right)
            return node

        grow(np.arange(len(y)), 0)
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), self.n_classes))
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                left, right = self.children[node]
                node = left if row[self.feature[node]] < self.threshold[node] else right
            out[i] = self.probs[node]
        return out

    def to_dict(self):
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "children": [list(c) for c in self.children],
            "probs": [list(p) for p in self.probs],
        }

    @classmethod
    def from_dict(cls, d, n_classes=N_CLASSES):
        t = cls(n_classes=n_classes)
        t.feature = list(d["feature"])
        t.threshold = list(d["threshold"])
        t.children = [tuple(c) for c in d["children"]]
        t.probs = [np.asarray(p, dtype=float) for p in d["probs"]]
        return t


class RandomForestModel:
    """Bagged trees with per-split random feature subsets.

    Prediction averages the per-tree leaf class distributions; the argmax
    of that average (first index on ties) is the predicted label.
    """

    def __init__(self, n_trees=100, max_depth=None, min_leaf=1, max_features=None,
                 bootstrap=True, n_classes=N_CLASSES, seed=0):
        self.n_trees = int(n_trees)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.max_features = max_features
        self.bootstrap = bool(bootstrap)
        self.n_classes = int(n_classes)
        self.seed = int(seed)
        self.trees = []

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if len(np.unique(y)) < 2:
            raise DegenerateTrainingError("training labels contain a single class")
        w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        self.trees = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_trees):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, len(y), len(y)) if self.bootstrap else np.arange(len(y))
            tree = DecisionTree(
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                max_features=self.max_features,
                n_classes=self.n_classes,
            )
            tree.fit(X[idx], y[idx], sample_weight=w[idx], rng=rng)
            self.trees.append(tree)
        return self

    def predict_proba(self, X):
        acc = np.zeros((len(np.asarray(X)), self.n_classes))
        for tree in self.trees:
            acc += tree.predict_proba(X)
        return acc / len(self.trees)

    def to_dict(self):
        return {
            "kind": "random_forest",
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "n_classes": self.n_classes,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(
            n_trees=d["n_trees"],
            max_depth=d["max_depth"],
            min_leaf=d["min_leaf"],
            max_features=d["max_features"],
            bootstrap=d["bootstrap"],
            n_classes=d["n_classes"],
            seed=d["seed"],
        )
        m.trees = [DecisionTree.from_dict(t, n_classes=m.n_classes) for t in d["trees"]]
        return m


MODEL_KINDS = {
    "logistic": LogisticModel,
    "constant": ConstantModel,
    "random_forest": RandomForestModel,
}


def model_from_dict(d):
    return MODEL_KINDS[d["kind"]].from_dict(d)
