"""Training, cumulative-binary ordinal decomposition, and patient-grouped CV.

All cross-validation variants keep every video of a patient on one side of
each split. Feature standardization always uses training-fold statistics
only; the fitted scaler travels with the model.

Ordinal mode trains four cumulative binary classifiers g_k = P(y > k),
k = 0..3, and combines them into class masses
``[1 - g0, g0 - g1, g1 - g2, g2 - g3, g3]`` with negative masses clipped to
zero and the result renormalized.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DegenerateTrainingError
from .models import (
    ConstantModel,
    LogisticModel,
    RandomForestModel,
    model_from_dict,
)
from .pca import FeatureTable

N_CLASSES = 5
MODEL_FORMAT = "taplab-model"
MODEL_FORMAT_VERSION = 1

FAMILIES = ("logistic", "random_forest")
MODES = ("multiclass", "ordinal")

# Declared hyperparameter domains; random search draws from the narrower
# DEFAULT_* ranges below.
HYPERPARAM_DOMAIN = {
    "logistic": {"l2": (1e-6, 1e3), "balanced": (False, True)},
    "random_forest": {
        "n_trees": (1, 1000),
        "max_depth": (1, 64),
        "min_leaf": (1, 64),
        "max_features": (1, 64),
        "bootstrap": (False, True),
        "balanced": (False, True),
    },
}

DEFAULT_LOGISTIC = {"l2": 1.0, "balanced": False}
DEFAULT_FOREST = {
    "n_trees": 100,
    "max_depth": None,
    "min_leaf": 1,
    "max_features": 4,
    "bootstrap": True,
    "balanced": False,
}


@dataclass(frozen=True)
class TrainingTable:
    """Feature table plus a 0..4 label per row."""

    table: FeatureTable
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.shape != (self.table.n_rows,):
            raise ValueError("one label per table row required")
        if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise ValueError("labels must lie in 0..4")
        if any(not pid for pid in self.table.patient_ids):
            raise ValueError("every row needs a patient_id")
        object.__setattr__(self, "labels", labels)

    @property
    def features(self):
        return self.table.values

    @property
    def patient_ids(self):
        return self.table.patient_ids

    def subset(self, rows):
        rows = np.asarray(rows, dtype=int)
        t = self.table
        sub = FeatureTable(
            values=t.values[rows],
            columns=t.columns,
            video_ids=tuple(t.video_ids[i] for i in rows),
            patient_ids=tuple(t.patient_ids[i] for i in rows),
        )
        return TrainingTable(table=sub, labels=self.labels[rows])


@dataclass(frozen=True)
class ModelSpec:
    """Which classifier to train and with which hyperparameters."""

    family: str
    mode: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        defaults = DEFAULT_LOGISTIC if self.family == "logistic" else DEFAULT_FOREST
        hp = {**defaults, **self.hyperparams}
        domain = HYPERPARAM_DOMAIN[self.family]
        for key, value in hp.items():
            if key not in domain:
                raise ConfigurationError(f"unknown hyperparameter {key!r} for {self.family}")
            lo, hi = domain[key]
            if isinstance(lo, bool):
                if not isinstance(value, (bool, np.bool_)):
                    raise ConfigurationError(f"{key} must be boolean")
            elif value is not None and not lo <= value <= hi:
                raise ConfigurationError(f"{key}={value} outside [{lo}, {hi}]")
        object.__setattr__(self, "hyperparams", hp)


@dataclass(frozen=True)
class Prediction:
    """Class probabilities over 0..4; label is the argmax (ties go lower)."""

    probabilities: np.ndarray
    label: int

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.shape != (N_CLASSES,):
            raise ValueError(f"need {N_CLASSES} probabilities")
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must lie in [0, 1] and sum to 1")
        object.__setattr__(self, "probabilities", probs)


def ordinal_predict(binary_probs) -> Prediction:
    """Combine cumulative binary outputs g_k = P(y > k) into one prediction."""
    g = np.asarray(binary_probs, dtype=float)
    if g.shape != (N_CLASSES - 1,) or np.any(g < 0) or np.any(g > 1):
        raise ValueError("need 4 probabilities in [0, 1]")
    masses = np.empty(N_CLASSES)
    masses[0] = 1.0 - g[0]
    masses[1:-1] = g[:-1] - g[1:]
    masses[-1] = g[-1]
    masses = np.clip(masses, 0.0, None)
    masses /= masses.sum()
    return Prediction(probabilities=masses, label=int(np.argmax(masses)))


class FittedModel:
    """A trained classifier bundled with its training-fold scaler."""

    def __init__(self, spec, mean, std, payload):
        self.spec = spec
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.payload = payload

    def _standardize(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def predict_proba(self, X):
        Xs = self._standardize(X)
        if self.spec.mode == "multiclass":
            return self.payload.predict_proba(Xs)
        g = np.column_stack([m.predict_proba(Xs)[:, 1] for m in self.payload])
        return np.vstack([ordinal_predict(row).probabilities for row in g])

    def predict(self, X):
        probs = self.predict_proba(X)
        return [Prediction(probabilities=p, label=int(np.argmax(p))) for p in probs]

    def predict_labels(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def _sample_weights(labels, balanced):
    if not balanced:
        return None
    counts = np.bincount(labels, minlength=N_CLASSES)
    present = counts > 0
    w = np.zeros(len(labels))
    per_class = len(labels) / (present.sum() * counts[present])
    lookup = np.zeros(N_CLASSES)
    lookup[present] = per_class
    return lookup[labels]


def _binary_seeds(seed):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(N_CLASSES - 1)]


def _fit_binary(family, hp, X, y01, seed):
    if len(np.unique(y01)) < 2:
        p = float(y01[0])
        return ConstantModel([1.0 - p, p])
    weights = _sample_weights(y01, hp["balanced"])
    if family == "logistic":
        return LogisticModel(l2=hp["l2"], n_classes=2).fit(X, y01, sample_weight=weights)
    return RandomForestModel(
        n_trees=hp["n_trees"],
        max_depth=hp["max_depth"],
        min_leaf=hp["min_leaf"],
        max_features=hp["max_features"],
        bootstrap=hp["bootstrap"],
        n_classes=2,
        seed=seed,
    ).fit(X, y01, sample_weight=weights)


def train(spec: ModelSpec, t: TrainingTable) -> FittedModel:
    """Fit a classifier; standardization uses this table's statistics only."""
    y = t.labels
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training table has a single class")
    X = t.features
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if len(y) > 1 else np.ones(X.shape[1])
    std = np.where(std == 0, 1.0, std)
    Xs = (X - mean) / std
    hp = spec.hyperparams

    if spec.mode == "multiclass":
        weights = _sample_weights(y, hp["balanced"])
        if spec.family == "logistic":
            payload = LogisticModel(l2=hp["l2"], n_classes=N_CLASSES).fit(Xs, y, sample_weight=weights)
        else:
            payload = RandomForestModel(
                n_trees=hp["n_trees"],
                max_depth=hp["max_depth"],
                min_leaf=hp["min_leaf"],
                max_features=hp["max_features"],
                bootstrap=hp["bootstrap"],
                n_classes=N_CLASSES,
                seed=spec.seed,
            ).fit(Xs, y, sample_weight=weights)
    else:
        seeds = _binary_seeds(spec.seed)
        payload = [
            _fit_binary(spec.family, hp, Xs, (y > k).astype(int), seeds[k])
            for k in range(N_CLASSES - 1)
        ]
    return FittedModel(spec=spec, mean=mean, std=std, payload=payload)


# ---------------------------------------------------------------------------
# Patient-grouped cross-validation


def grouped_kfold(patient_ids, n_folds, seed=0):
    """Split rows into folds keeping all rows of a patient together."""
    patient_ids = list(patient_ids)
    unique = sorted(set(patient_ids))
    if len(unique) < n_folds:
        raise ConfigurationError(f"{len(unique)} patients cannot form {n_folds} grouped folds")
    rng = np.random.default_rng(seed)
    order = [unique[i] for i in rng.permutation(len(unique))]
    groups = np.array_split(np.arange(len(order)), n_folds)
    folds = []
    all_rows = np.arange(len(patient_ids))
    for g in groups:
        fold_patients = {order[i] for i in g}
        test = np.array([i for i in all_rows if patient_ids[i] in fold_patients], dtype=int)
        train_rows = np.array([i for i in all_rows if patient_ids[i] not in fold_patients], dtype=int)
        folds.append((train_rows, test))
    return folds


def lopo_folds(patient_ids):
    """One fold per patient, in sorted patient order."""
    patient_ids = list(patient_ids)
    unique = sorted(set(patient_ids))
    if len(unique) < 2:
        raise ConfigurationError("leave-one-patient-out needs at least 2 patients")
    rows = np.arange(len(patient_ids))
    return [
        (
            np.array([i for i in rows if patient_ids[i] != p], dtype=int),
            np.array([i for i in rows if patient_ids[i] == p], dtype=int),
        )
        for p in unique
    ]


def sample_hyperparams(family, rng):
    """Draw one hyperparameter set from the default search distribution."""
    if family == "logistic":
        return {
            "l2": float(10.0 ** rng.uniform(-4.0, 1.0)),
            "balanced": bool(rng.random() < 0.5),
        }
    depth_choices = [None] + list(range(2, 13))
    return {
        "n_trees": int(rng.integers(50, 201)),
        "max_depth": depth_choices[int(rng.integers(0, len(depth_choices)))],
        "min_leaf": int(rng.integers(1, 9)),
        "max_features": int(rng.integers(1, 14)),
        "bootstrap": True,
        "balanced": bool(rng.random() < 0.5),
    }


def _accuracy(model, t: TrainingTable, rows):
    sub = t.subset(rows)
    return float(np.mean(model.predict_labels(sub.features) == sub.labels))


@dataclass(frozen=True)
class NestedCVResult:
    best_hyperparams: dict
    fold_hyperparams: tuple
    outer_scores: tuple


def nested_cv(t: TrainingTable, family: str, mode: str, budget: int = 50,
              seed: int = 0, n_outer: int = 5, n_inner: int = 5) -> NestedCVResult:
    """Patient-grouped nested cross-validation with seeded random search.

    Each outer fold tunes hyperparameters by mean accuracy over inner
    grouped folds of its training rows; the returned set is the one whose
    outer fold scored the highest test accuracy.
    """
    if budget < 1:
        raise ConfigurationError("search budget must be at least 1")
    rng = np.random.default_rng(seed)
    outer = grouped_kfold(t.patient_ids, n_outer, seed=int(rng.integers(2**32)))
    fold_best = []
    outer_scores = []
    for f, (train_rows, test_rows) in enumerate(outer):
        train_part = t.subset(train_rows)
        draws = [sample_hyperparams(family, rng) for _ in range(budget)]
        inner_seed = int(rng.integers(2**32))
        inner = grouped_kfold(train_part.patient_ids, n_inner, seed=inner_seed)
        best_hp, best_score = None, -1.0
        for hp in draws:
            spec = ModelSpec(family=family, mode=mode, hyperparams=hp, seed=seed)
            scores = []
            for in_train, in_test in inner:
                model = train(spec, train_part.subset(in_train))
                scores.append(_accuracy(model, train_part, in_test))
            score = float(np.mean(scores))
            if score > best_score:
                best_hp, best_score = hp, score
        spec = ModelSpec(family=family, mode=mode, hyperparams=best_hp, seed=seed)
        model = train(spec, train_part)
        outer_scores.append(_accuracy(model, t, test_rows))
        fold_best.append(best_hp)
    winner = int(np.argmax(outer_scores))
    return NestedCVResult(
        best_hyperparams=fold_best[winner],
        fold_hyperparams=tuple(fold_best),
        outer_scores=tuple(outer_scores),
    )


@dataclass(frozen=True)
class LopoResult:
    """Row-aligned out-of-fold predictions from leave-one-patient-out CV."""

    probabilities: np.ndarray
    labels: np.ndarray
    fold_patients: tuple[str, ...]

    def predictions(self):
        return [Prediction(probabilities=p, label=int(l))
                for p, l in zip(self.probabilities, self.labels)]


def lopo_evaluate(t: TrainingTable, spec: ModelSpec) -> LopoResult:
    """Train once per held-out patient and predict that patient's videos."""
    folds = lopo_folds(t.patient_ids)
    probs = np.full((t.table.n_rows, N_CLASSES), np.nan)
    fold_patients = []
    for train_rows, test_rows in folds:
        model = train(spec, t.subset(train_rows))
        probs[test_rows] = model.predict_proba(t.features[test_rows])
        fold_patients.append(t.patient_ids[test_rows[0]])
    labels = np.argmax(probs, axis=1)
    return LopoResult(probabilities=probs, labels=labels, fold_patients=tuple(fold_patients))


def permutation_importance(model: FittedModel, t: TrainingTable, repeats: int = 20, seed: int = 0):
    """Mean accuracy drop when one feature column is shuffled.

    Returns one importance per feature column, ordered like the table.
    """
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    rng = np.random.default_rng(seed)
    X = t.features
    y = t.labels
    base = float(np.mean(model.predict_labels(X) == y))
    importances = np.zeros(X.shape[1])
    for f in range(X.shape[1]):
        drops = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, f] = X[rng.permutation(len(y)), f]
            drops.append(base - float(np.mean(model.predict_labels(Xp) == y)))
        importances[f] = np.mean(drops)
    return importances


# ---------------------------------------------------------------------------
# Model persistence


def save_model(model: FittedModel, path):
    """Write a fitted model as a versioned, self-describing JSON file."""
    if model.spec.mode == "multiclass":
        payload = model.payload.to_dict()
    else:
        payload = {"kind": "ordinal", "submodels": [m.to_dict() for m in model.payload]}
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec": {
            "family": model.spec.family,
            "mode": model.spec.mode,
            "hyperparams": model.spec.hyperparams,
            "seed": model.spec.seed,
        },
        "scaler": {"mean": model.mean.tolist(), "std": model.std.tolist()},
        "payload": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> FittedModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigurationError(f"not a {MODEL_FORMAT} file: {path}")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model version {doc.get('version')}")
    spec = ModelSpec(**doc["spec"])
    payload_doc = doc["payload"]
    if payload_doc.get("kind") == "ordinal":
        payload = [model_from_dict(m) for m in payload_doc["submodels"]]
    else:
        payload = model_from_dict(payload_doc)
    return FittedModel(
        spec=spec,
        mean=doc["scaler"]["mean"],
        std=doc["scaler"]["std"],
        payload=payload,
    )
