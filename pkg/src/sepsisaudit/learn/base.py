"""Training machinery shared by all sixteen classifier configurations.

The pipeline per configuration: min-max scale features on the training
rows, pick hyperparameters by 5-fold cross-validated AUC, fit the final
model on all training rows, and set the decision threshold by Youden's J
on the pooled out-of-fold predictions (never on test data).

Solvers canonicalize the training-row order (lexicographic sort on the
scaled features, then label) before fitting, so every trained model is a
function of the training multiset and the seed, not of row order.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateFolds, EmptyTraining, SingleClassError
from ..metrics import roc_auc
from ..rng import keyed_rng
from . import bayes, forest, linear, neighbors, svm

FEATURE_NAMES = ("sofa", "sirs", "age")


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scaler:
    mins: np.ndarray
    maxs: np.ndarray

    def as_dict(self):
        return {"mins": [float(v) for v in self.mins], "maxs": [float(v) for v in self.maxs]}


def fit_scaler(train_rows):
    """Per-feature (min, max) from training rows."""
    X = np.atleast_2d(np.asarray(train_rows, dtype=float))
    if X.size == 0:
        raise EmptyTraining("cannot fit a scaler on zero rows")
    return Scaler(mins=X.min(axis=0), maxs=X.max(axis=0))


def apply_scaler(scaler, rows):
    """Map rows into [0, 1]; out-of-range values clip, constant features map to 0."""
    X = np.asarray(rows, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    span = scaler.maxs - scaler.mins
    safe = np.where(span > 0.0, span, 1.0)
    out = np.clip((X - scaler.mins) / safe, 0.0, 1.0)
    out[:, span == 0.0] = 0.0
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Family registry
# ---------------------------------------------------------------------------

def _grid(**lists):
    """Cartesian product of per-key value lists; earliest key varies slowest."""
    out = [{}]
    for key, values in lists.items():
        out = [{**p, key: v} for p in out for v in values]
    return tuple(out)


_STRENGTHS = (0.01, 0.1, 1.0, 10.0)


def _positive(params, key):
    if params.get(key, 1.0) <= 0:
        raise ValueError(f"{key} must be > 0, got {params[key]}")


def _validate_knn(params):
    k = params.get("k", 5)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"knn k must be odd and >= 1, got {k}")


def _validate_depth(params):
    depth = params.get("max_depth", None)
    if depth is not None and depth < 1:
        raise ValueError(f"max_depth must be None or >= 1, got {depth}")


@dataclass(frozen=True)
class Family:
    name: str
    fit: object
    default_grid: tuple
    validate: object = None
    seeded: bool = False


def _fit_ridge(X, y, params, seed, epochs):
    return linear.fit_ridge(X, y, alpha=params.get("alpha", 1.0))


def _fit_perceptron(X, y, params, seed, epochs):
    return linear.fit_perceptron(X, y, epochs=epochs, seed=seed)


def _fit_pa(X, y, params, seed, epochs):
    return linear.fit_passive_aggressive(X, y, C=params.get("C", 1.0), epochs=epochs, seed=seed)


def _fit_knn(X, y, params, seed, epochs):
    return neighbors.fit_knn(X, y, k=params.get("k", 5))


def _fit_forest(X, y, params, seed, epochs):
    return forest.fit_random_forest(
        X,
        y,
        n_trees=params.get("n_trees", 100),
        max_depth=params.get("max_depth", None),
        max_features=params.get("max_features", "sqrt"),
        seed=seed,
    )


def _hinge_fitter(penalty, averaged):
    def fit(X, y, params, seed, epochs):
        return linear.fit_hinge_sgd(
            X,
            y,
            alpha=params.get("alpha", 0.01),
            penalty=penalty,
            l1_ratio=params.get("l1_ratio", 0.15),
            epochs=epochs,
            seed=seed,
            averaged=averaged,
        )

    return fit


def _fit_mnb(X, y, params, seed, epochs):
    return bayes.fit_multinomial_nb(X, y)


def _fit_bnb(X, y, params, seed, epochs):
    return bayes.fit_bernoulli_nb(X, y)


def _fit_logreg(X, y, params, seed, epochs):
    return linear.fit_logreg(X, y, l2=params.get("l2", 0.01))


def _svc_fitter(kind):
    def fit(X, y, params, seed, epochs):
        return svm.fit_svc(
            X,
            y,
            C=params.get("C", 1.0),
            kind=kind,
            gamma=params.get("gamma", None),
            gamma_scale=params.get("gamma_scale", 1.0),
            degree=params.get("degree", 3),
        )

    return fit


FAMILIES = {
    "ridge": Family("ridge", _fit_ridge, _grid(alpha=_STRENGTHS), lambda p: _positive(p, "alpha")),
    "perceptron": Family("perceptron", _fit_perceptron, ({},), seeded=True),
    "passive_aggressive": Family(
        "passive_aggressive", _fit_pa, _grid(C=_STRENGTHS), lambda p: _positive(p, "C"), seeded=True
    ),
    "knn": Family("knn", _fit_knn, _grid(k=(5, 15, 31)), _validate_knn),
    "random_forest": Family(
        "random_forest", _fit_forest, _grid(max_depth=(3, 5, None)), _validate_depth, seeded=True
    ),
    "linear_svc_l1": Family(
        "linear_svc_l1", _hinge_fitter("l1", True), _grid(alpha=_STRENGTHS),
        lambda p: _positive(p, "alpha"), seeded=True,
    ),
    "linear_svc_l2": Family(
        "linear_svc_l2", _hinge_fitter("l2", True), _grid(alpha=_STRENGTHS),
        lambda p: _positive(p, "alpha"), seeded=True,
    ),
    "sgd_l1": Family(
        "sgd_l1", _hinge_fitter("l1", False), _grid(alpha=_STRENGTHS),
        lambda p: _positive(p, "alpha"), seeded=True,
    ),
    "sgd_l2": Family(
        "sgd_l2", _hinge_fitter("l2", False), _grid(alpha=_STRENGTHS),
        lambda p: _positive(p, "alpha"), seeded=True,
    ),
    "sgd_en": Family(
        "sgd_en", _hinge_fitter("en", False), _grid(alpha=_STRENGTHS),
        lambda p: _positive(p, "alpha"), seeded=True,
    ),
    "multinomial_nb": Family("multinomial_nb", _fit_mnb, ({},)),
    "bernoulli_nb": Family("bernoulli_nb", _fit_bnb, ({},)),
    "logistic_regression": Family(
        "logistic_regression", _fit_logreg, _grid(l2=_STRENGTHS), lambda p: _positive(p, "l2")
    ),
    "svc_rbf": Family(
        "svc_rbf", _svc_fitter("rbf"), _grid(C=(0.1, 1.0), gamma_scale=(0.5, 1.0, 2.0)),
        lambda p: _positive(p, "C"),
    ),
    "svc_poly": Family(
        "svc_poly", _svc_fitter("poly"), _grid(C=_STRENGTHS), lambda p: _positive(p, "C")
    ),
    # the sigmoid kernel saturates (and can invert) at the larger gamma scales,
    # so its grid reaches down into the near-linear regime
    "svc_sigmoid": Family(
        "svc_sigmoid", _svc_fitter("sigmoid"), _grid(gamma_scale=(0.1, 0.5, 1.0, 2.0)),
        lambda p: _positive(p, "C"),
    ),
}

FAMILY_NAMES = tuple(FAMILIES)

ALIASES = {
    "logreg": "logistic_regression",
    "pa": "passive_aggressive",
    "rf": "random_forest",
    "mnb": "multinomial_nb",
    "bnb": "bernoulli_nb",
}


def resolve_family(name):
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValueError(f"unknown classifier family {name!r}; known: {', '.join(FAMILY_NAMES)}")
    return key


# ---------------------------------------------------------------------------
# Specs and trained models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierSpec:
    """One of the sixteen configurations: family, search grid, seed, epoch budget."""

    family: str
    grid: tuple = ()  # empty -> family default grid
    hyperparams: tuple = ()  # fixed (key, value) overrides applied to every grid point
    seed: int = 0
    epochs: int = 50

    def __post_init__(self):
        object.__setattr__(self, "family", resolve_family(self.family))
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        for params in self.resolved_grid():
            validate = FAMILIES[self.family].validate
            if validate is not None:
                validate(params)

    def resolved_grid(self):
        base = self.grid if self.grid else FAMILIES[self.family].default_grid
        fixed = dict(self.hyperparams)
        return tuple({**point, **fixed} for point in base)


def default_specs(seed=0, families=None, epochs=50):
    """Specs for the sixteen shipped configurations (or a named subset)."""
    names = FAMILY_NAMES if families is None else [resolve_family(f) for f in families]
    return [ClassifierSpec(family=name, seed=seed, epochs=epochs) for name in names]


@dataclass(frozen=True)
class CvRecord:
    grid: tuple
    fold_aucs: tuple  # one tuple of per-fold AUCs per grid point
    mean_aucs: tuple
    chosen_index: int
    folds: int
    seed: int

    @property
    def chosen_params(self):
        return self.grid[self.chosen_index]

    def as_dict(self):
        return {
            "grid": [dict(sorted(g.items())) for g in self.grid],
            "fold_aucs": [list(f) for f in self.fold_aucs],
            "mean_aucs": list(self.mean_aucs),
            "chosen_index": self.chosen_index,
            "folds": self.folds,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainedModel:
    spec: ClassifierSpec
    scaler: Scaler
    params: object  # family-specific fitted model
    threshold: float
    cv_record: CvRecord
    fit_warnings: tuple = ()

    def decision_scores(self, rows):
        """Monotone-in-risk decision values for raw (unscaled) feature rows."""
        return np.asarray(self.params.score(apply_scaler(self.scaler, rows)), dtype=float)

    def predict(self, rows):
        return self.decision_scores(rows) > self.threshold

    def summary(self):
        return {
            "family": self.spec.family,
            "seed": self.spec.seed,
            "epochs": self.spec.epochs,
            "chosen_hyperparams": dict(sorted(self.cv_record.chosen_params.items())),
            "threshold": float(self.threshold),
            "cv": self.cv_record.as_dict(),
            "scaler": self.scaler.as_dict(),
            "model": self.params.describe(),
            "warnings": list(self.fit_warnings),
        }


# ---------------------------------------------------------------------------
# Cross-validation and training
# ---------------------------------------------------------------------------

def _canonical_order(X, y):
    return np.lexsort((y,) + tuple(X[:, j] for j in reversed(range(X.shape[1]))))


def _make_folds(y, folds, seed):
    """Shuffled fold index arrays, each containing both classes.

    Reshuffles with a new keyed stream up to 10 times before giving up.
    """
    n = y.size
    for attempt in range(10):
        perm = keyed_rng("sepsisaudit.learn.cv", seed, attempt).permutation(n)
        parts = np.array_split(perm, folds)
        if all(0 < y[p].sum() < p.size for p in parts):
            return parts
    raise DegenerateFolds(
        f"no {folds}-fold shuffle of {n} rows kept both classes in every fold after 10 tries"
    )


def _score_fold(family, params, seed, epochs, X, y, train_idx, val_idx):
    model = family.fit(X[train_idx], y[train_idx], params, seed, epochs)
    return np.asarray(model.score(X[val_idx]), dtype=float)


def _cv_search(spec, X, y, folds):
    family = FAMILIES[spec.family]
    grid = spec.resolved_grid()
    parts = _make_folds(y, folds, spec.seed)
    all_idx = np.arange(y.size)
    fold_aucs = []
    oof_per_point = []
    for params in grid:
        aucs = []
        oof = np.empty(y.size)
        for val_idx in parts:
            train_idx = np.setdiff1d(all_idx, val_idx, assume_unique=False)
            val_scores = _score_fold(family, params, spec.seed, spec.epochs, X, y, train_idx, val_idx)
            oof[val_idx] = val_scores
            aucs.append(roc_auc(val_scores, y[val_idx]))
        fold_aucs.append(tuple(aucs))
        oof_per_point.append(oof)
    means = tuple(float(np.mean(a)) for a in fold_aucs)
    chosen = int(np.argmax(means))  # ties resolve to the earliest grid point
    record = CvRecord(
        grid=grid,
        fold_aucs=tuple(fold_aucs),
        mean_aucs=means,
        chosen_index=chosen,
        folds=folds,
        seed=spec.seed,
    )
    return record, oof_per_point[chosen]


def cross_validate(family, grid, rows, labels, folds=5, seed=0):
    """Pick the grid point with the best mean validation AUC.

    Returns ``(chosen_hyperparams, cv_record)``. Ties break to the
    earliest grid point; folds come from a seeded shuffle re-drawn (up to
    10 times) until every validation slice holds both classes.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=bool)
    spec = ClassifierSpec(family=family, grid=tuple(dict(g) for g in grid), seed=seed)
    record, _ = _cv_search(spec, X, y, folds)
    return dict(record.chosen_params), record


def train(spec, rows, labels, folds=5, scaler=None):
    """Fit one configuration end to end on labeled raw feature rows.

    Scales (fitting a scaler on these rows unless one is supplied),
    canonicalizes row order, cross-validates the grid, fits the final
    model on all rows with the chosen hyperparameters, and sets the
    Youden-J threshold from the pooled out-of-fold predictions.
    """
    X_raw = np.atleast_2d(np.asarray(rows, dtype=float))
    y = np.asarray(labels, dtype=bool)
    if X_raw.shape[0] != y.size:
        raise ValueError("rows and labels length mismatch")
    if y.all() or not y.any():
        raise SingleClassError(f"{spec.family}: training labels contain a single class")
    if scaler is None:
        scaler = fit_scaler(X_raw)
    X = apply_scaler(scaler, X_raw)
    order = _canonical_order(X, y)
    X, y = X[order], y[order]

    family = FAMILIES[spec.family]
    caught = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        record, oof_scores = _cv_search(spec, X, y, folds)
        model = family.fit(X, y, dict(record.chosen_params), spec.seed, spec.epochs)
        threshold = youden_threshold(oof_scores, y)
    for w in wlist:
        caught.append(str(w.message))
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return TrainedModel(
        spec=spec,
        scaler=scaler,
        params=model,
        threshold=float(threshold),
        cv_record=record,
        fit_warnings=tuple(caught),
    )


# ---------------------------------------------------------------------------
# Youden threshold
# ---------------------------------------------------------------------------

def youden_threshold(scores, labels):
    """Score cut maximizing J = TPR - FPR under the strict score > t rule.

    Candidates are the midpoints between consecutive distinct scores plus
    one cut just below the minimum (predict everything positive) and the
    maximum itself (predict everything negative). Ties in J resolve to the
    lowest threshold; with all scores equal this returns the shared value
    nudged down one ulp, i.e. predict-all-positive.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("Youden threshold undefined: one class present")
    distinct = np.unique(scores)
    candidates = np.concatenate(
        [[np.nextafter(distinct[0], -np.inf)], (distinct[:-1] + distinct[1:]) / 2.0, [distinct[-1]]]
    )
    best_t, best_j = None, -np.inf
    for t in candidates:
        pred = scores > t
        j = int((pred & y).sum()) / n_pos - int((pred & ~y).sum()) / n_neg
        if j > best_j + 1e-15:
            best_t, best_j = t, j
    return float(best_t)


# ---------------------------------------------------------------------------
# Shipped sanity benchmark
# ---------------------------------------------------------------------------

def separable_benchmark(n=400, seed=0, margin=0.1):
    """Linearly separable two-class rows in the three-feature layout.

    Positives occupy the upper box of features 0 and 2 and the lower box
    of feature 1; negatives the mirror image, with a margin along every
    axis. The anti-aligned middle feature shifts the class feature
    *composition*, not just its magnitude, so proportion-based scorers
    (multinomial NB) can separate it too. Feature ranges mimic the raw
    (sofa, sirs, age) scales.
    """
    rng = keyed_rng("sepsisaudit.learn.benchmark", seed)
    half = n // 2
    n_pos = n - half
    lo = np.array([0.0, 0.0, 18.0])
    hi = np.array([24.0, 4.0, 95.0])
    span = hi - lo
    gap = margin * span
    mid = lo + 0.5 * span
    low_box = (lo, mid - gap / 2.0)
    high_box = (mid + gap / 2.0, hi)
    pos = rng.uniform(
        [high_box[0][0], low_box[0][1], high_box[0][2]],
        [high_box[1][0], low_box[1][1], high_box[1][2]],
        size=(n_pos, 3),
    )
    neg = rng.uniform(
        [low_box[0][0], high_box[0][1], low_box[0][2]],
        [low_box[1][0], high_box[1][1], low_box[1][2]],
        size=(half, 3),
    )
    X = np.vstack([neg, pos])
    y = np.concatenate([np.zeros(half, dtype=bool), np.ones(n_pos, dtype=bool)])
    order = rng.permutation(n)
    return X[order], y[order]
