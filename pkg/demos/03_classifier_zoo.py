"""Train all sixteen mortality classifiers on a synthetic sepsis cohort.

Reproduces the whole-test performance table: 7:3 split, [0, 1] feature
scaling fit on the training side, 5-fold cross-validated hyperparameters,
Youden-J thresholds from pooled out-of-fold predictions, and the seven
test-set metrics per configuration.
"""

import time
import warnings

import numpy as np

from sepsisaudit import learn
from sepsisaudit.cohort import (
    feature_matrix,
    generate_cohort,
    load_profile,
    outcome_vector,
    split,
)
from sepsisaudit.criteria import flag_cohort, load_all_criteria
from sepsisaudit.metrics import TABLE_COLUMNS, confusion_metrics

SEED = 7

cohort = generate_cohort(load_profile("table1"), 2000, seed=SEED)
criteria = {c.name: c for c in load_all_criteria()}
keep = flag_cohort(cohort, [criteria["sepsis3"]]).column("sepsis3")
records = tuple(r for r, k in zip(cohort.records, keep) if k)
print(f"{keep.sum()} of {len(cohort)} patients are sepsis-3 positive")

from sepsisaudit.cohort import Cohort

sepsis = Cohort(records=records, provenance="demo")
assignment = split(sepsis, 0.7, seed=SEED)
X = feature_matrix(records)
y = outcome_vector(records)
train_mask = assignment.train_mask(records)
print(f"train {train_mask.sum()} / test {(~train_mask).sum()}, "
      f"test mortality {y[~train_mask].mean():.2%}\n")

scaler = learn.fit_scaler(X[train_mask])
header = f"{'classifier':<22}" + "".join(f"{c:>12}" for c in TABLE_COLUMNS) + f"{'fit_s':>8}"
print(header)
print("-" * len(header))
for family in learn.FAMILY_NAMES:
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = learn.train(
            learn.ClassifierSpec(family, seed=SEED), X[train_mask], y[train_mask], scaler=scaler
        )
    scores = model.decision_scores(X[~train_mask])
    report = confusion_metrics(scores, y[~train_mask], model.threshold)
    cells = "".join(f"{v:>12.4f}" for v in report.as_row())
    print(f"{family:<22}{cells}{time.perf_counter() - started:>8.1f}")

print("\nchosen hyperparameters are recorded per model, e.g.:")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    model = learn.train(learn.ClassifierSpec("svc_rbf", seed=SEED), X[train_mask], y[train_mask], scaler=scaler)
print(f"  svc_rbf: {model.cv_record.chosen_params}, "
      f"cv mean AUCs {np.round(model.cv_record.mean_aucs, 3).tolist()}")
