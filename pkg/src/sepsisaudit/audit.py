"""End-to-end disparity audit: flag, split, train, test, and sweep subgroups.

``run_audit`` executes the whole workflow on one cohort: flag every
patient with the loaded criteria, keep the patients selected by the
configured criterion, split 7:3, scale on the training side only, fit all
configured classifiers with cross-validated hyperparameters, report the
seven whole-test metrics per classifier, and run the one-tailed
subgroup-vs-whole and two-tailed pairwise permutation tests for every
determinant category and category pair. Every random quantity is keyed
from the config seed and the cell's identity, so reports are byte-stable
at any ``jobs`` setting.

``write_report`` lays the artifacts out on disk: ``report.json``,
``table2.csv``, ``one_sided_<determinant>.csv``,
``pairwise_<determinant>.csv``, ``forest.csv``, ``forest.svg`` and
``scores/<classifier>.csv``.
"""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata
from itertools import combinations
from pathlib import Path

import numpy as np

from . import learn, plots
from .cohort import DETERMINANTS, Cohort, categories, feature_matrix, outcome_vector
from .criteria import flag_cohort, load_all_criteria, load_registry
from .errors import AuditError, UndefinedGroupAUC
from .metrics import TABLE_COLUMNS, confusion_metrics
from .rng import derive_seed
from .stats import (
    MIN_REPLICATES,
    PermutationResult,
    bootstrap_proportion_ci,
    perm_test_pairwise,
    perm_test_subgroup_vs_whole,
)
from .cohort import split as split_cohort

WHOLE_TEST_LABEL = "WHOLE_TEST"
TEST_CSV_FIELDS = ("classifier", "group_a", "group_b", "observed_diff", "p_value", "tail", "replicates", "seed")


def _package_version():
    try:
        return importlib_metadata.version("sepsisaudit")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class AuditConfig:
    criterion: str = "sepsis3"
    split_ratio: float = 0.7
    seed: int = 0
    classifiers: tuple = learn.FAMILY_NAMES
    grids: dict = field(default_factory=dict)  # family -> grid override (list of dicts)
    determinants: tuple = DETERMINANTS
    boot_replicates: int = 1000
    perm_replicates: int = 1000
    min_positives: int = 50
    folds: int = 5
    epochs: int = 50
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(learn.resolve_family(c) for c in self.classifiers))
        if len(set(self.classifiers)) != len(self.classifiers):
            raise AuditError("duplicate classifier names in config")
        unknown = set(self.determinants) - set(DETERMINANTS)
        if unknown:
            raise AuditError(f"unknown determinants {sorted(unknown)}")
        for name, count in (("boot_replicates", self.boot_replicates), ("perm_replicates", self.perm_replicates)):
            if count < MIN_REPLICATES:
                raise AuditError(f"{name} {count} below the floor of {MIN_REPLICATES}")
        if not 0.0 < self.split_ratio < 1.0:
            raise AuditError(f"split ratio {self.split_ratio} outside (0, 1)")
        if self.jobs < 1:
            raise AuditError("jobs must be >= 1")


@dataclass(frozen=True)
class ForestDatum:
    determinant: str
    category: str
    criterion: str
    n: int
    ci: object = None  # ProportionCI, or None when not computable
    note: str = ""

    def as_dict(self):
        d = {
            "determinant": self.determinant,
            "category": self.category,
            "criterion": self.criterion,
            "n": self.n,
        }
        if self.ci is not None:
            d.update(point=self.ci.point, lo=self.ci.lo, hi=self.ci.hi,
                     replicates=self.ci.replicates, level=self.ci.level)
        if self.note:
            d["note"] = self.note
        return d


@dataclass(frozen=True)
class AuditReport:
    metadata: dict
    cohort_stats: tuple
    whole_metrics: dict
    models: dict
    test_ids: tuple
    test_labels: tuple
    test_scores: dict
    subgroup_tests: dict
    pairwise_tests: dict
    forest: tuple
    criteria_prevalence: dict

    def as_dict(self):
        return {
            "metadata": self.metadata,
            "cohort_stats": [dict(r) for r in self.cohort_stats],
            "whole_metrics": self.whole_metrics,
            "models": self.models,
            "test_ids": list(self.test_ids),
            "test_labels": [int(v) for v in self.test_labels],
            "test_scores": {k: list(v) for k, v in self.test_scores.items()},
            "subgroup_tests": self.subgroup_tests,
            "pairwise_tests": self.pairwise_tests,
            "forest": [d.as_dict() for d in self.forest],
            "criteria_prevalence": self.criteria_prevalence,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Cohort statistics (the Table-1 style summary)
# ---------------------------------------------------------------------------

def cohort_stats(cohort, criterion_flags, split):
    """Per (determinant, category) counts over the criterion-positive patients.

    Columns: n, percent of the selected population, deaths, percent
    in-hospital mortality, training count, testing count.
    """
    if criterion_flags is None:
        records = list(cohort.records)
    else:
        flags = np.asarray(criterion_flags, dtype=bool)
        records = [r for r, keep in zip(cohort.records, flags) if keep]
    total = len(records)
    rows = []
    for det in DETERMINANTS:
        for cat in categories(det):
            members = [r for r in records if r.determinants.category(det) == cat]
            n = len(members)
            deaths = sum(r.died_in_hospital for r in members)
            rows.append(
                {
                    "determinant": det,
                    "category": cat,
                    "n": n,
                    "pct_population": 100.0 * n / total if total else 0.0,
                    "deaths": deaths,
                    "pct_mortality": 100.0 * deaths / n if n else 0.0,
                    "n_train": sum(r.id in split.train_ids for r in members) if split else 0,
                    "n_test": sum(r.id in split.test_ids for r in members) if split else 0,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Forest-plot data (criterion prevalence per subgroup with bootstrap CIs)
# ---------------------------------------------------------------------------

def forest_data(cohort, criteria, replicates=1000, level=0.95, seed=0):
    """One ForestDatum per (determinant category x criterion) over the full cohort."""
    if not criteria:
        raise AuditError("forest_data needs at least one criterion")
    flags = flag_cohort(cohort, criteria)
    data = []
    for det in DETERMINANTS:
        member_cat = np.array([r.determinants.category(det) for r in cohort.records])
        for cat in categories(det):
            mask = member_cat == cat
            n = int(mask.sum())
            for crit in flags.criterion_names:
                if n == 0:
                    data.append(ForestDatum(det, cat, crit, 0, note="empty category"))
                    continue
                ci = bootstrap_proportion_ci(
                    flags.column(crit)[mask],
                    replicates=replicates,
                    level=level,
                    seed=derive_seed(seed, "forest", det, cat, crit),
                )
                data.append(ForestDatum(det, cat, crit, n, ci=ci))
    return data


# ---------------------------------------------------------------------------
# The audit itself
# ---------------------------------------------------------------------------

def _not_computable(reason):
    return {"not_computable": reason}


def _subgroup_cell(test_scores, test_labels, idx, replicates, seed):
    try:
        return perm_test_subgroup_vs_whole(test_scores, test_labels, idx, replicates, seed).as_dict()
    except UndefinedGroupAUC as exc:
        return _not_computable(str(exc))


def _pairwise_cell(scores_a, labels_a, scores_b, labels_b, replicates, seed):
    try:
        return perm_test_pairwise(scores_a, labels_a, scores_b, labels_b, replicates, seed).as_dict()
    except UndefinedGroupAUC as exc:
        return _not_computable(str(exc))


def run_audit(cohort, config, rules_dir=None, registry=None):
    """Execute the full workflow and assemble an AuditReport."""
    registry = registry or load_registry()
    criteria = load_all_criteria(rules_dir, registry)
    by_name = {c.name: c for c in criteria}
    if config.criterion not in by_name:
        raise AuditError(f"criterion {config.criterion!r} not among loaded rules {sorted(by_name)}")

    flags = flag_cohort(cohort, criteria)
    forest = forest_data(cohort, criteria, config.boot_replicates, 0.95, config.seed)

    keep = flags.column(config.criterion)
    selected = tuple(r for r, k in zip(cohort.records, keep) if k)
    if len(selected) < config.min_positives:
        raise AuditError(
            f"criterion {config.criterion!r} selected {len(selected)} patients, "
            f"below the floor of {config.min_positives}"
        )
    sepsis = Cohort(records=selected, provenance=f"{cohort.provenance} | {config.criterion}-positive")
    assignment = split_cohort(sepsis, config.split_ratio, config.seed)

    stats_rows = cohort_stats(cohort, keep, assignment)

    X = feature_matrix(sepsis.records)
    y = outcome_vector(sepsis.records)
    train_mask = assignment.train_mask(sepsis.records)
    test_mask = ~train_mask
    if y[test_mask].all() or not y[test_mask].any():
        raise AuditError("test set holds a single outcome class; whole-test AUC undefined")
    if y[train_mask].all() or not y[train_mask].any():
        raise AuditError("training set holds a single outcome class")

    scaler = learn.fit_scaler(X[train_mask])
    test_records = [r for r, m in zip(sepsis.records, test_mask) if m]
    test_labels = y[test_mask]

    whole_metrics, models, test_scores = {}, {}, {}
    for name in config.classifiers:
        grid = tuple(dict(g) for g in config.grids.get(name, ()))
        spec = learn.ClassifierSpec(
            family=name, grid=grid, seed=config.seed, epochs=config.epochs
        )
        model = learn.train(spec, X[train_mask], y[train_mask], folds=config.folds, scaler=scaler)
        scores = model.decision_scores(X[test_mask])
        report = confusion_metrics(scores, test_labels, model.threshold)
        whole_metrics[name] = report.as_dict()
        models[name] = model.summary()
        test_scores[name] = [float(s) for s in scores]

    # permutation sweep: one task per report cell, keyed seeds, order-free reduction
    cat_index = {
        det: {
            cat: np.nonzero([r.determinants.category(det) == cat for r in test_records])[0]
            for cat in categories(det)
        }
        for det in config.determinants
    }
    tasks = []
    for name in config.classifiers:
        scores = np.asarray(test_scores[name])
        for det in config.determinants:
            for cat in categories(det):
                idx = cat_index[det][cat]
                key = ("subgroup", det, cat, name)
                if idx.size == 0:
                    tasks.append((key, lambda: _not_computable("no members in test set")))
                    continue
                seed = derive_seed(config.seed, "subgroup", det, cat, name)
                tasks.append(
                    (key, lambda s=scores, i=idx, sd=seed: _subgroup_cell(
                        s, test_labels, i, config.perm_replicates, sd))
                )
            for cat_a, cat_b in combinations(categories(det), 2):
                idx_a, idx_b = cat_index[det][cat_a], cat_index[det][cat_b]
                key = ("pairwise", det, f"{cat_a}|{cat_b}", name)
                if idx_a.size == 0 or idx_b.size == 0:
                    tasks.append((key, lambda: _not_computable("no members in test set")))
                    continue
                seed = derive_seed(config.seed, "pairwise", det, cat_a, cat_b, name)
                tasks.append(
                    (key, lambda s=scores, a=idx_a, b=idx_b, sd=seed: _pairwise_cell(
                        s[a], test_labels[a], s[b], test_labels[b], config.perm_replicates, sd))
                )

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = dict(zip([t[0] for t in tasks], pool.map(lambda t: t[1](), tasks)))
    else:
        results = {key: fn() for key, fn in tasks}

    subgroup_tests = {
        det: {
            cat: {name: results[("subgroup", det, cat, name)] for name in config.classifiers}
            for cat in categories(det)
        }
        for det in config.determinants
    }
    pairwise_tests = {
        det: {
            f"{a}|{b}": {name: results[("pairwise", det, f"{a}|{b}", name)] for name in config.classifiers}
            for a, b in combinations(categories(det), 2)
        }
        for det in config.determinants
    }

    metadata = {
        "package_version": _package_version(),
        "criterion": config.criterion,
        "split_ratio": config.split_ratio,
        "seed": config.seed,
        "classifiers": list(config.classifiers),
        "determinants": list(config.determinants),
        "boot_replicates": config.boot_replicates,
        "perm_replicates": config.perm_replicates,
        "folds": config.folds,
        "epochs": config.epochs,
        "n_cohort": len(cohort),
        "n_selected": len(sepsis),
        "n_train": int(train_mask.sum()),
        "n_test": int(test_mask.sum()),
        "cohort_provenance": cohort.provenance,
        "conventions": {
            "auc_ties": "half credit (Mann-Whitney)",
            "threshold_rule": "predict positive iff score > threshold",
            "one_tailed_p": "sign-selected tail, doubled for direction selection, add-one smoothed",
            "two_tailed_p": "|diff| exceedance, add-one smoothed",
            "rng": "Philox4x64 keyed per (seed, replicate) via SeedSequence",
        },
    }
    return AuditReport(
        metadata=metadata,
        cohort_stats=tuple(stats_rows),
        whole_metrics=whole_metrics,
        models=models,
        test_ids=tuple(r.id for r in test_records),
        test_labels=tuple(bool(v) for v in test_labels),
        test_scores=test_scores,
        subgroup_tests=subgroup_tests,
        pairwise_tests=pairwise_tests,
        forest=tuple(forest),
        criteria_prevalence=flags.prevalence(),
    )


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return Path(path)


def _test_rows(cells_by_group, group_b_of, classifier_order):
    # canonical row order (sorted groups, configured classifier order) so a
    # report re-rendered from JSON emits identical bytes
    rows = []
    for group_key in sorted(cells_by_group):
        for name in classifier_order:
            cell = cells_by_group[group_key][name]
            group_a, group_b = group_b_of(group_key)
            if "not_computable" in cell:
                rows.append([name, group_a, group_b, "", "", f"NotComputable({cell['not_computable']})", "", ""])
            else:
                rows.append(
                    [
                        name,
                        group_a,
                        group_b,
                        repr(cell["observed_diff"]),
                        repr(cell["p_value"]),
                        cell["tail"],
                        cell["replicates"],
                        cell["seed"],
                    ]
                )
    return rows


def write_report(report, out_dir):
    """Write the full artifact directory; returns the list of paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    path.write_text(report.to_json())
    written.append(path)

    table_rows = [
        [name] + [repr(report.whole_metrics[name][c]) for c in TABLE_COLUMNS]
        for name in report.metadata["classifiers"]
    ]
    written.append(_write_csv(out / "table2.csv", ("classifier",) + TABLE_COLUMNS, table_rows))

    order = report.metadata["classifiers"]
    for det in sorted(report.subgroup_tests):
        rows = _test_rows(report.subgroup_tests[det], lambda cat: (cat, WHOLE_TEST_LABEL), order)
        written.append(_write_csv(out / f"one_sided_{det}.csv", TEST_CSV_FIELDS, rows))
    for det in sorted(report.pairwise_tests):
        rows = _test_rows(report.pairwise_tests[det], lambda pair: tuple(pair.split("|", 1)), order)
        written.append(_write_csv(out / f"pairwise_{det}.csv", TEST_CSV_FIELDS, rows))

    forest_rows = []
    for d in report.forest:
        row = d.as_dict()
        forest_rows.append(
            [
                row["determinant"],
                row["category"],
                row["criterion"],
                row["n"],
                repr(row["point"]) if "point" in row else "",
                repr(row["lo"]) if "lo" in row else "",
                repr(row["hi"]) if "hi" in row else "",
                row.get("replicates", ""),
                row.get("level", ""),
                row.get("note", ""),
            ]
        )
    written.append(
        _write_csv(
            out / "forest.csv",
            ("determinant", "category", "criterion", "n", "point", "lo", "hi", "replicates", "level", "note"),
            forest_rows,
        )
    )

    svg_path = out / "forest.svg"
    svg_path.write_text(plots.render_forest_svg(report.forest))
    written.append(svg_path)

    scores_dir = out / "scores"
    scores_dir.mkdir(exist_ok=True)
    for name in report.metadata["classifiers"]:
        rows = [
            [rid, int(lab), repr(score)]
            for rid, lab, score in zip(report.test_ids, report.test_labels, report.test_scores[name])
        ]
        written.append(_write_csv(scores_dir / f"{name}.csv", ("id", "label", "score"), rows))
    return written
