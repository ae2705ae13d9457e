"""Acceptance gate: the eight shipping criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria complete. Every tolerance is pinned here, not configurable.
"""

import hashlib
import json
import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest

import sepsisaudit.learn as learn
from sepsisaudit.cli import main as cli_main
from sepsisaudit.cohort import (
    feature_matrix,
    generate_cohort,
    load_profile,
    mortality_probability,
    outcome_vector,
)
from sepsisaudit.metrics import roc_auc
from sepsisaudit.rng import keyed_rng
from sepsisaudit.stats import (
    Tail,
    bootstrap_proportion_ci,
    perm_test_pairwise,
    perm_test_subgroup_vs_whole,
)
from tests.test_metrics import brute_force_auc


@contextmanager
def criterion(num, name, limit_s):
    start = time.perf_counter()
    outcome = {"ok": False}
    try:
        yield outcome
        outcome["ok"] = True
    finally:
        elapsed = time.perf_counter() - start
        status = "PASS" if outcome["ok"] and elapsed < limit_s else "FAIL"
        print(f"[{status}] criterion {num}: {name} ({elapsed:.1f}s, limit {limit_s:.0f}s)")
    assert elapsed < limit_s, f"criterion {num} exceeded its {limit_s}s budget ({elapsed:.1f}s)"


# Published whole-test performance table (accuracy, auc, precision, recall,
# f1_binary, f1_macro, specificity), sixteen rows.
PUBLISHED_TABLE = {
    "ridge": (0.6790, 0.7774, 0.2682, 0.7052, 0.3886, 0.5855, 0.6745),
    "perceptron": (0.6720, 0.7786, 0.2634, 0.7052, 0.3835, 0.5801, 0.6664),
    "passive_aggressive": (0.6841, 0.7582, 0.2733, 0.7131, 0.3951, 0.5907, 0.6792),
    "knn": (0.7135, 0.7299, 0.2780, 0.6135, 0.3826, 0.5981, 0.7305),
    "random_forest": (0.7516, 0.6459, 0.2826, 0.4661, 0.3519, 0.5991, 0.7999),
    "linear_svc_l1": (0.6749, 0.7781, 0.2654, 0.7052, 0.3856, 0.5823, 0.6698),
    "linear_svc_l2": (0.6784, 0.7777, 0.2678, 0.7052, 0.3882, 0.5850, 0.6739),
    "sgd_l1": (0.6790, 0.7759, 0.2682, 0.7052, 0.3886, 0.5855, 0.6745),
    "sgd_l2": (0.6790, 0.7749, 0.2668, 0.6972, 0.3859, 0.5843, 0.6759),
    "sgd_en": (0.6801, 0.7753, 0.2683, 0.7012, 0.3881, 0.5858, 0.6765),
    "multinomial_nb": (0.6392, 0.7040, 0.2348, 0.6614, 0.3466, 0.5487, 0.6354),
    "bernoulli_nb": (0.3107, 0.5724, 0.1665, 0.9402, 0.2830, 0.3096, 0.2042),
    "logistic_regression": (0.6824, 0.7761, 0.2720, 0.7131, 0.3938, 0.5893, 0.6772),
    "svc_rbf": (0.6847, 0.7744, 0.2702, 0.6932, 0.3888, 0.5882, 0.6833),
    "svc_poly": (0.6749, 0.7751, 0.2654, 0.7052, 0.3856, 0.5823, 0.6698),
    "svc_sigmoid": (0.6277, 0.6873, 0.2349, 0.6972, 0.3514, 0.5451, 0.6159),
}

TEST_PREVALENCE = 836 / 5783  # deaths over cohort size, applied to the 1,735-row test set


def test_criterion_1_published_table_identities():
    with criterion(1, "published-table identity sweep", 1.0):
        assert len(PUBLISHED_TABLE) == 16
        for name, (acc, _auc, p, r, f1, _f1m, spec) in PUBLISHED_TABLE.items():
            assert abs(2 * p * r / (p + r) - f1) <= 5e-4, name
            implied_acc = TEST_PREVALENCE * r + (1 - TEST_PREVALENCE) * spec
            assert abs(implied_acc - acc) <= 2e-3, name


def test_criterion_2_auc_oracle_equivalence():
    with criterion(2, "AUC vs O(n^2) Mann-Whitney brute force, 1000 instances", 5.0):
        rng = keyed_rng("acceptance.auc", 0)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(4, 201))
            pool = rng.choice([0.0, 0.1, 0.1, 0.5, 0.5, 0.9, 1.3], size=n)
            scores = pool + rng.choice([0.0, 0.0, 0.05], size=n)  # guaranteed ties remain
            labels = rng.random(n) < float(rng.uniform(0.2, 0.8))
            if labels.all() or not labels.any():
                continue
            assert abs(roc_auc(scores, labels) - brute_force_auc(scores, labels)) <= 1e-12
            checked += 1


def test_criterion_3_permutation_null_calibration():
    with criterion(3, "permutation null calibration, both schemes", 120.0):
        ps_sub, ps_pair = [], []
        run = 0
        while len(ps_sub) < 200 or len(ps_pair) < 200:
            rng = keyed_rng("acceptance.null", run)
            run += 1
            scores = rng.normal(size=160)
            labels = rng.random(160) < 0.3
            if labels.all() or not labels.any():
                continue
            if len(ps_sub) < 200:
                idx = rng.choice(160, size=50, replace=False)
                if labels[idx].any() and not labels[idx].all():
                    ps_sub.append(
                        perm_test_subgroup_vs_whole(scores, labels, idx, 500, seed=run).p_value
                    )
            if len(ps_pair) < 200:
                sa, la = rng.normal(size=80), rng.random(80) < 0.3
                sb, lb = rng.normal(size=80), rng.random(80) < 0.3
                if la.any() and not la.all() and lb.any() and not lb.all():
                    ps_pair.append(perm_test_pairwise(sa, la, sb, lb, 500, seed=run).p_value)
        for ps in (np.array(ps_sub), np.array(ps_pair)):
            assert 0.01 <= np.mean(ps <= 0.05) <= 0.10
            assert 0.40 <= np.mean(ps <= 0.5) <= 0.60


def test_criterion_4_planted_disparity_power():
    with criterion(4, "planted-disparity power and specificity", 600.0):
        profile = load_profile("table1").with_label_noise("race", "Asian", 1.0)
        race_cats = ("Asian", "Black", "Hispanic", "White", "Other")
        flags = {cat: 0 for cat in race_cats}
        whole_aucs = []
        n_seeds = 100
        for s in range(n_seeds):
            cohort = generate_cohort(profile, 5783, seed=40000 + s)
            X = feature_matrix(cohort.records)
            y = outcome_vector(cohort.records)
            scores = mortality_probability(profile, X[:, 0], X[:, 1], X[:, 2])
            whole_aucs.append(roc_auc(scores, y))
            member = np.array([r.determinants.race.value for r in cohort.records])
            for cat in race_cats:
                idx = np.nonzero(member == cat)[0]
                res = perm_test_subgroup_vs_whole(scores, y, idx, replicates=1000, seed=s)
                # a disparity flag is a significant performance DECREASE
                if res.p_value <= 0.05 and res.tail is Tail.LowerOneTailed:
                    flags[cat] += 1
        assert 0.74 <= np.mean(whole_aucs) <= 0.82  # "global model near 0.78"
        assert flags["Asian"] >= 0.90 * n_seeds, flags
        for cat in race_cats[1:]:
            assert flags[cat] <= 0.10 * n_seeds, flags


def test_criterion_5_bootstrap_coverage():
    with criterion(5, "bootstrap CI coverage at n=200, p=0.3", 60.0):
        truth = 0.3
        covered = 0
        draws = 500
        for i in range(draws):
            rng = keyed_rng("acceptance.coverage", i)
            flags = rng.random(200) < truth
            ci = bootstrap_proportion_ci(flags, replicates=1000, level=0.95, seed=i)
            covered += ci.lo <= truth <= ci.hi
        assert 0.92 <= covered / draws <= 0.98


def test_criterion_6_classifier_sanity_floor_and_gradients():
    with criterion(6, "all 16 families >= 0.90 AUC on benchmark; gradient checks", 120.0):
        X, y = learn.separable_benchmark(n=400, seed=1)
        Xte, yte = learn.separable_benchmark(n=200, seed=2)
        for family in learn.FAMILY_NAMES:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model = learn.train(learn.ClassifierSpec(family, seed=3), X, y)
            auc = roc_auc(model.decision_scores(Xte), yte)
            assert auc >= 0.90, f"{family}: AUC {auc:.3f}"

        rng = keyed_rng("acceptance.grad", 0)
        for trial in range(5):
            Xg = rng.random((40, 3))
            yg = rng.random(40) < 0.5
            wb = rng.normal(size=4)

            def num_grad(f):
                g = np.zeros(4)
                for i in range(4):
                    up, dn = wb.copy(), wb.copy()
                    up[i] += 1e-6
                    dn[i] -= 1e-6
                    g[i] = (f(up) - f(dn)) / 2e-6
                return g

            an = learn.logistic_gradient(wb, Xg, yg, l2=0.1)
            nu = num_grad(lambda v: learn.logistic_objective(v, Xg, yg, 0.1))
            assert np.allclose(an, nu, rtol=1e-5, atol=1e-8)
            for penalty in ("l1", "l2", "en"):
                an = learn.hinge_gradient(wb, Xg, yg, alpha=0.05, penalty=penalty)
                nu = num_grad(lambda v: learn.hinge_objective(v, Xg, yg, alpha=0.05, penalty=penalty))
                assert np.allclose(an, nu, rtol=1e-5, atol=1e-8)


@pytest.fixture(scope="module")
def full_audit(tmp_path_factory):
    """One full 16-classifier CLI audit on the synthetic table1 cohort,
    plus a repeat run and a --jobs 4 run for the determinism criterion."""
    root = tmp_path_factory.mktemp("acceptance")
    cohort_csv = root / "cohort.csv"
    assert cli_main(["synth", "--profile", "table1", "--n", "900", "--seed", "77",
                     "--out", str(cohort_csv)]) == 0
    outs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, jobs in enumerate((1, 1, 4)):
            out = root / f"rpt{i}"
            code = cli_main([
                "audit", "--cohort", str(cohort_csv), "--criterion", "sepsis3",
                "--split", "0.7", "--seed", "7", "--perms", "100", "--boot", "100",
                "--jobs", str(jobs), "--out", str(out),
            ])
            assert code == 0
            outs.append(out)
    return outs


def test_criterion_7_end_to_end_determinism(full_audit):
    with criterion(7, "byte-identical report.json across runs and --jobs", 900.0):
        digests = [
            hashlib.sha256((out / "report.json").read_bytes()).hexdigest() for out in full_audit
        ]
        assert digests[0] == digests[1] == digests[2]


def test_criterion_8_structural_fidelity(full_audit):
    with criterion(8, "report shape: 16x7 metrics, 5/2/5/5/3 + 10/1/10/10/3 columns", 900.0):
        doc = json.loads((full_audit[0] / "report.json").read_text())
        assert len(doc["whole_metrics"]) == 16
        for row in doc["whole_metrics"].values():
            for col in ("accuracy", "auc", "precision", "recall", "f1_binary", "f1_macro", "specificity"):
                assert col in row
        one_sided_shape = {"race": 5, "gender": 2, "marital": 5, "insurance": 5, "language": 3}
        pairwise_shape = {"race": 10, "gender": 1, "marital": 10, "insurance": 10, "language": 3}
        for det, count in one_sided_shape.items():
            assert len(doc["subgroup_tests"][det]) == count, det
            for by_clf in doc["subgroup_tests"][det].values():
                assert len(by_clf) == 16
                for cell in by_clf.values():
                    assert ("p_value" in cell) != ("not_computable" in cell)
        for det, count in pairwise_shape.items():
            assert len(doc["pairwise_tests"][det]) == count, det
            for by_clf in doc["pairwise_tests"][det].values():
                assert len(by_clf) == 16
