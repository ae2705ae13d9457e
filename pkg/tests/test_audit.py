import json
import warnings
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from sepsisaudit.audit import AuditConfig, cohort_stats, forest_data, run_audit, write_report
from sepsisaudit.cohort import (
    Cohort,
    Race,
    categories,
    generate_cohort,
    load_profile,
    split,
)
from sepsisaudit.criteria import load_all_criteria
from sepsisaudit.errors import AuditError
from sepsisaudit.metrics import TABLE_COLUMNS, roc_auc
from tests.test_cohort import make_record

FAST_CLASSIFIERS = ("ridge", "logistic_regression", "multinomial_nb")


@pytest.fixture(scope="module")
def small_report():
    cohort = generate_cohort(load_profile("table1"), 900, seed=13)
    config = AuditConfig(
        criterion="sepsis3",
        seed=13,
        classifiers=FAST_CLASSIFIERS,
        boot_replicates=100,
        perm_replicates=100,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cohort, config, run_audit(cohort, config)


class TestCohortStats:
    def test_paper_shaped_asian_row(self):
        records = []
        for i in range(179):
            records.append(make_record(f"a{i}", race=Race.Asian, died=i < 26))
        for i in range(5783 - 179):
            records.append(make_record(f"w{i}", race=Race.White, died=i < 810))
        cohort = Cohort(records=tuple(records))
        assignment = split(cohort, 0.7, seed=1)
        rows = cohort_stats(cohort, None, assignment)
        asian = next(r for r in rows if r["determinant"] == "race" and r["category"] == "Asian")
        assert asian["n"] == 179
        assert round(asian["pct_population"], 2) == 3.10
        assert asian["deaths"] == 26
        assert round(asian["pct_mortality"], 2) == 14.53
        assert asian["n_train"] + asian["n_test"] == 179

    def test_single_patient_cohort_has_full_shares(self):
        cohort = Cohort(records=(make_record("solo", race=Race.Hispanic, died=True),))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assignment = split(cohort, 0.7, seed=0)
        rows = cohort_stats(cohort, None, assignment)
        hispanic = next(r for r in rows if r["category"] == "Hispanic")
        assert hispanic["n"] == 1 and hispanic["pct_population"] == 100.0
        assert hispanic["pct_mortality"] == 100.0
        empty = next(r for r in rows if r["category"] == "Asian")
        assert empty["n"] == 0 and empty["pct_population"] == 0.0

    def test_recount_oracle_on_synthetic_cohort(self):
        cohort = generate_cohort(load_profile("table1"), 400, seed=3)
        assignment = split(cohort, 0.7, seed=3)
        flags = np.array([r.summary.sofa_24h >= 2 for r in cohort.records])
        rows = cohort_stats(cohort, flags, assignment)
        selected = [r for r, f in zip(cohort.records, flags) if f]
        for row in rows:
            members = [r for r in selected if r.determinants.category(row["determinant"]) == row["category"]]
            assert row["n"] == len(members)
            assert row["deaths"] == sum(r.died_in_hospital for r in members)
            assert row["n_train"] == sum(r.id in assignment.train_ids for r in members)
            assert row["n_test"] == sum(r.id in assignment.test_ids for r in members)
            if members:
                assert row["pct_mortality"] == pytest.approx(100.0 * row["deaths"] / row["n"])


class TestForestData:
    def test_datum_count_is_categories_times_criteria(self):
        cohort = generate_cohort(load_profile("table1"), 200, seed=5)
        criteria = load_all_criteria()
        data = forest_data(cohort, criteria, replicates=100, seed=1)
        n_categories = sum(len(categories(d)) for d in ("race", "gender", "marital", "insurance", "language"))
        assert n_categories == 20
        assert len(data) == 20 * 6

    def test_always_true_criterion_gives_unit_point_and_zero_width(self):
        from sepsisaudit.criteria import SepsisCriterion, SofaGe

        cohort = generate_cohort(load_profile("table1"), 150, seed=6)
        crit = SepsisCriterion(name="everyone", rule=SofaGe(0))
        data = forest_data(cohort, [crit], replicates=100, seed=2)
        for d in data:
            if d.ci is not None:
                assert (d.ci.point, d.ci.lo, d.ci.hi) == (1.0, 1.0, 1.0)

    def test_empty_category_marked_not_computable(self):
        records = tuple(make_record(f"r{i}", race=Race.White) for i in range(30))
        cohort = Cohort(records=records)
        criteria = load_all_criteria()
        data = forest_data(cohort, criteria, replicates=100, seed=3)
        asian_cells = [d for d in data if d.category == "Asian"]
        assert asian_cells and all(d.ci is None and d.note == "empty category" for d in asian_cells)


class TestRunAudit:
    def test_whole_metrics_shape(self, small_report):
        _, config, report = small_report
        assert set(report.whole_metrics) == set(FAST_CLASSIFIERS)
        for name in FAST_CLASSIFIERS:
            row = report.whole_metrics[name]
            for column in TABLE_COLUMNS:
                assert 0.0 <= row[column] <= 1.0

    def test_sweep_shape(self, small_report):
        _, config, report = small_report
        for det in ("race", "gender", "marital", "insurance", "language"):
            cats = categories(det)
            assert set(report.subgroup_tests[det]) == set(cats)
            assert set(report.pairwise_tests[det]) == {f"{a}|{b}" for a, b in combinations(cats, 2)}
            for cat in cats:
                assert set(report.subgroup_tests[det][cat]) == set(FAST_CLASSIFIERS)

    def test_every_cell_has_result_or_reason(self, small_report):
        _, _, report = small_report
        for det in report.subgroup_tests:
            for cat, by_clf in report.subgroup_tests[det].items():
                for cell in by_clf.values():
                    assert ("p_value" in cell) != ("not_computable" in cell)
        for det in report.pairwise_tests:
            for pair, by_clf in report.pairwise_tests[det].items():
                for cell in by_clf.values():
                    assert ("p_value" in cell) != ("not_computable" in cell)

    def test_observed_diffs_recomputable_from_serialized_scores(self, small_report):
        cohort, config, report = small_report
        labels = np.array(report.test_labels, dtype=bool)
        # rebuild subgroup membership from the original cohort's test ids
        from sepsisaudit.criteria import flag_cohort, load_all_criteria as _load

        flags = flag_cohort(cohort, _load())
        keep = flags.column(config.criterion)
        selected = [r for r, k in zip(cohort.records, keep) if k]
        by_id = {r.id: r for r in selected}
        for det in report.subgroup_tests:
            member = {
                cat: np.array([by_id[rid].determinants.category(det) == cat for rid in report.test_ids])
                for cat in categories(det)
            }
            for name in FAST_CLASSIFIERS:
                scores = np.array(report.test_scores[name])
                whole = roc_auc(scores, labels)
                for cat, by_clf in report.subgroup_tests[det].items():
                    cell = by_clf[name]
                    if "p_value" not in cell:
                        continue
                    sub = member[cat]
                    expected = roc_auc(scores[sub], labels[sub]) - whole
                    assert cell["observed_diff"] == pytest.approx(expected, abs=1e-12)

    def test_byte_identical_reports_and_jobs_invariance(self, small_report):
        cohort, config, report = small_report
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            again = run_audit(cohort, config)
            threaded = run_audit(cohort, replace(config, jobs=4))
        assert report.to_json() == again.to_json() == threaded.to_json()

    def test_leakage_guard_test_rows_do_not_affect_training(self, small_report):
        cohort, config, report = small_report
        test_ids = set(report.test_ids)
        mutated = []
        for r in cohort.records:
            if r.id in test_ids:
                mutated.append(
                    type(r)(
                        id=r.id,
                        age_years=min(95.0, r.age_years + 7.0),
                        summary=r.summary,
                        determinants=r.determinants,
                        died_in_hospital=not r.died_in_hospital,
                    )
                )
            else:
                mutated.append(r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            other = run_audit(Cohort(records=tuple(mutated), provenance=cohort.provenance), config)
        assert other.models == report.models  # identical fits, thresholds, grids
        assert other.test_scores != report.test_scores

    def test_min_positives_gate(self):
        cohort = generate_cohort(load_profile("table1"), 60, seed=1)
        config = AuditConfig(criterion="sepsis3", classifiers=("ridge",),
                             boot_replicates=100, perm_replicates=100, min_positives=5000)
        with pytest.raises(AuditError, match="below the floor"):
            run_audit(cohort, config)

    def test_unknown_criterion(self):
        cohort = generate_cohort(load_profile("table1"), 100, seed=1)
        config = AuditConfig(criterion="zebra", classifiers=("ridge",),
                             boot_replicates=100, perm_replicates=100)
        with pytest.raises(AuditError, match="zebra"):
            run_audit(cohort, config)

    def test_config_validation(self):
        with pytest.raises(AuditError, match="floor"):
            AuditConfig(perm_replicates=10)
        with pytest.raises(AuditError, match="ratio"):
            AuditConfig(split_ratio=1.2)
        with pytest.raises(AuditError, match="determinants"):
            AuditConfig(determinants=("race", "shoe_size"))


class TestWriteReport:
    def test_artifact_layout(self, small_report, tmp_path):
        _, _, report = small_report
        written = write_report(report, tmp_path / "rpt")
        names = {p.relative_to(tmp_path / "rpt").as_posix() for p in written}
        expected = {"report.json", "table2.csv", "forest.csv", "forest.svg"}
        expected |= {f"one_sided_{d}.csv" for d in ("race", "gender", "marital", "insurance", "language")}
        expected |= {f"pairwise_{d}.csv" for d in ("race", "gender", "marital", "insurance", "language")}
        expected |= {f"scores/{n}.csv" for n in FAST_CLASSIFIERS}
        assert names == expected
        doc = json.loads((tmp_path / "rpt" / "report.json").read_text())
        assert doc["metadata"]["criterion"] == "sepsis3"

    def test_csv_schemas(self, small_report, tmp_path):
        _, _, report = small_report
        write_report(report, tmp_path / "rpt")
        table2 = (tmp_path / "rpt" / "table2.csv").read_text().splitlines()
        assert table2[0] == "classifier," + ",".join(TABLE_COLUMNS)
        assert len(table2) == 1 + len(FAST_CLASSIFIERS)
        one_sided = (tmp_path / "rpt" / "one_sided_race.csv").read_text().splitlines()
        assert one_sided[0] == "classifier,group_a,group_b,observed_diff,p_value,tail,replicates,seed"
        assert all(",WHOLE_TEST," in line for line in one_sided[1:])
        assert len(one_sided) == 1 + 5 * len(FAST_CLASSIFIERS)
        pairwise = (tmp_path / "rpt" / "pairwise_race.csv").read_text().splitlines()
        assert len(pairwise) == 1 + 10 * len(FAST_CLASSIFIERS)
        svg = (tmp_path / "rpt" / "forest.svg").read_text()
        assert svg.startswith("<svg") and "sepsis3" in svg
