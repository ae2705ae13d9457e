"""sepsisaudit: subgroup disparity auditing for sepsis mortality prediction.

Library layout mirrors the workflow: ``cohort`` (data model, ingestion,
splitting, synthesis), ``criteria`` (rule engine over clinical
summaries), ``learn`` (the sixteen classifier configurations),
``metrics`` (ROC/AUC and the seven-column report), ``stats`` (bootstrap
CIs and permutation tests), ``audit`` (orchestration and artifacts),
``cli`` (the command-line pipeline).
"""

from . import audit, cohort, criteria, learn, metrics, plots, stats
from .audit import AuditConfig, AuditReport, cohort_stats, forest_data, run_audit, write_report
from .cohort import (
    Cohort,
    GeneratorProfile,
    PatientRecord,
    SplitAssignment,
    generate_cohort,
    load_profile,
    parse_cohort,
    relevel_determinants,
    split,
    write_cohort,
)
from .criteria import SepsisCriterion, evaluate, flag_cohort, load_all_criteria, load_registry
from .learn import ClassifierSpec, TrainedModel, cross_validate, train, youden_threshold
from .metrics import MetricReport, confusion_metrics, roc_auc, roc_curve
from .stats import (
    PermutationResult,
    ProportionCI,
    bootstrap_proportion_ci,
    perm_test_pairwise,
    perm_test_subgroup_vs_whole,
)

__version__ = "0.1.0"

__all__ = [
    "AuditConfig",
    "AuditReport",
    "ClassifierSpec",
    "Cohort",
    "GeneratorProfile",
    "MetricReport",
    "PatientRecord",
    "PermutationResult",
    "ProportionCI",
    "SepsisCriterion",
    "SplitAssignment",
    "TrainedModel",
    "audit",
    "bootstrap_proportion_ci",
    "cohort",
    "cohort_stats",
    "confusion_metrics",
    "criteria",
    "cross_validate",
    "evaluate",
    "flag_cohort",
    "forest_data",
    "generate_cohort",
    "learn",
    "load_all_criteria",
    "load_profile",
    "load_registry",
    "metrics",
    "parse_cohort",
    "perm_test_pairwise",
    "perm_test_subgroup_vs_whole",
    "plots",
    "relevel_determinants",
    "roc_auc",
    "roc_curve",
    "run_audit",
    "split",
    "stats",
    "train",
    "write_cohort",
    "write_report",
    "youden_threshold",
]
