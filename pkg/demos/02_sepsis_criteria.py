"""Flag a cohort with the six shipped sepsis criteria and compare prevalence.

Shows the rule engine on individual patients, the cohort-level flag
matrix, and the forest-plot data (per-subgroup prevalence with bootstrap
confidence intervals) behind the criterion-disparity figure.
"""

from sepsisaudit.audit import forest_data
from sepsisaudit.cohort import generate_cohort, load_profile
from sepsisaudit.criteria import evaluate, flag_cohort, load_all_criteria
from sepsisaudit.plots import render_forest_svg

cohort = generate_cohort(load_profile("table1"), 4000, seed=11)
criteria = load_all_criteria()
print("loaded criteria:", ", ".join(c.name for c in criteria))

# one patient, all six rules
record = cohort.records[0]
print(f"\npatient {record.id}: codes={sorted(record.summary.icd9_codes)}, "
      f"sofa={record.summary.sofa_24h}, "
      f"offset={record.summary.suspected_infection_offset_h}")
for crit in criteria:
    print(f"  {crit.name:<9} -> {evaluate(crit, record.summary)}")

# whole-cohort prevalence; sepsis-3 is the most conservative rule
flags = flag_cohort(cohort, criteria)
print("\ncriterion prevalence over the cohort:")
for name, value in flags.prevalence().items():
    bar = "#" * int(50 * value)
    print(f"  {name:<9} {value:6.2%}  {bar}")

# forest data: prevalence per subgroup with 95% bootstrap CIs
data = forest_data(cohort, criteria, replicates=1000, level=0.95, seed=3)
print("\nrace subgroup prevalence (95% CI), per criterion:")
for d in data:
    if d.determinant == "race" and d.ci is not None:
        print(f"  {d.category:<10} {d.criterion:<9} {d.ci.point:.3f} [{d.ci.lo:.3f}, {d.ci.hi:.3f}]  n={d.n}")

with open("forest.svg", "w") as fh:
    fh.write(render_forest_svg(data))
print("\nwrote forest.svg")
