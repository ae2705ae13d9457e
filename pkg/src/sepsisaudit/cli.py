"""Command-line pipeline: synth -> criteria -> audit -> report.

Exit codes: 0 success, 2 usage or validation failure, 3 runtime failure.
All randomness enters through explicit ``--seed`` flags (default 0);
identical flags and inputs always reproduce identical output bytes, at
any ``--jobs`` setting.
"""

import argparse
import json
import sys
from pathlib import Path

from . import audit as audit_mod
from . import learn
from .cohort import generate_cohort, load_profile, parse_cohort, write_cohort
from .criteria import flag_cohort, load_all_criteria, load_registry
from .errors import AuditError, BadProfile
from .metrics import TABLE_COLUMNS
from .plots import render_forest_svg
from .stats import MIN_REPLICATES, ProportionCI

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def _fail(message, code):
    print(f"error: {message}", file=sys.stderr)
    return code


def _emit(payload, fmt, human):
    """Print either the human table or the JSON document to stdout."""
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        for line in human:
            print(line)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args):
    if args.n < 1:
        return _fail(f"--n must be >= 1, got {args.n}", EXIT_USAGE)
    try:
        profile = load_profile(args.profile)
        if args.noise_category:
            det, cat = args.noise_category.split("=", 1)
            profile = profile.with_label_noise(det.strip(), cat.strip(), args.noise_rate)
        cohort = generate_cohort(profile, args.n, args.seed)
    except BadProfile as exc:
        return _fail(str(exc), EXIT_USAGE)
    write_cohort(cohort, args.out)
    mortality = sum(r.died_in_hospital for r in cohort.records) / len(cohort)
    _emit(
        {"records": len(cohort), "mortality": mortality, "out": str(args.out), "seed": args.seed},
        args.format,
        [
            f"wrote {len(cohort)} records to {args.out}",
            f"profile={profile.name} seed={args.seed} mortality={mortality:.4f}",
        ],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def cmd_criteria(args):
    try:
        registry = load_registry(args.code_sets)
        criteria = load_all_criteria(args.rules_dir, registry)
    except AuditError as exc:
        return _fail(str(exc), EXIT_USAGE)
    if not criteria:
        return _fail(f"no criterion files found in {args.rules_dir}", EXIT_USAGE)
    try:
        cohort = parse_cohort(args.cohort, strict_offset=args.strict_offset)
    except AuditError as exc:
        return _fail(str(exc), EXIT_RUNTIME)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    flags = flag_cohort(cohort, criteria)

    flags_path = out_dir / "flags.csv"
    with flags_path.open("w", newline="") as fh:
        fh.write(",".join(("id",) + flags.criterion_names) + "\n")
        for i, rid in enumerate(flags.ids):
            fh.write(",".join([rid] + [str(int(v)) for v in flags.values[i]]) + "\n")
    written = [flags_path]

    if args.forest:
        data = audit_mod.forest_data(cohort, criteria, args.boot, args.level, args.seed)
        rows = [d.as_dict() for d in data]
        forest_csv = out_dir / "forest.csv"
        with forest_csv.open("w", newline="") as fh:
            fh.write("determinant,category,criterion,n,point,lo,hi,replicates,level,note\n")
            for row in rows:
                fh.write(
                    ",".join(
                        str(row.get(k, ""))
                        for k in ("determinant", "category", "criterion", "n", "point", "lo", "hi",
                                  "replicates", "level", "note")
                    )
                    + "\n"
                )
        (out_dir / "forest.svg").write_text(render_forest_svg(data))
        written += [forest_csv, out_dir / "forest.svg"]

    prevalence = flags.prevalence()
    _emit(
        {"n": len(cohort), "prevalence": prevalence, "written": [str(p) for p in written]},
        args.format,
        [f"flagged {len(cohort)} records with {len(criteria)} criteria -> {flags_path}"]
        + [f"  {name}: {prevalence[name]:.4f}" for name in flags.criterion_names],
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def cmd_audit(args):
    if args.perms < MIN_REPLICATES or args.boot < MIN_REPLICATES:
        return _fail(f"--perms and --boot must be >= {MIN_REPLICATES}", EXIT_USAGE)
    try:
        classifiers = (
            tuple(learn.resolve_family(c) for c in args.classifiers.split(","))
            if args.classifiers
            else learn.FAMILY_NAMES
        )
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    try:
        config = audit_mod.AuditConfig(
            criterion=args.criterion,
            split_ratio=args.split,
            seed=args.seed,
            classifiers=classifiers,
            boot_replicates=args.boot,
            perm_replicates=args.perms,
            min_positives=args.min_positives,
            epochs=args.epochs,
            jobs=args.jobs,
        )
    except AuditError as exc:
        return _fail(str(exc), EXIT_USAGE)
    try:
        cohort = parse_cohort(args.cohort, strict_offset=args.strict_offset)
        report = audit_mod.run_audit(cohort, config, rules_dir=args.rules_dir)
        written = audit_mod.write_report(report, args.out)
    except AuditError as exc:
        return _fail(str(exc), EXIT_RUNTIME)

    human = [f"audit complete: {report.metadata['n_selected']} {args.criterion}-positive patients "
             f"({report.metadata['n_train']} train / {report.metadata['n_test']} test)"]
    header = f"{'classifier':<22}" + "".join(f"{c:>12}" for c in TABLE_COLUMNS)
    human.append(header)
    for name in report.metadata["classifiers"]:
        m = report.whole_metrics[name]
        human.append(f"{name:<22}" + "".join(f"{m[c]:>12.4f}" for c in TABLE_COLUMNS))
    human.append(f"artifacts in {args.out} ({len(written)} files)")
    _emit(
        {"out": str(args.out), "files": [str(p) for p in written], "metadata": report.metadata},
        args.format,
        human,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# report (re-render artifacts from report.json)
# ---------------------------------------------------------------------------

def _report_from_dict(doc):
    forest = []
    for row in doc.get("forest", []):
        ci = None
        if "point" in row:
            ci = ProportionCI(
                point=row["point"], lo=row["lo"], hi=row["hi"],
                replicates=row["replicates"], level=row["level"],
            )
        forest.append(
            audit_mod.ForestDatum(
                determinant=row["determinant"], category=row["category"],
                criterion=row["criterion"], n=row["n"], ci=ci, note=row.get("note", ""),
            )
        )
    return audit_mod.AuditReport(
        metadata=doc["metadata"],
        cohort_stats=tuple(doc["cohort_stats"]),
        whole_metrics=doc["whole_metrics"],
        models=doc["models"],
        test_ids=tuple(doc["test_ids"]),
        test_labels=tuple(bool(v) for v in doc["test_labels"]),
        test_scores=doc["test_scores"],
        subgroup_tests=doc["subgroup_tests"],
        pairwise_tests=doc["pairwise_tests"],
        forest=tuple(forest),
        criteria_prevalence=doc["criteria_prevalence"],
    )


def cmd_report(args):
    path = Path(args.report)
    if not path.is_file():
        return _fail(f"no report file at {path}", EXIT_USAGE)
    try:
        report = _report_from_dict(json.loads(path.read_text()))
    except (KeyError, json.JSONDecodeError) as exc:
        return _fail(f"malformed report: {exc}", EXIT_RUNTIME)
    out = args.out or path.parent
    written = audit_mod.write_report(report, out)
    human = [f"re-rendered {len(written)} artifact files into {out}"]
    sig = []
    for det, by_cat in report.subgroup_tests.items():
        for cat, by_clf in by_cat.items():
            for name, cell in by_clf.items():
                if "p_value" in cell and cell["p_value"] <= 0.05:
                    sig.append((det, cat, name, cell["observed_diff"], cell["p_value"]))
    human.append(f"{len(sig)} significant subgroup-vs-whole cells at p <= 0.05")
    for det, cat, name, diff, p in sig[:20]:
        human.append(f"  {det}/{cat} x {name}: diff={diff:+.4f} p={p:.3f}")
    _emit({"out": str(out), "files": [str(p) for p in written], "significant": len(sig)}, args.format, human)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="sepsisaudit",
        description="Audit ML mortality-prediction performance across social-determinant subgroups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort CSV from a profile")
    p.add_argument("--profile", default="table1", help="shipped profile name or JSON path")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--out", required=True, help="output cohort CSV path")
    p.add_argument("--noise-category", default="", metavar="DET=CAT",
                   help="inject label noise into one subgroup, e.g. race=Asian")
    p.add_argument("--noise-rate", type=float, default=1.0, help="label-noise rate (default 1.0)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("criteria", help="flag a cohort with sepsis criteria")
    p.add_argument("--cohort", required=True, help="cohort CSV path")
    p.add_argument("--rules-dir", default=None, help="criterion JSON directory (default: shipped six)")
    p.add_argument("--code-sets", default=None, help="code-set registry JSON (default: shipped)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--forest", action="store_true", help="also emit forest.csv and forest.svg")
    p.add_argument("--boot", type=int, default=1000, help="bootstrap replicates (default 1000)")
    p.add_argument("--level", type=float, default=0.95, help="CI level (default 0.95)")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed (default 0)")
    p.add_argument("--strict-offset", action="store_true",
                   help="reject rows with suspected-infection offsets outside +/-24 h")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("audit", help="run the full disparity audit")
    p.add_argument("--cohort", required=True, help="cohort CSV path")
    p.add_argument("--criterion", default="sepsis3", help="selection criterion name (default sepsis3)")
    p.add_argument("--rules-dir", default=None, help="criterion JSON directory (default: shipped six)")
    p.add_argument("--split", type=float, default=0.7, help="train fraction (default 0.7)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--perms", type=int, default=1000, help="permutation replicates (default 1000)")
    p.add_argument("--boot", type=int, default=1000, help="bootstrap replicates (default 1000)")
    p.add_argument("--classifiers", default="", help="comma-separated subset (default: all sixteen)")
    p.add_argument("--min-positives", type=int, default=50,
                   help="minimum criterion-positive cohort size (default 50)")
    p.add_argument("--epochs", type=int, default=50, help="epoch budget for online solvers (default 50)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for the permutation sweep")
    p.add_argument("--strict-offset", action="store_true",
                   help="reject rows with suspected-infection offsets outside +/-24 h")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("report", help="re-render artifacts from an existing report.json")
    p.add_argument("--report", required=True, help="path to report.json")
    p.add_argument("--out", default=None, help="output directory (default: alongside the report)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AuditError as exc:
        return _fail(str(exc), EXIT_RUNTIME)


if __name__ == "__main__":
    raise SystemExit(main())
