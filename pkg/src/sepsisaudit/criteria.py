"""Rule engine for named sepsis-identification criteria.

A criterion is a boolean expression over five predicates of a clinical
summary (ICD-9 code-set membership, organ-dysfunction flags, SOFA/SIRS
thresholds, suspected-infection timing) combined with all/any/not. Rules
and the ICD-9 code sets they reference ship as editable JSON files; the
six shipped criteria are explicit, angus, martin, cms, cdc and sepsis3.

Code matching is exact on normalized code strings unless a set entry ends
with ``*``, which matches as a prefix.
"""

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError, UnknownCodeSet

SHIPPED_CRITERIA = ("explicit", "angus", "martin", "cms", "cdc", "sepsis3")


# ---------------------------------------------------------------------------
# Code-set registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodeSet:
    """One named set of ICD-9 codes, split into exact entries and prefixes."""

    name: str
    exact: frozenset
    prefixes: tuple

    def matches(self, codes):
        if self.exact & codes:
            return True
        return any(c.startswith(p) for p in self.prefixes for c in codes)


class CodeSetRegistry:
    def __init__(self, sets):
        self._sets = dict(sets)

    def __contains__(self, name):
        return name in self._sets

    def __getitem__(self, name):
        try:
            return self._sets[name]
        except KeyError:
            raise UnknownCodeSet(f"code set {name!r} not in registry") from None

    def names(self):
        return tuple(sorted(self._sets))


def _build_code_set(name, entries):
    exact, prefixes = set(), []
    for entry in entries:
        entry = str(entry).strip().upper()
        if not entry:
            continue
        if entry.endswith("*"):
            prefixes.append(entry[:-1])
        else:
            exact.add(entry)
    return CodeSet(name=name, exact=frozenset(exact), prefixes=tuple(sorted(prefixes)))


def load_registry(path=None):
    """Code-set registry from JSON (shipped defaults unless a path is given)."""
    if path is None:
        text = resources.files("sepsisaudit.data").joinpath("code_sets.json").read_text()
        source = "<shipped code_sets.json>"
    else:
        source = str(path)
        text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    doc.pop("_comment", None)
    return CodeSetRegistry({name: _build_code_set(name, entries) for name, entries in doc.items()})


# ---------------------------------------------------------------------------
# Rule AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class CodeIn:
    set_name: str
    codes: CodeSet


@dataclass(frozen=True)
class AnyFlagIn:
    flags: frozenset


@dataclass(frozen=True)
class SofaGe:
    k: int


@dataclass(frozen=True)
class SirsGe:
    k: int


@dataclass(frozen=True)
class SuspectedInfectionWithin:
    hours: float


@dataclass(frozen=True)
class SepsisCriterion:
    name: str
    rule: object


def parse_rule(obj, registry, where="rule"):
    """JSON object -> rule AST, resolving code sets against the registry."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ParseError(f"{where}: expected a single-key rule object, got {obj!r}")
    (op, value), = obj.items()
    if op == "all":
        return And(tuple(parse_rule(v, registry, f"{where}.all[{i}]") for i, v in enumerate(value)))
    if op == "any":
        return Or(tuple(parse_rule(v, registry, f"{where}.any[{i}]") for i, v in enumerate(value)))
    if op == "not":
        return Not(parse_rule(value, registry, f"{where}.not"))
    if op == "code_in":
        return CodeIn(set_name=value, codes=registry[value])
    if op == "any_flag_in":
        if not isinstance(value, list):
            raise ParseError(f"{where}: any_flag_in expects a list of flags")
        return AnyFlagIn(frozenset(value))
    if op == "sofa_ge":
        return SofaGe(int(value))
    if op == "sirs_ge":
        return SirsGe(int(value))
    if op == "suspected_infection_within":
        return SuspectedInfectionWithin(float(value))
    raise ParseError(f"{where}: unknown rule operator {op!r}")


def rule_to_json(rule):
    """Rule AST -> JSON object (inverse of parse_rule given the same registry)."""
    if isinstance(rule, And):
        return {"all": [rule_to_json(a) for a in rule.args]}
    if isinstance(rule, Or):
        return {"any": [rule_to_json(a) for a in rule.args]}
    if isinstance(rule, Not):
        return {"not": rule_to_json(rule.arg)}
    if isinstance(rule, CodeIn):
        return {"code_in": rule.set_name}
    if isinstance(rule, AnyFlagIn):
        return {"any_flag_in": sorted(rule.flags)}
    if isinstance(rule, SofaGe):
        return {"sofa_ge": rule.k}
    if isinstance(rule, SirsGe):
        return {"sirs_ge": rule.k}
    if isinstance(rule, SuspectedInfectionWithin):
        return {"suspected_infection_within": rule.hours}
    raise TypeError(f"not a rule node: {rule!r}")


def load_criterion(path, registry):
    """Load one criterion JSON file and validate it against the registry."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or "name" not in doc or "rule" not in doc:
        raise ParseError(f"{path}: criterion needs 'name' and 'rule' fields")
    return SepsisCriterion(name=str(doc["name"]), rule=parse_rule(doc["rule"], registry, f"{path}:rule"))


def shipped_criteria_dir():
    """Filesystem path of the shipped criterion definitions."""
    return Path(str(resources.files("sepsisaudit.data").joinpath("criteria")))


def load_all_criteria(rules_dir=None, registry=None):
    """Load every ``*.json`` criterion in a directory (shipped set by default).

    Criteria are returned in the paper's listing order for the shipped
    names, then alphabetically for any others.
    """
    registry = registry or load_registry()
    rules_dir = Path(rules_dir) if rules_dir is not None else shipped_criteria_dir()
    paths = sorted(rules_dir.glob("*.json"))
    criteria = [load_criterion(p, registry) for p in paths]
    order = {name: i for i, name in enumerate(SHIPPED_CRITERIA)}
    criteria.sort(key=lambda c: (order.get(c.name, len(order)), c.name))
    return criteria


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(criterion_or_rule, summary):
    """Evaluate a criterion (or bare rule node) against a clinical summary."""
    rule = getattr(criterion_or_rule, "rule", criterion_or_rule)
    return _eval(rule, summary)


def _eval(rule, summary):
    if isinstance(rule, And):
        return all(_eval(a, summary) for a in rule.args)
    if isinstance(rule, Or):
        return any(_eval(a, summary) for a in rule.args)
    if isinstance(rule, Not):
        return not _eval(rule.arg, summary)
    if isinstance(rule, CodeIn):
        return rule.codes.matches(summary.icd9_codes)
    if isinstance(rule, AnyFlagIn):
        return bool(rule.flags & summary.organ_dysfunction_flags)
    if isinstance(rule, SofaGe):
        return summary.sofa_24h >= rule.k
    if isinstance(rule, SirsGe):
        return summary.sirs_24h >= rule.k
    if isinstance(rule, SuspectedInfectionWithin):
        offset = summary.suspected_infection_offset_h
        return offset is not None and abs(offset) <= rule.hours
    raise TypeError(f"not a rule node: {rule!r}")


# ---------------------------------------------------------------------------
# Cohort flagging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlagMatrix:
    """Complete boolean matrix of (patient x criterion) evaluations."""

    ids: tuple
    criterion_names: tuple
    values: np.ndarray  # shape (n_patients, n_criteria), bool

    def column(self, criterion_name):
        j = self.criterion_names.index(criterion_name)
        return self.values[:, j]

    def cell(self, patient_id, criterion_name):
        return bool(self.values[self.ids.index(patient_id), self.criterion_names.index(criterion_name)])

    def prevalence(self):
        """Fraction of patients flagged, per criterion name."""
        return {
            name: float(self.values[:, j].mean())
            for j, name in enumerate(self.criterion_names)
        }


def flag_cohort(cohort, criteria):
    """Evaluate every criterion on every patient; order-independent by construction."""
    if not criteria:
        raise ValueError("criteria list must be nonempty")
    values = np.zeros((len(cohort), len(criteria)), dtype=bool)
    for i, record in enumerate(cohort.records):
        for j, criterion in enumerate(criteria):
            values[i, j] = _eval(criterion.rule, record.summary)
    return FlagMatrix(
        ids=cohort.ids(),
        criterion_names=tuple(c.name for c in criteria),
        values=values,
    )
