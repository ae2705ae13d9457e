"""Cohort data model, CSV ingestion, determinant re-leveling, splitting, synthesis.

A cohort is an ordered list of single-admission patient records. Records
arrive either from a CSV file (see ``COHORT_COLUMNS`` for the contract) or
from the seeded synthetic generator. All values are immutable after
construction and safe to share across threads.
"""

import csv
import json
import logging
import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BadProfile, BadRatio, BadValue, DuplicateId, MissingColumn
from .rng import keyed_rng

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Determinant categories
# ---------------------------------------------------------------------------

class Race(str, Enum):
    Asian = "Asian"
    Black = "Black"
    Hispanic = "Hispanic"
    White = "White"
    Other = "Other"


class Gender(str, Enum):
    Female = "Female"
    Male = "Male"


class Marital(str, Enum):
    SignificantOther = "SignificantOther"
    Single = "Single"
    Separated = "Separated"
    Widowed = "Widowed"
    Unknown = "Unknown"


class Insurance(str, Enum):
    Government = "Government"
    Medicaid = "Medicaid"
    Medicare = "Medicare"
    Private = "Private"
    SelfPay = "SelfPay"


class Language(str, Enum):
    English = "English"
    Spanish = "Spanish"
    Other = "Other"


DETERMINANT_ENUMS = {
    "race": Race,
    "gender": Gender,
    "marital": Marital,
    "insurance": Insurance,
    "language": Language,
}
DETERMINANTS = tuple(DETERMINANT_ENUMS)


def categories(determinant):
    """Category value strings of one determinant, in declaration order."""
    return tuple(m.value for m in DETERMINANT_ENUMS[determinant])


# ---------------------------------------------------------------------------
# Record types
# ---------------------------------------------------------------------------

_CODE_RE = re.compile(r"^(\d{3}(\.\d{1,2})?|V\d{2}(\.\d{1,2})?|E\d{3}(\.\d)?)$")


def valid_icd9(code):
    return bool(_CODE_RE.match(code))


@dataclass(frozen=True)
class ClinicalSummary:
    """The clinical facts a sepsis criterion may interrogate."""

    icd9_codes: frozenset
    suspected_infection_offset_h: float | None
    sofa_24h: int
    sirs_24h: int
    organ_dysfunction_flags: frozenset

    def __post_init__(self):
        if not 0 <= self.sofa_24h <= 24:
            raise BadValue(f"sofa_24h {self.sofa_24h} outside [0, 24]")
        if not 0 <= self.sirs_24h <= 4:
            raise BadValue(f"sirs_24h {self.sirs_24h} outside [0, 4]")
        for code in self.icd9_codes:
            if not valid_icd9(code):
                raise BadValue(f"malformed ICD-9 code {code!r}")


@dataclass(frozen=True)
class Determinants:
    race: Race
    gender: Gender
    marital: Marital
    insurance: Insurance
    language: Language

    def category(self, determinant):
        """Category value string for one determinant name."""
        return getattr(self, determinant).value


@dataclass(frozen=True)
class PatientRecord:
    id: str
    age_years: float
    summary: ClinicalSummary
    determinants: Determinants
    died_in_hospital: bool

    def __post_init__(self):
        if self.age_years < 18:
            raise BadValue(f"record {self.id}: age {self.age_years} below 18")


@dataclass(frozen=True)
class Cohort:
    records: tuple
    provenance: str = ""

    def __post_init__(self):
        if not self.records:
            raise BadValue("cohort must be nonempty")
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise DuplicateId(f"duplicate record id {r.id!r}")
            seen.add(r.id)

    def __len__(self):
        return len(self.records)

    def ids(self):
        return tuple(r.id for r in self.records)


def feature_matrix(records):
    """(n, 3) float matrix of the model features (sofa, sirs, age)."""
    return np.array(
        [[r.summary.sofa_24h, r.summary.sirs_24h, r.age_years] for r in records],
        dtype=float,
    )


def outcome_vector(records):
    return np.array([r.died_in_hospital for r in records], dtype=bool)


# ---------------------------------------------------------------------------
# Determinant re-leveling
# ---------------------------------------------------------------------------

def _normalize_raw(value):
    return " ".join(str(value).upper().split())


def load_relevel_table(path=None):
    """Raw-string mapping table; shipped defaults unless a path is given."""
    if path is None:
        text = resources.files("sepsisaudit.data").joinpath("relevel.json").read_text()
    else:
        text = Path(path).read_text()
    table = json.loads(text)
    table.pop("_comment", None)
    return table


_DEFAULT_RELEVEL = None


def _default_relevel():
    global _DEFAULT_RELEVEL
    if _DEFAULT_RELEVEL is None:
        _DEFAULT_RELEVEL = load_relevel_table()
    return _DEFAULT_RELEVEL


def _map_raw(determinant, raw, table):
    mapping = table[determinant]
    norm = _normalize_raw(raw)
    if norm in mapping:
        return mapping[norm]
    # prefix rules: longest prefix wins
    best = None
    for key, target in mapping.items():
        if key.endswith("*") and norm.startswith(key[:-1]):
            if best is None or len(key) > len(best[0]):
                best = (key, target)
    if best is not None:
        return best[1]
    if "_default" in mapping:
        return mapping["_default"]
    raise BadValue(f"unmapped {determinant} string {raw!r}")


def relevel_determinants(raw, table=None):
    """Map raw determinant strings onto the five canonical categories.

    ``raw`` must provide the keys race, gender, marital, insurance and
    language. Unmatched race/language strings fall into Other and
    unmatched marital strings into Unknown; gender and insurance have no
    catch-all and raise BadValue. Already-canonical values map to
    themselves.
    """
    table = table or _default_relevel()
    missing = [k for k in DETERMINANTS if k not in raw]
    if missing:
        raise BadValue(f"raw determinant map missing keys {missing}")
    values = {}
    for det in DETERMINANTS:
        mapped = _map_raw(det, raw[det], table)
        enum = DETERMINANT_ENUMS[det]
        try:
            values[det] = enum(mapped)
        except ValueError:
            raise BadValue(
                f"relevel table maps {raw[det]!r} to {mapped!r}, "
                f"not a {det} category"
            ) from None
    return Determinants(**values)


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

COHORT_COLUMNS = (
    "id",
    "age",
    "sofa_24h",
    "sirs_24h",
    "icd9_codes",
    "suspected_infection_offset_h",
    "organ_dysfunction_flags",
    "race",
    "gender",
    "marital",
    "insurance",
    "language",
    "died_in_hospital",
)

# marital may be blank (maps to Unknown); list fields and the offset may be empty
_REQUIRED_NONEMPTY = (
    "id",
    "age",
    "sofa_24h",
    "sirs_24h",
    "race",
    "gender",
    "insurance",
    "language",
    "died_in_hospital",
)

OFFSET_WINDOW_H = 24.0


@dataclass(frozen=True)
class RowRejection:
    """One row excluded by a selection filter; row numbers count the header as 1."""

    row: int
    record_id: str
    reason: str


def _parse_float(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise BadValue(f"not a number: {text!r}", row=row, col=col) from None


def _parse_int(text, row, col):
    try:
        return int(text)
    except ValueError:
        raise BadValue(f"not an integer: {text!r}", row=row, col=col) from None


def _parse_bool(text, row, col):
    if text == "0":
        return False
    if text == "1":
        return True
    raise BadValue(f"expected 0 or 1: {text!r}", row=row, col=col)


def _split_listfield(text):
    return tuple(item.strip() for item in text.split(";") if item.strip())


def parse_cohort(csv_path, strict_offset=False, relevel_table=None, rejects=None):
    """Read a cohort CSV, applying the selection filters as validation.

    Rows failing a selection filter (age below 18, a missing required
    field, or a suspected-infection offset outside the +/-24 h window when
    ``strict_offset`` is set) are excluded and reported with their row
    number via the ``rejects`` list (if given) and the module logger.
    Structural problems raise: MissingColumn for absent header columns,
    BadValue naming (row, column) for malformed values, DuplicateId for
    repeated ids.
    """
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise BadValue(f"cohort file not found: {csv_path}")
    records = []
    seen = set()
    with csv_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise MissingColumn(f"{csv_path}: empty file, no header row")
        missing = [c for c in COHORT_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{csv_path}: missing column(s) {missing}")

        for rownum, row in enumerate(reader, start=2):
            record, rejection = _parse_row(row, rownum, strict_offset, relevel_table)
            if rejection is not None:
                if rejects is not None:
                    rejects.append(rejection)
                log.warning("row %d rejected: %s", rejection.row, rejection.reason)
                continue
            if record.id in seen:
                raise DuplicateId(f"duplicate id {record.id!r} at row {rownum}")
            seen.add(record.id)
            records.append(record)
    if not records:
        raise BadValue(f"{csv_path}: no records survived the selection filters")
    return Cohort(records=tuple(records), provenance=str(csv_path))


def _parse_row(row, rownum, strict_offset, relevel_table):
    for col in _REQUIRED_NONEMPTY:
        if not (row.get(col) or "").strip():
            return None, RowRejection(rownum, row.get("id") or "?", f"missing required field {col!r}")

    rid = row["id"].strip()
    age = _parse_float(row["age"], rownum, "age")
    if age < 18:
        return None, RowRejection(rownum, rid, f"nonadult (age {age:g})")

    offset_text = (row.get("suspected_infection_offset_h") or "").strip()
    offset = None
    if offset_text:
        offset = _parse_float(offset_text, rownum, "suspected_infection_offset_h")
        if strict_offset and abs(offset) > OFFSET_WINDOW_H:
            return None, RowRejection(
                rownum, rid, f"suspected-infection offset {offset:g} h outside +/-{OFFSET_WINDOW_H:g} h"
            )

    try:
        summary = ClinicalSummary(
            icd9_codes=frozenset(_split_listfield(row["icd9_codes"])),
            suspected_infection_offset_h=offset,
            sofa_24h=_parse_int(row["sofa_24h"], rownum, "sofa_24h"),
            sirs_24h=_parse_int(row["sirs_24h"], rownum, "sirs_24h"),
            organ_dysfunction_flags=frozenset(_split_listfield(row["organ_dysfunction_flags"])),
        )
        determinants = relevel_determinants(
            {det: row[det] for det in DETERMINANTS}, table=relevel_table
        )
        record = PatientRecord(
            id=rid,
            age_years=age,
            summary=summary,
            determinants=determinants,
            died_in_hospital=_parse_bool(row["died_in_hospital"].strip(), rownum, "died_in_hospital"),
        )
    except BadValue as exc:
        if exc.row is None:
            raise BadValue(str(exc), row=rownum) from None
        raise
    return record, None


def write_cohort(cohort, csv_path):
    """Write a cohort in the canonical CSV form (parse_cohort round-trips it)."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COHORT_COLUMNS)
        for r in cohort.records:
            s = r.summary
            offset = "" if s.suspected_infection_offset_h is None else repr(s.suspected_infection_offset_h)
            writer.writerow(
                [
                    r.id,
                    repr(r.age_years),
                    s.sofa_24h,
                    s.sirs_24h,
                    ";".join(sorted(s.icd9_codes)),
                    offset,
                    ";".join(sorted(s.organ_dysfunction_flags)),
                    r.determinants.race.value,
                    r.determinants.gender.value,
                    r.determinants.marital.value,
                    r.determinants.insurance.value,
                    r.determinants.language.value,
                    int(r.died_in_hospital),
                ]
            )
    return csv_path


# ---------------------------------------------------------------------------
# Train/test split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitAssignment:
    train_ids: frozenset
    test_ids: frozenset
    ratio: float
    seed: int

    def train_mask(self, records):
        return np.array([r.id in self.train_ids for r in records], dtype=bool)


def split(cohort, ratio, seed):
    """Seeded uniform random partition of a cohort into train/test ids.

    The permutation comes from a Fisher-Yates shuffle driven by a Philox
    counter-based generator keyed on ``seed``, so the assignment is a pure
    function of (cohort order, ratio, seed) on every platform. The train
    side receives ``round(n * ratio)`` records.
    """
    if not 0 < ratio < 1:
        raise BadRatio(f"ratio {ratio} outside (0, 1)")
    n = len(cohort)
    rng = keyed_rng("sepsisaudit.cohort.split", seed)
    perm = rng.permutation(n)
    n_train = int(np.floor(n * ratio + 0.5))
    ids = cohort.ids()
    train = frozenset(ids[i] for i in perm[:n_train])
    test = frozenset(ids[i] for i in perm[n_train:])
    if not test:
        warnings.warn(f"split of {n} record(s) at ratio {ratio} left the test side empty")
    return SplitAssignment(train_ids=train, test_ids=test, ratio=ratio, seed=seed)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

_BACKGROUND_FLAG_ORDER = ("mechanical_ventilation", "vasopressor", "acute_kidney_injury")


@dataclass(frozen=True)
class GeneratorProfile:
    """Validated synthetic-cohort recipe (see profile JSON schema in README)."""

    name: str
    marginals: dict
    age: dict
    sofa: dict
    sirs: dict
    suspected_infection: dict
    criteria_rates: dict
    background: dict
    mortality: dict
    subgroup_label_noise: tuple = field(default=())

    @classmethod
    def from_dict(cls, doc):
        try:
            profile = cls(
                name=doc.get("name", "unnamed"),
                marginals=doc["determinants"],
                age=doc["age"],
                sofa=doc["sofa"],
                sirs=doc["sirs"],
                suspected_infection=doc["suspected_infection"],
                criteria_rates=doc.get("criteria_rates", {}),
                background=doc.get("background", {}),
                mortality=doc["mortality"],
                subgroup_label_noise=tuple(
                    (d["determinant"], d["category"], float(d["rate"]))
                    for d in doc.get("subgroup_label_noise", [])
                ),
            )
        except KeyError as exc:
            raise BadProfile(f"profile missing field {exc}") from None
        profile.validate()
        return profile

    def validate(self):
        for det in DETERMINANTS:
            if det not in self.marginals:
                raise BadProfile(f"no marginals for determinant {det!r}")
            cats = categories(det)
            given = self.marginals[det]
            unknown = set(given) - set(cats)
            if unknown:
                raise BadProfile(f"{det} marginals name unknown categories {sorted(unknown)}")
            probs = [float(given.get(c, 0.0)) for c in cats]
            if any(p < 0 for p in probs):
                raise BadProfile(f"{det} marginals contain a negative probability")
            if abs(sum(probs) - 1.0) > 1e-9:
                raise BadProfile(f"{det} marginals sum to {sum(probs)}, not 1")
        for field_name in ("intercept", "sofa", "sirs", "age"):
            if field_name not in self.mortality:
                raise BadProfile(f"mortality model missing coefficient {field_name!r}")
        for det, cat, rate in self.subgroup_label_noise:
            if det not in DETERMINANTS or cat not in categories(det):
                raise BadProfile(f"label-noise rule names unknown group {det}={cat}")
            if not 0.0 <= rate <= 1.0:
                raise BadProfile(f"label-noise rate {rate} outside [0, 1]")

    def with_label_noise(self, determinant, category, rate=1.0):
        """Copy of this profile with one label-noise rule appended."""
        noise = self.subgroup_label_noise + ((determinant, category, float(rate)),)
        return GeneratorProfile(
            name=self.name,
            marginals=self.marginals,
            age=self.age,
            sofa=self.sofa,
            sirs=self.sirs,
            suspected_infection=self.suspected_infection,
            criteria_rates=self.criteria_rates,
            background=self.background,
            mortality=self.mortality,
            subgroup_label_noise=noise,
        )


def load_profile(name_or_path):
    """Load a generator profile: a shipped name (e.g. 'table1') or a JSON path."""
    shipped = resources.files("sepsisaudit.data").joinpath("profiles").joinpath(f"{name_or_path}.json")
    if shipped.is_file():
        doc = json.loads(shipped.read_text())
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise BadProfile(f"no shipped profile or file named {name_or_path!r}")
        doc = json.loads(path.read_text())
    return GeneratorProfile.from_dict(doc)


def mortality_probability(profile, sofa, sirs, age):
    """In-hospital mortality probability under a profile's logistic model.

    Features enter scaled to [0, 1] by their profile ranges: sofa/trials,
    sirs/trials, (age - min) / (max - min).
    """
    m = profile.mortality
    sofa = np.asarray(sofa, dtype=float) / float(profile.sofa["trials"])
    sirs = np.asarray(sirs, dtype=float) / float(profile.sirs["trials"])
    lo, hi = float(profile.age["min"]), float(profile.age["max"])
    age = (np.asarray(age, dtype=float) - lo) / (hi - lo)
    eta = m["intercept"] + m["sofa"] * sofa + m["sirs"] * sirs + m["age"] * age
    return 1.0 / (1.0 + np.exp(-eta))


_PLANT_CODES = {
    # criterion knob -> codes planted when the knob fires (explicit picks one of two)
    "explicit": ("995.92", "785.52"),
    "martin": ("038.9",),
    "angus": ("486", "584.9"),
    "cms": ("995.91",),
    "cdc": ("599.0",),
}
_PLANT_FLAGS = {"cdc": ("vasopressor",)}


def generate_cohort(profile, n, seed):
    """Draw a seeded synthetic cohort from a generator profile.

    Determinants are independent draws from the profile marginals; SOFA,
    SIRS and age come from the profile distributions; the outcome follows
    the profile's logistic model on the scaled features, optionally
    overridden by per-subgroup label noise (feature-independent outcome at
    the cohort's mean model risk) for planted-disparity experiments.
    All randomness flows from one Philox stream keyed on ``seed`` in a
    fixed draw order, so output is bit-reproducible.
    """
    if n < 1:
        raise BadProfile(f"cohort size {n} must be at least 1")
    rng = keyed_rng("sepsisaudit.cohort.generate", seed)

    det_draws = {}
    for det in DETERMINANTS:  # fixed order
        cats = categories(det)
        probs = np.array([float(profile.marginals[det].get(c, 0.0)) for c in cats])
        probs = probs / probs.sum()
        det_draws[det] = rng.choice(len(cats), size=n, p=probs)

    age = np.clip(
        rng.normal(float(profile.age["mean"]), float(profile.age["sd"]), n),
        float(profile.age["min"]),
        float(profile.age["max"]),
    )
    sofa = rng.binomial(int(profile.sofa["trials"]), float(profile.sofa["p"]), n)
    sirs = rng.binomial(int(profile.sirs["trials"]), float(profile.sirs["p"]), n)

    susp = profile.suspected_infection
    has_infection = rng.random(n) < float(susp["rate"])
    window = float(susp.get("window_h", OFFSET_WINDOW_H))
    offsets = rng.uniform(-window, window, n)

    plants = {}
    for crit in sorted(_PLANT_CODES):  # fixed order
        rate = float(profile.criteria_rates.get(crit, 0.0))
        plants[crit] = rng.random(n) < rate
    explicit_coin = rng.random(n) < 0.5

    bg = profile.background
    bg_codes = list(bg.get("comorbidity_codes", ()))
    max_bg = int(bg.get("max_comorbidities", 0))
    if bg_codes and max_bg > 0:
        bg_counts = rng.integers(0, max_bg + 1, n)
        bg_order = np.argsort(rng.random((n, len(bg_codes))), axis=1)
    else:
        bg_counts = np.zeros(n, dtype=int)
        bg_order = None
    flag_rates = bg.get("flag_rates", {})
    flag_draws = {
        name: rng.random(n) < float(flag_rates[name])
        for name in _BACKGROUND_FLAG_ORDER
        if name in flag_rates
    }

    risk = mortality_probability(profile, sofa, sirs, age)
    died = rng.random(n) < risk

    # label noise: replace the outcome with a feature-independent draw at the
    # cohort's mean model risk for records in the configured subgroups
    base_rate = float(risk.mean())
    for det, cat, rate in profile.subgroup_label_noise:
        member = np.array(
            [categories(det)[det_draws[det][i]] == cat for i in range(n)], dtype=bool
        )
        hit = member & (rng.random(n) < rate)
        independent = rng.random(n) < base_rate
        died = np.where(hit, independent, died)

    width = max(6, len(str(n)))
    records = []
    for i in range(n):
        codes = set()
        for crit in sorted(_PLANT_CODES):
            if plants[crit][i]:
                options = _PLANT_CODES[crit]
                if crit == "explicit":
                    codes.add(options[0] if explicit_coin[i] else options[1])
                else:
                    codes.update(options)
        if bg_order is not None:
            for j in range(bg_counts[i]):
                codes.add(bg_codes[bg_order[i, j]])
        flags = {name for name, hits in flag_draws.items() if hits[i]}
        for crit, plant_flags in _PLANT_FLAGS.items():
            if plants[crit][i]:
                flags.update(plant_flags)
        determinants = Determinants(
            **{det: DETERMINANT_ENUMS[det](categories(det)[det_draws[det][i]]) for det in DETERMINANTS}
        )
        records.append(
            PatientRecord(
                id=f"P{i:0{width}d}",
                age_years=float(age[i]),
                summary=ClinicalSummary(
                    icd9_codes=frozenset(codes),
                    suspected_infection_offset_h=float(offsets[i]) if has_infection[i] else None,
                    sofa_24h=int(sofa[i]),
                    sirs_24h=int(sirs[i]),
                    organ_dysfunction_flags=frozenset(flags),
                ),
                determinants=determinants,
                died_in_hospital=bool(died[i]),
            )
        )
    return Cohort(
        records=tuple(records),
        provenance=f"generate_cohort(profile={profile.name}, n={n}, seed={seed})",
    )
