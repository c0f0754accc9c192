"""Patient grouping by ICD code and NLP status, derived clinical variables and
the group-comparison tables (demographics, comorbidities, note profiles)."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cascade import POSITIVE, PatientNlpStatus, SnippetClassification
from .corpus import (
    ETHNICITIES,
    GENDERS,
    MARITAL_STATUSES,
    RACES,
    Corpus,
    DiagnosisRecord,
)
from .stats import IMBALANCE_THRESHOLD, UndefinedStatistic, asd_binary, asd_continuous, chi_square_test, format_p, welch_t_test

logger = logging.getLogger(__name__)

ALL_ICD = "AllIcd"
NLP_ONLY = "NlpOnly"
NO_PROBLEMATIC = "NoProblematic"
NLP_ICD = "NlpIcd"
GROUPS = (ALL_ICD, NLP_ONLY, NO_PROBLEMATIC)
COMPARISONS = ((ALL_ICD, NLP_ONLY), (NLP_ONLY, NO_PROBLEMATIC))

COMORBIDITIES = (
    "hypertension",
    "diabetes_mellitus",
    "depression",
    "ptsd",
    "cancer",
    "tobacco",
    "alcohol",
    "other_drug_addictions",
    "traumatic_brain_injury",
    "anxiety",
    "neck_pain",
    "back_pain",
)

ENCOUNTER_ORIGINS = ("index", "entry")


@dataclass(frozen=True)
class IcdCodeSet:
    icd9_exact: frozenset = frozenset({"304.00", "304.70", "305.50"})
    icd10_prefixes: frozenset = frozenset({"F11"})

    def __post_init__(self):
        if not (self.icd9_exact or self.icd10_prefixes):
            raise ValueError("code set is empty")

    def matches(self, code_system: str, code: str) -> bool:
        code = code.strip().upper()
        if code_system == "ICD9":
            return code in self.icd9_exact
        if code_system == "ICD10":
            return any(code.startswith(p.upper()) for p in self.icd10_prefixes)
        return False


def flag_icd_oud(diagnoses: Iterable[DiagnosisRecord], codes: IcdCodeSet = IcdCodeSet(),
                 window: tuple[dt.date, dt.date] | None = None) -> dict[str, dt.date]:
    """First qualifying OUD diagnosis date per flagged patient; unflagged patients are absent."""
    first: dict[str, dt.date] = {}
    for d in diagnoses:
        if window and not window[0] <= d.diagnosis_date <= window[1]:
            continue
        if codes.matches(d.code_system, d.code):
            prev = first.get(d.patient_id)
            if prev is None or d.diagnosis_date < prev:
                first[d.patient_id] = d.diagnosis_date
    return first


@dataclass(frozen=True)
class GroupAssignment:
    patient_id: str
    group: str
    nlp_icd_member: bool
    index_date: dt.date | None

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "group": self.group,
            "nlp_icd_member": self.nlp_icd_member,
            "index_date": self.index_date.isoformat() if self.index_date else None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GroupAssignment":
        d = obj.get("index_date")
        return cls(obj["patient_id"], obj["group"], bool(obj["nlp_icd_member"]),
                   dt.date.fromisoformat(d) if d else None)


def assign_groups(patient_ids: Iterable[str], statuses: Mapping[str, PatientNlpStatus] | Iterable[PatientNlpStatus],
                  icd_flags: Mapping[str, dt.date]) -> list[GroupAssignment]:
    """All ICD if coded (whatever the notes say), NLP Only if notes-positive and uncoded, else neither."""
    if not isinstance(statuses, Mapping):
        statuses = {s.patient_id: s for s in statuses}
    ids = sorted(set(patient_ids))
    known = set(ids)
    stray = (set(statuses) | set(icd_flags)) - known
    if stray:
        raise ValueError(f"statuses/flags reference unknown patients, e.g. {sorted(stray)[:3]}")
    out = []
    for pid in ids:
        status = statuses.get(pid)
        nlp = status is not None and status.nlp_positive
        icd_date = icd_flags.get(pid)
        dates = [d for d in (icd_date, status.first_positive_date if nlp else None) if d is not None]
        if icd_date is not None:
            out.append(GroupAssignment(pid, ALL_ICD, nlp, min(dates)))
        elif nlp:
            out.append(GroupAssignment(pid, NLP_ONLY, False, min(dates)))
        else:
            out.append(GroupAssignment(pid, NO_PROBLEMATIC, False, None))
    return out


def group_sizes(assignments: Sequence[GroupAssignment]) -> dict[str, int]:
    counts = Counter(a.group for a in assignments)
    return {g: counts.get(g, 0) for g in GROUPS} | {NLP_ICD: sum(a.nlp_icd_member for a in assignments)}


# ---------------------------------------------------------------------------
# derived variables

@dataclass(frozen=True)
class ComorbidityMap:
    prefixes: Mapping[str, tuple[tuple[str, str], ...]]  # variable -> ((code_system, prefix), ...)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.prefixes)

    def matches(self, variable: str, code_system: str, code: str) -> bool:
        code = code.strip().upper()
        return any(cs == code_system and code.startswith(p) for cs, p in self.prefixes[variable])


def load_comorbidity_map(path=None) -> ComorbidityMap:
    if path is None:
        text = resources.files("opioid_nlp").joinpath("data/comorbidity_map.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) != 3 or parts[1] not in ("ICD9", "ICD10") or not parts[2]:
            raise ValueError(f"comorbidity map line {lineno}: expected 'variable<TAB>ICD9|ICD10<TAB>prefix'")
        entries.setdefault(parts[0], []).append((parts[1], parts[2].upper()))
    if not entries:
        raise ValueError("comorbidity map is empty")
    return ComorbidityMap({k: tuple(v) for k, v in entries.items()})


@dataclass(frozen=True)
class PatientVariables:
    patient_id: str
    group: str
    age_at_entry: int
    gender: str
    marital_status: str
    race: str
    ethnicity: str
    comorbidities: Mapping[str, bool]
    prior_opioid_rx: bool
    concurrent_benzo: bool
    outpatient_encounters: int
    encounter_origin: str
    origin_fallback: bool = False

    def value(self, name: str):
        if name in self.comorbidities:
            return self.comorbidities[name]
        return getattr(self, name)


def _overlaps(a_start, a_end, b_start, b_end, pad: dt.timedelta) -> bool:
    return a_start - pad <= b_end and b_start <= a_end + pad


def derive_variables(corpus: Corpus, assignments: Sequence[GroupAssignment], comorbidity_map: ComorbidityMap,
                     encounter_origin: str = "index", concurrent_window_days: int = 0) -> list[PatientVariables]:
    """Per-patient demographics, comorbidity flags, prescription flags and encounter counts.

    Patients without an index date have prescriptions judged against the end
    of the study window and encounters counted from cohort entry; the latter
    sets ``origin_fallback`` when index-date origin was requested.
    """
    if encounter_origin not in ENCOUNTER_ORIGINS:
        raise ValueError(f"encounter_origin must be one of {ENCOUNTER_ORIGINS}")
    patients = corpus.patient_index()
    dx = corpus.by_patient("diagnoses")
    rx = corpus.by_patient("prescriptions")
    enc = corpus.by_patient("encounters")
    window_end = corpus.study_window[1]
    pad = dt.timedelta(days=concurrent_window_days)
    out = []
    for a in assignments:
        p = patients.get(a.patient_id)
        if p is None:
            raise ValueError(f"assignment for unknown patient {a.patient_id!r}")
        comorb = {}
        for var in comorbidity_map.variables:
            comorb[var] = any(
                d.diagnosis_date >= p.cohort_entry_date and comorbidity_map.matches(var, d.code_system, d.code)
                for d in dx.get(a.patient_id, ())
            )
        scripts = rx.get(a.patient_id, ())
        opioids = [r for r in scripts if r.drug_class == "Opioid"]
        benzos = [r for r in scripts if r.drug_class == "Benzodiazepine"]
        reference = a.index_date if a.index_date is not None else window_end + dt.timedelta(days=1)
        prior = any(r.start_date < reference for r in opioids)
        concurrent = any(
            _overlaps(b.start_date, b.end_date, o.start_date, o.end_date, pad) for b in benzos for o in opioids
        )
        fallback = False
        if encounter_origin == "index" and a.index_date is not None:
            days = {e.encounter_date for e in enc.get(a.patient_id, ())
                    if e.setting == "Outpatient" and a.index_date < e.encounter_date <= window_end}
        else:
            fallback = encounter_origin == "index"
            days = {e.encounter_date for e in enc.get(a.patient_id, ())
                    if e.setting == "Outpatient" and p.cohort_entry_date <= e.encounter_date <= window_end}
        out.append(PatientVariables(
            patient_id=a.patient_id,
            group=a.group,
            age_at_entry=p.age_at_entry,
            gender=p.gender,
            marital_status=p.marital_status,
            race=p.race,
            ethnicity=p.ethnicity,
            comorbidities=comorb,
            prior_opioid_rx=prior,
            concurrent_benzo=concurrent,
            outpatient_encounters=len(days),
            encounter_origin="entry" if fallback or encounter_origin == "entry" else "index",
            origin_fallback=fallback,
        ))
    return out


# ---------------------------------------------------------------------------
# comparison tables

@dataclass(frozen=True)
class ComparisonRow:
    variable: str
    level: str | None
    kind: str  # "proportion" or "mean_sd"
    group_a: str
    group_b: str
    summary_a: tuple  # (proportion,) or (mean, sd)
    summary_b: tuple
    p_value: float | None
    asd_percent: float | None

    @property
    def imbalanced(self) -> bool:
        return self.asd_percent is not None and self.asd_percent > IMBALANCE_THRESHOLD


TABLE4_CATEGORICAL = (("gender", GENDERS), ("marital_status", MARITAL_STATUSES), ("race", RACES),
                      ("ethnicity", ETHNICITIES))


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatistic:
        return None


def _continuous_row(name, a_name, b_name, xa, xb, equal_var=False) -> ComparisonRow:
    ma, sa = _mean_sd(xa)
    mb, sb = _mean_sd(xb)
    p = None
    if len(xa) >= 2 and len(xb) >= 2:
        res = _safe(lambda: welch_t_test(ma, sa, len(xa), mb, sb, len(xb), equal_var=equal_var))
        p = res[2] if res else None
    return ComparisonRow(name, None, "mean_sd", a_name, b_name, (ma, sa), (mb, sb), p, _safe(asd_continuous, ma, sa, mb, sb))


def _categorical_rows(name, levels, a_name, b_name, xa, xb) -> list[ComparisonRow]:
    ca, cb = Counter(xa), Counter(xb)
    kept = [lv for lv in levels if ca[lv] + cb[lv] > 0]
    p = None
    if len(kept) >= 2:
        res = _safe(chi_square_test, [[ca[lv] for lv in kept], [cb[lv] for lv in kept]])
        p = res[2] if res else None
    rows = []
    for lv in levels:
        pa, pb = ca[lv] / len(xa), cb[lv] / len(xb)
        rows.append(ComparisonRow(name, str(lv), "proportion", a_name, b_name, (pa,), (pb,), p, _safe(asd_binary, pa, pb)))
    return rows


def _binary_row(name, a_name, b_name, xa, xb) -> ComparisonRow:
    ka, kb = sum(map(bool, xa)), sum(map(bool, xb))
    res = _safe(chi_square_test, [[ka, len(xa) - ka], [kb, len(xb) - kb]])
    pa, pb = ka / len(xa), kb / len(xb)
    return ComparisonRow(name, None, "proportion", a_name, b_name, (pa,), (pb,), res[2] if res else None,
                         _safe(asd_binary, pa, pb))


def compare_groups(variables: Sequence[PatientVariables], a_name: str, b_name: str,
                   equal_var: bool = False) -> dict[str, list[ComparisonRow]]:
    """Demographic (table4) and clinical (table5) comparison rows for one pair of groups."""
    a = [v for v in variables if v.group == a_name]
    b = [v for v in variables if v.group == b_name]
    if not a or not b:
        empty = a_name if not a else b_name
        raise ValueError(f"group {empty} is empty")
    t4 = []
    t4 += _categorical_rows("gender", GENDERS, a_name, b_name, [v.gender for v in a], [v.gender for v in b])
    t4.append(_continuous_row("age_at_entry", a_name, b_name, [v.age_at_entry for v in a],
                              [v.age_at_entry for v in b], equal_var))
    for name, levels in TABLE4_CATEGORICAL[1:]:
        t4 += _categorical_rows(name, levels, a_name, b_name, [getattr(v, name) for v in a],
                                [getattr(v, name) for v in b])
    t5 = []
    comorb_names = list(a[0].comorbidities)
    for name in comorb_names + ["prior_opioid_rx", "concurrent_benzo"]:
        t5.append(_binary_row(name, a_name, b_name, [v.value(name) for v in a], [v.value(name) for v in b]))
    t5.append(_continuous_row("outpatient_encounters", a_name, b_name, [v.outpatient_encounters for v in a],
                              [v.outpatient_encounters for v in b], equal_var))
    return {"table4": t4, "table5": t5}


def build_comparison_tables(variables: Sequence[PatientVariables], assignments: Sequence[GroupAssignment] | None = None,
                            equal_var: bool = False) -> dict[str, dict[tuple[str, str], list[ComparisonRow]]]:
    """Both comparisons: All ICD vs NLP Only, and NLP Only vs No Problematic."""
    if assignments is not None:
        groups = {a.patient_id: a.group for a in assignments}
        mismatched = [v.patient_id for v in variables if groups.get(v.patient_id) != v.group]
        if mismatched:
            raise ValueError(f"variables disagree with assignments for {mismatched[:3]}")
    tables: dict = {"table4": {}, "table5": {}}
    for a_name, b_name in COMPARISONS:
        res = compare_groups(variables, a_name, b_name, equal_var)
        for key in tables:
            tables[key][(a_name, b_name)] = res[key]
    return tables


def _fmt_summary(row: ComparisonRow, which: str) -> str:
    s = row.summary_a if which == "a" else row.summary_b
    if row.kind == "mean_sd":
        return f"{s[0]:.1f}/{s[1]:.1f}"
    return f"{100 * s[0]:.1f}%"


def _fmt_asd(x: float | None) -> str:
    return "NA" if x is None else f"{x:.1f}"


def write_comparison_csv(path, pairs: Mapping[tuple[str, str], list[ComparisonRow]], sizes: Mapping[str, int]) -> None:
    """Wide layout: one line per variable/level with both comparisons side by side."""
    (first, second) = COMPARISONS
    rows_1 = pairs[first]
    rows_2 = {(r.variable, r.level): r for r in pairs[second]}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "level", ALL_ICD, NLP_ONLY, f"p_{ALL_ICD}_vs_{NLP_ONLY}", f"asd_{ALL_ICD}_vs_{NLP_ONLY}",
                    "imbalanced_1", NO_PROBLEMATIC, f"p_{NLP_ONLY}_vs_{NO_PROBLEMATIC}",
                    f"asd_{NLP_ONLY}_vs_{NO_PROBLEMATIC}", "imbalanced_2"])
        w.writerow(["N", "", sizes.get(ALL_ICD, 0), sizes.get(NLP_ONLY, 0), "", "", "", sizes.get(NO_PROBLEMATIC, 0),
                    "", "", ""])
        for r1 in rows_1:
            r2 = rows_2[(r1.variable, r1.level)]
            w.writerow([r1.variable, r1.level or "", _fmt_summary(r1, "a"), _fmt_summary(r1, "b"), format_p(r1.p_value),
                        _fmt_asd(r1.asd_percent), int(r1.imbalanced), _fmt_summary(r2, "b"), format_p(r2.p_value),
                        _fmt_asd(r2.asd_percent), int(r2.imbalanced)])


# ---------------------------------------------------------------------------
# positive-note profiles and note-type rankings

@dataclass
class GroupNoteProfile:
    group: str
    patients: int
    drug_name_patients: int
    other_phrase_patients: int
    mean_positive_snippets: float
    sd_positive_snippets: float
    note_types: list[tuple[int, str, int]] = field(default_factory=list)


def positive_note_profile(statuses: Iterable[PatientNlpStatus], classifications: Iterable[SnippetClassification],
                          assignments: Sequence[GroupAssignment], top_k: int = 25) -> dict[str, GroupNoteProfile]:
    """Profiles for NLP Only patients and All ICD patients with positive notes (NLP/ICD)."""
    membership = {}
    for a in assignments:
        if a.group == NLP_ONLY:
            membership[a.patient_id] = NLP_ONLY
        elif a.nlp_icd_member:
            membership[a.patient_id] = NLP_ICD
    status_by_id = {s.patient_id: s for s in statuses}
    positive_notes: dict[str, dict[str, str]] = defaultdict(dict)  # group -> note_id -> note_type
    for c in classifications:
        group = membership.get(c.snippet.patient_id)
        if group and c.label == POSITIVE:
            positive_notes[group][c.snippet.note_id] = c.snippet.note_type
    profiles = {}
    for group in (NLP_ONLY, NLP_ICD):
        members = [status_by_id[p] for p, g in membership.items() if g == group and p in status_by_id]
        members = [s for s in members if s.nlp_positive]
        counts = [s.positive_snippet_count for s in members]
        mean, sd = _mean_sd(counts) if counts else (0.0, 0.0)
        tally = Counter(positive_notes[group].values())
        ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        profiles[group] = GroupNoteProfile(
            group=group,
            patients=len(members),
            drug_name_patients=sum(s.drug_name_positive for s in members),
            other_phrase_patients=sum(s.other_phrase_positive for s in members),
            mean_positive_snippets=mean,
            sd_positive_snippets=sd,
            note_types=[(i + 1, t, n) for i, (t, n) in enumerate(ranked)],
        )
    return profiles


def write_profile_csvs(directory, profiles: Mapping[str, GroupNoteProfile]) -> list[Path]:
    directory = Path(directory)
    paths = [directory / "table6.csv"]
    with open(paths[0], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "patients", "drug_name_patients", "other_phrase_patients",
                    "mean_positive_snippets", "sd_positive_snippets"])
        for p in profiles.values():
            w.writerow([p.group, p.patients, p.drug_name_patients, p.other_phrase_patients,
                        f"{p.mean_positive_snippets:.2f}", f"{p.sd_positive_snippets:.2f}"])
    for p in profiles.values():
        path = directory / f"note_types_{p.group}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "note_type", "count"])
            w.writerows(p.note_types)
        paths.append(path)
    return paths


def check_partition(assignments: Sequence[GroupAssignment], statuses: Iterable[PatientNlpStatus]) -> dict[str, int]:
    """Group sizes plus the NLP-positive identity; raises if either identity fails."""
    sizes = group_sizes(assignments)
    if sum(sizes[g] for g in GROUPS) != len(assignments) or len({a.patient_id for a in assignments}) != len(assignments):
        raise AssertionError("groups do not partition the cohort")
    n_nlp = sum(s.nlp_positive for s in statuses)
    if n_nlp != sizes[NLP_ONLY] + sizes[NLP_ICD]:
        raise AssertionError(f"NLP-positive {n_nlp} != NlpOnly {sizes[NLP_ONLY]} + NLP/ICD {sizes[NLP_ICD]}")
    return sizes | {"nlp_positive": n_nlp}

