"""Record types, JSONL ingestion/emission and summary counts for a note corpus.

A corpus directory holds five line-delimited JSON files, one object per line:

    notes.jsonl, patients.jsonl, diagnoses.jsonl,
    prescriptions.jsonl, encounters.jsonl

Field names are exactly the dataclass field names below; dates are ISO-8601
calendar dates.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

logger = logging.getLogger(__name__)

GENDERS = ("M", "F")
MARITAL_STATUSES = ("Married", "Divorced", "NeverMarried", "Widowed", "Separated", "MissingOther")
RACES = (
    "BlackAfricanAmerican",
    "White",
    "Asian",
    "NativeHawaiianPacificIslander",
    "AmericanIndianAlaskaNative",
    "Unknown",
)
ETHNICITIES = ("NotHispanicOrLatino", "HispanicOrLatino", "Unknown")
CODE_SYSTEMS = ("ICD9", "ICD10")
DRUG_CLASSES = ("Opioid", "Benzodiazepine", "Other")
SETTINGS = ("Outpatient", "Inpatient", "Other")

DEFAULT_STUDY_WINDOW = (dt.date(2012, 1, 1), dt.date(2019, 12, 31))


class CorpusError(ValueError):
    """Raised for malformed, duplicate or otherwise invalid corpus records."""


@dataclass(frozen=True)
class NoteRecord:
    note_id: str
    patient_id: str
    note_date: dt.date
    note_type: str
    text: str


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    birth_year: int
    gender: str
    marital_status: str
    race: str
    ethnicity: str
    cohort_entry_date: dt.date

    @property
    def age_at_entry(self) -> int:
        return self.cohort_entry_date.year - self.birth_year


@dataclass(frozen=True)
class DiagnosisRecord:
    patient_id: str
    code_system: str
    code: str
    diagnosis_date: dt.date


@dataclass(frozen=True)
class PrescriptionRecord:
    patient_id: str
    drug_class: str
    start_date: dt.date
    end_date: dt.date


@dataclass(frozen=True)
class EncounterRecord:
    patient_id: str
    encounter_date: dt.date
    setting: str


RECORD_FILES = {
    "notes": ("notes.jsonl", NoteRecord),
    "patients": ("patients.jsonl", PatientRecord),
    "diagnoses": ("diagnoses.jsonl", DiagnosisRecord),
    "prescriptions": ("prescriptions.jsonl", PrescriptionRecord),
    "encounters": ("encounters.jsonl", EncounterRecord),
}

_ENUMS = {
    (PatientRecord, "gender"): GENDERS,
    (PatientRecord, "marital_status"): MARITAL_STATUSES,
    (PatientRecord, "race"): RACES,
    (PatientRecord, "ethnicity"): ETHNICITIES,
    (DiagnosisRecord, "code_system"): CODE_SYSTEMS,
    (PrescriptionRecord, "drug_class"): DRUG_CLASSES,
    (EncounterRecord, "setting"): SETTINGS,
}


@dataclass(frozen=True)
class Corpus:
    notes: tuple[NoteRecord, ...] = ()
    patients: tuple[PatientRecord, ...] = ()
    diagnoses: tuple[DiagnosisRecord, ...] = ()
    prescriptions: tuple[PrescriptionRecord, ...] = ()
    encounters: tuple[EncounterRecord, ...] = ()
    study_window: tuple[dt.date, dt.date] = field(default=DEFAULT_STUDY_WINDOW, compare=False)

    def __post_init__(self):
        validate_corpus(self)

    def patient_index(self) -> dict[str, PatientRecord]:
        return {p.patient_id: p for p in self.patients}

    def by_patient(self, kind: str) -> dict[str, list]:
        grouped: dict[str, list] = {}
        for rec in getattr(self, kind):
            grouped.setdefault(rec.patient_id, []).append(rec)
        return grouped


def _check_unique(records: Iterable, key: str, what: str) -> None:
    seen = set()
    for rec in records:
        value = getattr(rec, key)
        if value in seen:
            raise CorpusError(f"duplicate {what} {value!r}")
        seen.add(value)


def validate_record(rec) -> None:
    """Field-level checks shared by ingestion and programmatic construction."""
    cls = type(rec)
    for (owner, name), allowed in _ENUMS.items():
        if owner is cls and getattr(rec, name) not in allowed:
            raise CorpusError(f"{cls.__name__}.{name}={getattr(rec, name)!r} not in {allowed}")
    if cls is NoteRecord and not rec.text.strip():
        raise CorpusError(f"note {rec.note_id!r} has empty text")
    if cls is DiagnosisRecord and not rec.code:
        raise CorpusError(f"diagnosis for patient {rec.patient_id!r} has empty code")
    if cls is PrescriptionRecord and rec.end_date < rec.start_date:
        raise CorpusError(
            f"prescription for patient {rec.patient_id!r} ends {rec.end_date} before it starts {rec.start_date}"
        )


def validate_corpus(corpus: Corpus) -> None:
    _check_unique(corpus.notes, "note_id", "note_id")
    _check_unique(corpus.patients, "patient_id", "patient_id")
    lo, hi = corpus.study_window
    for kind in RECORD_FILES:
        for rec in getattr(corpus, kind):
            validate_record(rec)
    for note in corpus.notes:
        if not lo <= note.note_date <= hi:
            raise CorpusError(f"note {note.note_id!r} dated {note.note_date} outside study window {lo}..{hi}")


def _parse_value(cls, name: str, typ: Any, value: Any):
    if typ in (dt.date, "dt.date"):
        if not isinstance(value, str):
            raise CorpusError(f"field {name!r}: expected ISO date string, got {value!r}")
        try:
            return dt.date.fromisoformat(value)
        except ValueError as exc:
            raise CorpusError(f"field {name!r}: cannot parse date {value!r}") from exc
    if typ in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise CorpusError(f"field {name!r}: expected integer, got {value!r}")
        return value
    if not isinstance(value, str):
        raise CorpusError(f"field {name!r}: expected string, got {value!r}")
    return value


def record_from_dict(cls, obj: dict):
    if not isinstance(obj, dict):
        raise CorpusError(f"expected a JSON object, got {type(obj).__name__}")
    fields = dataclasses.fields(cls)
    names = {f.name for f in fields}
    missing = [f.name for f in fields if f.name not in obj]
    if missing:
        raise CorpusError(f"missing field(s) {', '.join(missing)}")
    extra = sorted(set(obj) - names)
    if extra:
        raise CorpusError(f"unknown field(s) {', '.join(extra)}")
    kwargs = {f.name: _parse_value(cls, f.name, f.type, obj[f.name]) for f in fields}
    rec = cls(**kwargs)
    validate_record(rec)
    return rec


def record_to_dict(rec) -> dict:
    out = {}
    for f in dataclasses.fields(rec):
        value = getattr(rec, f.name)
        out[f.name] = value.isoformat() if isinstance(value, dt.date) else value
    return out


def dumps_record(rec) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False)


def read_records(path: Path, cls) -> Iterator:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                yield record_from_dict(cls, obj)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc


def write_records(path: Path, records: Iterable) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_record(rec))
            fh.write("\n")
            n += 1
    return n


def ingest_corpus(directory=None, *, study_window=DEFAULT_STUDY_WINDOW, **paths) -> Corpus:
    """Load and validate a corpus.

    Either pass a directory holding the five standard file names, or give
    explicit per-record-type paths as keywords (``notes=...``). Record types
    without a file are left empty.
    """
    collections = {}
    for kind, (filename, cls) in RECORD_FILES.items():
        path = paths.get(kind)
        if path is None and directory is not None:
            candidate = Path(directory) / filename
            path = candidate if candidate.exists() else None
        if path is None:
            collections[kind] = ()
            continue
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(path)
        collections[kind] = tuple(read_records(path, cls))
        logger.info("read %d %s from %s", len(collections[kind]), kind, path)
    return Corpus(**collections, study_window=study_window)


def emit_corpus(corpus: Corpus, directory) -> dict[str, int]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return {
        kind: write_records(directory / filename, getattr(corpus, kind))
        for kind, (filename, _cls) in RECORD_FILES.items()
    }


def corpus_stats(corpus: Corpus) -> dict[str, Any]:
    """Collection sizes plus notes per note type."""
    return {
        "patients": len(corpus.patients),
        "notes": len(corpus.notes),
        "diagnoses": len(corpus.diagnoses),
        "prescriptions": len(corpus.prescriptions),
        "encounters": len(corpus.encounters),
        "notes_by_type": dict(sorted(Counter(n.note_type for n in corpus.notes).items())),
    }
