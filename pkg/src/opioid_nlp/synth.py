"""Deterministic synthetic corpus with per-snippet ground truth.

Each note is key-phrase-free filler with zero or more labeled passages
spliced in. Passages are separated by at least ``gap_tokens`` filler
tokens (more than the snippet window radius), so every snippet window sees
exactly one passage and inherits its label.
"""
from __future__ import annotations

import datetime as dt
import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import (
    DEFAULT_STUDY_WINDOW,
    ETHNICITIES,
    MARITAL_STATUSES,
    RACES,
    Corpus,
    DiagnosisRecord,
    EncounterRecord,
    NoteRecord,
    PatientRecord,
    PrescriptionRecord,
    emit_corpus,
)
from .lexicon import Lexicon, find_in_tokens, load_lexicon, normalize_token
from .rules import ABSOLUTE_POSITIVE, CANCELING, GENERAL_POSITIVE, NEGATIVE, NEUTRAL, POSITIVE

ML = "MachineLearning"

DRUGS = (
    "abstral", "actiq", "demerol", "dilaudid", "dolophine", "duragesic", "exalgo", "fentanyl", "fentora",
    "hydrocodone", "hydromorphone", "hysingla", "kadian", "lorcet", "lortab", "meperidine", "methadone",
    "methadose", "morphine", "norco", "oxaydo", "oxycodone", "oxycontin", "percocet", "roxicet", "vicodin",
    "zohydro",
)
COMMON_DRUGS = ("oxycodone", "percocet", "hydrocodone", "morphine", "methadone", "vicodin", "dilaudid",
                "fentanyl", "oxycontin", "hydromorphone", "norco")
RELATIVES = ("sister", "brother", "son", "daughter", "wife", "husband", "mother", "father", "cousin", "roommate")

# (label, route) -> templates; every template carries at least one key phrase
TEMPLATES: dict[tuple[str, str], tuple[str, ...]] = {
    (POSITIVE, ABSOLUTE_POSITIVE): (
        "problem list: {n}. low back pain {n2}. opioid dependence {n3}. homeless single person",
        "assessment: opioid dependence (icd-9-cm 304.00) remains active, plan discussed",
        "diagnosis today: opioid use disorder (icd-10-cm f11.20), referred to clinic",
        "screening questionnaire [x] substance abuse and/or dependence [ ] none of the above",
        "patient continues to struggle with opioid abuse and reports using {drug} daily",
        "meets criteria for opioid use disorder, severe, currently using {drug} from friends",
        "{pronoun} states {pronoun} is addicted to pain pills, mostly {drug}, and wants help",
        "active opioid use noted, last took {drug} two days ago",
        "current diagnosis: opioid dependence, started on {drug} maintenance",
    ),
    (NEGATIVE, CANCELING): (
        "former opioid dependence, no use in many years, doing well",
        "history of opiate abuse, in sustained remission, no current use",
        "hx of polysubstance abuse, clean for years, works full time",
        "denies opioid misuse, takes {drug} as prescribed for knee pain",
        "no evidence of opioid misuse on chart review, {drug} refilled",
        "[ ] opioid abuse [ ] alcohol abuse [ ] tobacco use",
        "family hx of substance abuse in {relative}",
        "alcohol withdrawal protocol completed without complication",
        "past substance dependence, {pronoun} quit using pills 10 years ago",
    ),
    (POSITIVE, GENERAL_POSITIVE): (
        "concern for opioid abuse given repeated refill calls about {drug}",
        "ongoing opioid misuse with {drug} obtained from several sources",
        "drug seeking behavior noted, requesting {drug} by name",
        "reports lost prescription for {drug} again this month",
        "admits to snorting pills, mostly {drug}, on weekends",
        "polysubstance abuse including {drug} and cocaine",
        "overdosed on pills last week, bottle of {drug} found by ems",
        "longstanding opioid addiction, asking to start {drug} maintenance",
    ),
    (NEGATIVE, NEUTRAL): (
        "{relative} abuses {drug} and lives in the same house",
        "{drug} 5mg tab take one tablet every four hours when needed for pain",
        "may cause drowsiness. cannot drive or operate machinery while taking {drug}",
        "allergies: penicillin, {drug}, sulfa drugs",
        "{n}) {drug} inj, soln active give: 0.5 mg/0.5ml ivp q2h prn for pain",
        "naloxone kit education provided along with {drug} prescription",
        "pdmp checked before renewing {drug} for chronic pain",
        "family history of {drug} overdose in {relative}",
    ),
    (POSITIVE, ML): (
        "substance abuse treatment intake, heroin last used: yesterday, also buys {drug}",
        "alludes to the possibility of self medicating on the street, opiate withdrawal when out",
        "would not receive prescription for {drug} until next month, reiterated that taking additional doses was a patient safety issue",
        "ran out of {drug} early again and was buying pills on the street",
        "reports taking extra {drug} to get high, craving every day",
        "withdrawal symptoms with sweats and cramping after running out of street {drug}",
        "urine screen positive for {drug} not prescribed, {pronoun} admitted using",
        "using {drug} far more than prescribed, use out of control per family",
        "sells {pronoun2} {drug} and uses heroin when money runs out",
    ),
    (NEGATIVE, ML): (
        "pt has pain mostly at night was on {drug} and tried to change to {drug2} but since {pronoun} developed rash",
        "patient requested no {drug} after surgery",
        "continue tylenol and {drug} as needed per home regimen",
        "tolerating {drug} well, pain controlled, no side effects",
        "{drug} given in the emergency department for fracture pain with good relief",
        "discussed tapering {drug} slowly, patient agreeable, pain stable",
        "opioid risk reviewed, patient adherent with pain agreement and pill counts correct",
        "{drug} for post operative pain, short course, follow up with surgeon",
        "dose of {drug} reduced by oncology, comfort maintained",
    ),
}

FILLER = (
    "vital signs stable.",
    "patient seen for routine follow up.",
    "bp 128/76 hr 72 temp 98.6.",
    "no acute distress noted.",
    "discussed diet exercise and sleep hygiene.",
    "labs reviewed with patient.",
    "follow up in three months.",
    "lungs clear to auscultation bilaterally.",
    "heart regular rate and rhythm.",
    "patient ambulating independently with cane.",
    "plan reviewed and questions answered.",
    "a1c 6.8 last month.",
    "flu vaccine offered and given.",
    "skin warm and dry.",
    "reports chest pain resolved after rest.",
    "mood stable, sleeping well.",
    "appetite good, weight unchanged.",
    "eye exam scheduled for next week.",
    "housing status reviewed with social work.",
    "patient lives alone in an apartment.",
    "blood sugar log reviewed.",
    "knee brace fitting arranged.",
    "hearing aids checked and working.",
    "transportation arranged for next visit.",
)

NOTE_TYPES = {
    "problem": (
        ("SATP NOTE", 6), ("SARP GROUP NOTE", 5), ("MENTAL HEALTH NOTE", 5), ("EMERGENCY DEPT NOTE", 4),
        ("OPIOID PRESCRIBING NOTE", 4), ("HOMELESS PROGRAM NOTE", 3), ("PRIMARY CARE NOTE", 4),
        ("PAIN CLINIC NOTE", 3), ("PHARMACY NOTE", 2), ("SOCIAL WORK NOTE", 2), ("NURSING NOTE", 2),
        ("DIABETES EDUCATION NOTE", 1), ("EYE CLINIC NOTE", 1),
    ),
    "other": (
        ("PRIMARY CARE NOTE", 8), ("NURSING NOTE", 5), ("PHARMACY NOTE", 4), ("EMERGENCY DEPT NOTE", 3),
        ("PAIN CLINIC NOTE", 3), ("SURGERY NOTE", 2), ("DIABETES EDUCATION NOTE", 2), ("EYE CLINIC NOTE", 2),
        ("MENTAL HEALTH NOTE", 2), ("ONCOLOGY NOTE", 1),
    ),
}

COMORBIDITY_CODES = {
    "hypertension": ("401.9", "I10"),
    "diabetes_mellitus": ("250.00", "E11.9"),
    "depression": ("311", "F32.9"),
    "ptsd": ("309.81", "F43.10"),
    "cancer": ("174.9", "C50.919"),
    "tobacco": ("305.1", "F17.210"),
    "alcohol": ("303.90", "F10.20"),
    "other_drug_addictions": ("304.20", "F14.20"),
    "traumatic_brain_injury": ("850.9", "S06.0X0A"),
    "anxiety": ("300.00", "F41.1"),
    "neck_pain": ("723.1", "M54.2"),
    "back_pain": ("724.2", "M54.5"),
}

# rates loosely follow the reported group profiles: icd / notes-only / neither
PROFILE = {
    "gender_m": (0.93, 0.82, 0.85),
    "age": ((53.3, 12.2), (55.4, 16.1), (58.8, 18.7)),
    "marital": (
        (25.7, 31.6, 26.5, 4.5, 11.3, 0.4),
        (38.5, 25.8, 22.8, 5.1, 6.5, 1.3),
        (50.2, 17.1, 15.6, 6.9, 3.2, 6.9),
    ),
    "race": (
        (59.7, 35.7, 0.1, 0.5, 0.4, 3.6),
        (54.0, 36.6, 1.0, 0.6, 0.6, 7.2),
        (28.2, 51.4, 1.2, 0.5, 0.5, 18.2),
    ),
    "ethnicity": ((96.5, 1.5, 1.9), (92.3, 2.9, 4.9), (80.6, 2.9, 16.5)),
    "comorbidity": {
        "hypertension": (0.571, 0.535, 0.458),
        "diabetes_mellitus": (0.221, 0.250, 0.204),
        "depression": (0.618, 0.411, 0.196),
        "ptsd": (0.396, 0.251, 0.108),
        "cancer": (0.090, 0.121, 0.129),
        "tobacco": (0.620, 0.311, 0.154),
        "alcohol": (0.609, 0.238, 0.092),
        "other_drug_addictions": (0.666, 0.186, 0.042),
        "traumatic_brain_injury": (0.115, 0.070, 0.036),
        "anxiety": (0.397, 0.276, 0.141),
        "neck_pain": (0.394, 0.313, 0.182),
        "back_pain": (0.570, 0.472, 0.307),
    },
    "opioid_rx": (0.715, 0.516, 0.321),
    "benzo_rx": (0.25, 0.15, 0.08),
    "encounters": (50.9, 33.4, 16.2),
}


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    positive_note_rate: float = 0.3
    icd_rate: float = 0.35
    icd_negative_ratio: float = 0.1
    notes_per_patient: tuple[int, int] = (2, 6)
    passages_per_note: tuple[int, int] = (1, 3)
    filler_note_rate: float = 0.25
    positive_passage_share: float = 0.6
    positive_routes: tuple[float, float, float] = (0.25, 0.25, 0.5)  # absolute, general, ML
    negative_routes: tuple[float, float, float] = (0.2, 0.3, 0.5)  # canceling, neutral, ML
    gap_tokens: int = 55
    label_noise: float = 0.0
    study_window: tuple[dt.date, dt.date] = DEFAULT_STUDY_WINDOW

    def __post_init__(self):
        for name in ("positive_note_rate", "icd_rate", "icd_negative_ratio", "filler_note_rate",
                     "positive_passage_share", "label_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SynthConfigError(f"{name}={value} outside [0, 1]")
        for name in ("positive_routes", "negative_routes"):
            w = getattr(self, name)
            if len(w) != 3 or min(w) < 0 or sum(w) <= 0:
                raise SynthConfigError(f"{name} must be three non-negative weights")
        for name in ("notes_per_patient", "passages_per_note"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise SynthConfigError(f"{name} must be an increasing range starting at 1 or more")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["study_window"] = [x.isoformat() for x in self.study_window]
        return d


@dataclass
class GroundTruth:
    snippets: list[dict] = field(default_factory=list)
    patients: list[dict] = field(default_factory=list)

    def snippet_labels(self) -> dict[str, str]:
        return {s["snippet_id"]: s["label"] for s in self.snippets}

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.patients:
                fh.write(json.dumps({"kind": "patient", **rec}, ensure_ascii=False) + "\n")
            for rec in self.snippets:
                fh.write(json.dumps({"kind": "snippet", **rec}, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        gt = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec.pop("kind", "snippet")
                (gt.patients if kind == "patient" else gt.snippets).append(rec)
        return gt


def render_template(template: str, rng: random.Random, gender: str = "M") -> str:
    drug = rng.choice(DRUGS if rng.random() < 0.3 else COMMON_DRUGS)
    drug2 = rng.choice([d for d in COMMON_DRUGS if d != drug])
    n = rng.randint(1, 7)
    return template.format(
        drug=drug,
        drug2=drug2,
        relative=rng.choice(RELATIVES),
        pronoun="he" if gender == "M" else "she",
        pronoun2="his" if gender == "M" else "her",
        n=n,
        n2=n + 1,
        n3=n + 2,
    )


def _filler(rng: random.Random, min_tokens: int) -> list[str]:
    tokens: list[str] = []
    while len(tokens) < min_tokens:
        tokens.extend(rng.choice(FILLER).split())
    return tokens


def _weighted(rng: random.Random, items, weights):
    return rng.choices(items, weights=weights, k=1)[0]


def _rand_date(rng: random.Random, lo: dt.date, hi: dt.date) -> dt.date:
    return lo + dt.timedelta(days=rng.randint(0, (hi - lo).days))


class _Builder:
    def __init__(self, seed: int, config: SynthConfig, lexicon: Lexicon):
        self.rng = random.Random(seed)
        self.cfg = config
        self.lexicon = lexicon
        self.notes: list[NoteRecord] = []
        self.patients: list[PatientRecord] = []
        self.diagnoses: list[DiagnosisRecord] = []
        self.prescriptions: list[PrescriptionRecord] = []
        self.encounters: list[EncounterRecord] = []
        self.truth = GroundTruth()

    def note(self, pid: str, note_id: str, date: dt.date, labels: list[str], problem: bool, gender: str) -> int:
        rng, cfg = self.rng, self.cfg
        tokens = _filler(rng, rng.randint(5, 20))
        spans = []
        for k, label in enumerate(labels):
            if k:
                tokens.extend(_filler(rng, cfg.gap_tokens))
            if label == POSITIVE:
                route = _weighted(rng, (ABSOLUTE_POSITIVE, GENERAL_POSITIVE, ML), cfg.positive_routes)
            else:
                route = _weighted(rng, (CANCELING, NEUTRAL, ML), cfg.negative_routes)
            templates = TEMPLATES[(label, route)]
            t_index = rng.randrange(len(templates))
            passage = render_template(templates[t_index], rng, gender).split()
            gold = label
            if cfg.label_noise and rng.random() < cfg.label_noise:
                gold = NEGATIVE if label == POSITIVE else POSITIVE
            spans.append((len(tokens), len(tokens) + len(passage), gold, route, f"{route}:{t_index}"))
            tokens.extend(passage)
        tokens.extend(_filler(rng, rng.randint(5, 20)))
        kind = "problem" if problem else "other"
        note_type = _weighted(rng, [t for t, _ in NOTE_TYPES[kind]], [w for _, w in NOTE_TYPES[kind]])
        self.notes.append(NoteRecord(note_id, pid, date, note_type, " ".join(tokens)))

        norm = [normalize_token(t) for t in tokens]
        n_snippets = 0
        for kp, i in find_in_tokens(norm, self.lexicon):
            span = next((s for s in spans if s[0] <= i < s[1]), None)
            if span is None:
                raise AssertionError(f"key phrase {kp.text!r} outside any passage in {note_id}")
            self.truth.snippets.append({
                "snippet_id": f"{note_id}:{i}",
                "note_id": note_id,
                "patient_id": pid,
                "key_phrase": kp.text,
                "label": span[2],
                "route": span[3],
                "template": span[4],
            })
            n_snippets += 1
        return n_snippets

    def patient(self, k: int) -> None:
        rng, cfg = self.rng, self.cfg
        lo, hi = cfg.study_window
        pid = f"P{k:06d}"
        positive = rng.random() < cfg.positive_note_rate
        icd = rng.random() < cfg.icd_rate * (1.0 if positive else cfg.icd_negative_ratio)
        g = 0 if icd else 1 if positive else 2

        entry = _rand_date(rng, lo, min(hi, lo + dt.timedelta(days=4 * 365)))
        mean, sd = PROFILE["age"][g]
        age = int(round(min(95, max(20, rng.gauss(mean, sd)))))
        gender = "M" if rng.random() < PROFILE["gender_m"][g] else "F"
        self.patients.append(PatientRecord(
            patient_id=pid,
            birth_year=entry.year - age,
            gender=gender,
            marital_status=_weighted(rng, MARITAL_STATUSES, PROFILE["marital"][g]),
            race=_weighted(rng, RACES, PROFILE["race"][g]),
            ethnicity=_weighted(rng, ETHNICITIES, PROFILE["ethnicity"][g]),
            cohort_entry_date=entry,
        ))

        # notes: a positive patient gets at least one positive passage
        n_notes = rng.randint(*cfg.notes_per_patient)
        plans = []
        for j in range(n_notes):
            if rng.random() < cfg.filler_note_rate:
                plans.append([])
                continue
            n_pass = rng.randint(*cfg.passages_per_note)
            plans.append([
                POSITIVE if positive and rng.random() < cfg.positive_passage_share else NEGATIVE
                for _ in range(n_pass)
            ])
        if positive and not any(POSITIVE in p for p in plans):
            j = rng.randrange(n_notes)
            plans[j] = (plans[j] or [NEGATIVE])
            plans[j][rng.randrange(len(plans[j]))] = POSITIVE
        n_snip = 0
        for j, labels in enumerate(plans):
            date = _rand_date(rng, entry, hi)
            n_snip += self.note(pid, f"N{k:06d}-{j:02d}", date, labels, positive or icd, gender)

        first_icd = None
        if icd:
            first_icd = _rand_date(rng, entry, hi)
            for _ in range(rng.randint(1, 3)):
                d = _rand_date(rng, first_icd, hi)
                if d < dt.date(2015, 10, 1):
                    self.diagnoses.append(DiagnosisRecord(pid, "ICD9", rng.choice(("304.00", "304.70", "305.50")), d))
                else:
                    self.diagnoses.append(DiagnosisRecord(pid, "ICD10", rng.choice(("F11.20", "F11.10", "F11.90", "F11")), d))
            self.diagnoses.append(DiagnosisRecord(pid, "ICD9" if first_icd < dt.date(2015, 10, 1) else "ICD10",
                                                  "304.00" if first_icd < dt.date(2015, 10, 1) else "F11.20", first_icd))
        if rng.random() < 0.05:
            # look-alike codes that must not qualify
            self.diagnoses.append(DiagnosisRecord(pid, "ICD9", rng.choice(("304.01", "305.51", "304.0")),
                                                  _rand_date(rng, entry, hi)))
        for var, rates in PROFILE["comorbidity"].items():
            if rng.random() < rates[g]:
                d = _rand_date(rng, entry, hi)
                code = COMORBIDITY_CODES[var][0 if d < dt.date(2015, 10, 1) else 1]
                self.diagnoses.append(DiagnosisRecord(pid, "ICD9" if d < dt.date(2015, 10, 1) else "ICD10", code, d))

        opioid_spans = []
        if rng.random() < PROFILE["opioid_rx"][g]:
            for _ in range(rng.randint(1, 3)):
                s = _rand_date(rng, entry - dt.timedelta(days=180), hi - dt.timedelta(days=90))
                e = s + dt.timedelta(days=rng.choice((7, 14, 30, 90)))
                opioid_spans.append((s, e))
                self.prescriptions.append(PrescriptionRecord(pid, "Opioid", s, e))
        if rng.random() < PROFILE["benzo_rx"][g]:
            if opioid_spans and rng.random() < 0.7:
                s0, e0 = rng.choice(opioid_spans)
                s = s0 + dt.timedelta(days=rng.randint(0, max(0, (e0 - s0).days)))
            else:
                s = _rand_date(rng, entry, hi - dt.timedelta(days=60))
            self.prescriptions.append(PrescriptionRecord(pid, "Benzodiazepine", s, s + dt.timedelta(days=30)))
        if rng.random() < 0.3:
            s = _rand_date(rng, entry, hi - dt.timedelta(days=60))
            self.prescriptions.append(PrescriptionRecord(pid, "Other", s, s + dt.timedelta(days=30)))

        mean_enc = PROFILE["encounters"][g]
        n_enc = int(rng.gammavariate(1.2, mean_enc / 1.2))
        for _ in range(n_enc):
            self.encounters.append(EncounterRecord(pid, _rand_date(rng, entry, hi), "Outpatient"))
        for _ in range(rng.randint(0, 2)):
            self.encounters.append(EncounterRecord(pid, _rand_date(rng, entry, hi), rng.choice(("Inpatient", "Other"))))

        expected = "AllIcd" if icd else "NlpOnly" if positive else "NoProblematic"
        self.truth.patients.append({
            "patient_id": pid,
            "expected_group": expected,
            "positive_passages": positive,
            "icd": icd,
            "first_icd_date": first_icd.isoformat() if first_icd else None,
            "snippets": n_snip,
        })


def generate_synthetic_corpus(seed: int, n_patients: int, config: SynthConfig | None = None,
                              lexicon: Lexicon | None = None) -> tuple[Corpus, GroundTruth]:
    """Build a corpus and its ground truth; a pure function of ``(seed, n_patients, config)``."""
    if n_patients < 1:
        raise SynthConfigError("n_patients must be at least 1")
    config = config or SynthConfig()
    builder = _Builder(seed, config, lexicon or load_lexicon())
    for k in range(n_patients):
        builder.patient(k)
    corpus = Corpus(
        notes=tuple(builder.notes),
        patients=tuple(builder.patients),
        diagnoses=tuple(builder.diagnoses),
        prescriptions=tuple(builder.prescriptions),
        encounters=tuple(builder.encounters),
        study_window=config.study_window,
    )
    return corpus, builder.truth


def write_synthetic(directory, corpus: Corpus, truth: GroundTruth) -> dict[str, int]:
    directory = Path(directory)
    counts = emit_corpus(corpus, directory)
    truth.dump(directory / "ground_truth.jsonl")
    counts["ground_truth_snippets"] = len(truth.snippets)
    return counts
