"""Rules-first, model-second snippet classification and note/patient roll-ups."""
from __future__ import annotations

import datetime as dt
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .features import DEFAULT_MAX_BIGRAMS, DEFAULT_MAX_UNIGRAMS, DEFAULT_MIN_DF, build_vocabulary, preprocess, vectorize
from .learner import DEFAULT_EPOCHS, DEFAULT_LAMBDA, LinearModel, predict, train
from .lexicon import DEFAULT_WINDOW_RADIUS, Lexicon, Snippet, extract_snippets
from .rules import NEGATIVE, POSITIVE, RuleLibrary, classify_by_rules, explain_rules

logger = logging.getLogger(__name__)

RULE = "Rule"
MACHINE_LEARNING = "MachineLearning"
DRUG_CATEGORY = "SpecificDrugName"


@dataclass(frozen=True)
class SnippetClassification:
    snippet: Snippet
    label: str
    method: str
    rule_id: str | None = None
    rule_category: str | None = None
    margin: float | None = None
    explained: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        out = self.snippet.to_dict()
        out["label"] = self.label
        out["method"] = self.method
        out["detail"] = self.rule_id if self.method == RULE else f"{self.margin:.17g}"
        if self.method == RULE:
            out["rule_category"] = self.rule_category
        if self.explained is not None:
            out["matched_rules"] = list(self.explained)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "SnippetClassification":
        method = obj["method"]
        explained = obj.get("matched_rules")
        return cls(
            snippet=Snippet.from_dict(obj),
            label=obj["label"],
            method=method,
            rule_id=obj["detail"] if method == RULE else None,
            rule_category=obj.get("rule_category"),
            margin=float(obj["detail"]) if method != RULE else None,
            explained=tuple(explained) if explained is not None else None,
        )


@dataclass(frozen=True)
class DocumentClassification:
    note_id: str
    positive: bool
    positive_snippet_count: int
    total_snippet_count: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, obj: dict) -> "DocumentClassification":
        return cls(obj["note_id"], bool(obj["positive"]), int(obj["positive_snippet_count"]),
                   int(obj["total_snippet_count"]))


@dataclass(frozen=True)
class PatientNlpStatus:
    patient_id: str
    nlp_positive: bool
    positive_snippet_count: int
    first_positive_date: dt.date | None
    drug_name_positive: bool
    other_phrase_positive: bool

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["first_positive_date"] = self.first_positive_date.isoformat() if self.first_positive_date else None
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PatientNlpStatus":
        d = obj.get("first_positive_date")
        return cls(
            patient_id=obj["patient_id"],
            nlp_positive=bool(obj["nlp_positive"]),
            positive_snippet_count=int(obj["positive_snippet_count"]),
            first_positive_date=dt.date.fromisoformat(d) if d else None,
            drug_name_positive=bool(obj["drug_name_positive"]),
            other_phrase_positive=bool(obj["other_phrase_positive"]),
        )


def classify_snippet(snippet: Snippet, library: RuleLibrary, model: LinearModel, explain: bool = False) -> SnippetClassification:
    explained = tuple(r.rule_id for r in explain_rules(snippet.text, library)) if explain else None
    verdict = classify_by_rules(snippet.text, library)
    if verdict is not None:
        return SnippetClassification(
            snippet, verdict.label, RULE, rule_id=verdict.matched_rule,
            rule_category=verdict.matched_category, explained=explained,
        )
    label, margin = predict(model, vectorize(preprocess(snippet), model.vocabulary))
    return SnippetClassification(snippet, label, MACHINE_LEARNING, margin=margin, explained=explained)


class CascadeClassifier(ClassifierMixin, BaseEstimator):
    """Snippet classifier: a rule library decides where it can, a linear SVM does the rest.

    ``fit`` takes a list of :class:`Snippet` and their labels, builds the
    n-gram vocabulary and trains the SVM on all of them. A pre-trained
    :class:`LinearModel` can be attached with :meth:`from_model`.
    """

    def __init__(self, rules: RuleLibrary | None = None, lam=DEFAULT_LAMBDA, epochs=DEFAULT_EPOCHS,
                 random_state=0, max_unigrams=DEFAULT_MAX_UNIGRAMS, max_bigrams=DEFAULT_MAX_BIGRAMS,
                 min_df=DEFAULT_MIN_DF):
        self.rules = rules
        self.lam = lam
        self.epochs = epochs
        self.random_state = random_state
        self.max_unigrams = max_unigrams
        self.max_bigrams = max_bigrams
        self.min_df = min_df

    @classmethod
    def from_model(cls, rules: RuleLibrary, model: LinearModel) -> "CascadeClassifier":
        hp = model.hyperparameters
        est = cls(rules, lam=hp.get("lambda", DEFAULT_LAMBDA), epochs=hp.get("epochs", DEFAULT_EPOCHS),
                  random_state=hp.get("seed", 0))
        est.model_ = model
        est.classes_ = np.array([NEGATIVE, POSITIVE], dtype=object)
        return est

    def fit(self, X: Sequence[Snippet], y: Sequence[str]):
        if self.rules is None:
            raise ValueError("a rule library is required")
        seqs = [preprocess(s) for s in X]
        vocab = build_vocabulary(seqs, self.max_unigrams, self.max_bigrams, self.min_df)
        vectors = [vectorize(q, vocab, label) for q, label in zip(seqs, y)]
        self.model_, self.objective_curve_ = train(vectors, vocab, self.lam, self.epochs, self.random_state)
        self.classes_ = np.array([NEGATIVE, POSITIVE], dtype=object)
        return self

    def classify(self, X: Iterable[Snippet], explain: bool = False) -> list[SnippetClassification]:
        check_is_fitted(self, "model_")
        return [classify_snippet(s, self.rules, self.model_, explain) for s in X]

    def predict(self, X: Iterable[Snippet]) -> np.ndarray:
        return np.array([c.label for c in self.classify(X)], dtype=object)


@dataclass
class CorpusClassification:
    snippets: list[SnippetClassification]
    documents: list[DocumentClassification]
    patients: list[PatientNlpStatus]
    notes_scanned: int = 0
    seconds: float = 0.0


def _classify_notes(notes, lexicon, library, model, window_radius, explain):
    out = []
    for note in notes:
        snippets = extract_snippets(note, lexicon, window_radius)
        if snippets:
            out.append((note.note_id, [classify_snippet(s, library, model, explain) for s in snippets]))
    return out


def _batches(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


class _PatientAccumulator:
    def __init__(self, patient_id):
        self.patient_id = patient_id
        self.count = 0
        self.first = None
        self.drug = False
        self.other = False

    def add(self, c: SnippetClassification):
        if c.label != POSITIVE:
            return
        self.count += 1
        d = c.snippet.note_date
        self.first = d if self.first is None or d < self.first else self.first
        if c.snippet.key_phrase.category == DRUG_CATEGORY:
            self.drug = True
        else:
            self.other = True

    def status(self) -> PatientNlpStatus:
        return PatientNlpStatus(self.patient_id, self.count > 0, self.count, self.first, self.drug, self.other)


def classify_corpus(corpus, lexicon: Lexicon, library: RuleLibrary, model: LinearModel, *,
                    window_radius: int = DEFAULT_WINDOW_RADIUS, workers: int = 1, batch_size: int = 2000,
                    explain: bool = False) -> CorpusClassification:
    """Classify every snippet of every note that has at least one key phrase.

    Output is ordered by note_id (then snippet position) regardless of
    ``workers``. Patient statuses cover every patient in the corpus,
    including those with no snippets at all.
    """
    start = time.perf_counter()
    notes = sorted(corpus.notes, key=lambda n: n.note_id)
    batches = list(_batches(notes, batch_size))
    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_classify_notes, b, lexicon, library, model, window_radius, explain) for b in batches]
            results = [f.result() for f in futures]
    else:
        results = [_classify_notes(b, lexicon, library, model, window_radius, explain) for b in batches]

    snippets: list[SnippetClassification] = []
    documents: list[DocumentClassification] = []
    accumulators = {p.patient_id: _PatientAccumulator(p.patient_id) for p in corpus.patients}
    for batch in results:
        for note_id, classified in batch:
            snippets.extend(classified)
            n_pos = sum(c.label == POSITIVE for c in classified)
            documents.append(DocumentClassification(note_id, n_pos > 0, n_pos, len(classified)))
            for c in classified:
                acc = accumulators.get(c.snippet.patient_id)
                if acc is None:
                    acc = accumulators[c.snippet.patient_id] = _PatientAccumulator(c.snippet.patient_id)
                acc.add(c)
    patients = [accumulators[k].status() for k in sorted(accumulators)]
    elapsed = time.perf_counter() - start
    logger.info("classified %d snippets from %d notes in %.2fs (%.0f notes/s, %.0f snippets/s)",
                len(snippets), len(notes), elapsed, len(notes) / max(elapsed, 1e-9),
                len(snippets) / max(elapsed, 1e-9))
    return CorpusClassification(snippets, documents, patients, len(notes), elapsed)


def classification_report(result: CorpusClassification | Sequence[DocumentClassification]) -> dict:
    """Note and snippet counts over classified documents."""
    docs = result.documents if isinstance(result, CorpusClassification) else list(result)
    total = sum(d.total_snippet_count for d in docs)
    positive = sum(d.positive_snippet_count for d in docs)
    return {
        "total_notes": len(docs),
        "total_snippets": total,
        "positive_snippets": positive,
        "negative_snippets": total - positive,
        "positive_notes": sum(d.positive for d in docs),
        "mean_snippets_per_note": total / len(docs) if docs else 0.0,
    }
