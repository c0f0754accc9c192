import datetime as dt

import numpy as np
import pytest

from opioid_nlp.cascade import (
    MACHINE_LEARNING,
    RULE,
    CascadeClassifier,
    DocumentClassification,
    PatientNlpStatus,
    SnippetClassification,
    classification_report,
    classify_corpus,
    classify_snippet,
)
from opioid_nlp.corpus import Corpus, NoteRecord, PatientRecord
from opioid_nlp.features import Vocabulary
from opioid_nlp.learner import LinearModel
from opioid_nlp.lexicon import extract_snippets
from opioid_nlp.rules import NEGATIVE, POSITIVE, classify_by_rules


def _note(text, note_id="N1", patient_id="P1", date=dt.date(2015, 1, 1)):
    return NoteRecord(note_id, patient_id, date, "PRIMARY CARE NOTE", text)


def _patient(pid):
    return PatientRecord(pid, 1960, "M", "Married", "White", "Unknown", dt.date(2013, 1, 1))


@pytest.fixture
def negative_model():
    vocab = Vocabulary(("zzz",), ())
    return LinearModel(vocab, np.zeros(2), -1.0)


def test_rule_method(library, lexicon, negative_model):
    [s] = extract_snippets(_note("opioid dependence (icd-9-cm 304.00)"), lexicon)[:1]
    c = classify_snippet(s, library, negative_model)
    assert (c.label, c.method, c.rule_id) == (POSITIVE, RULE, "AP01")


def test_ml_method_forced_arithmetic(library, lexicon, negative_model):
    [s] = extract_snippets(_note("took morphine yesterday"), lexicon)
    c = classify_snippet(s, library, negative_model)
    assert (c.label, c.method, c.margin) == (NEGATIVE, MACHINE_LEARNING, -1.0)


def test_model_route_example(library, lexicon, trained):
    clf, _, _ = trained
    [s] = extract_snippets(_note('substance abuse treatment...heroin last used: "yesterday"'), lexicon)
    c = clf.classify([s])[0]
    assert c.method == MACHINE_LEARNING


def test_stage_exclusivity_on_synthetic(synthetic, lexicon, library, trained):
    corpus, truth = synthetic
    clf, _, _ = trained
    result = classify_corpus(corpus, lexicon, library, clf.model_)
    for c in result.snippets:
        assert (c.method == RULE) == (classify_by_rules(c.snippet.text, library) is not None)


def test_rule_templated_passages_match_ground_truth(synthetic, lexicon, library, trained):
    corpus, truth = synthetic
    clf, _, _ = trained
    result = classify_corpus(corpus, lexicon, library, clf.model_)
    routes = {s["snippet_id"]: s for s in truth.snippets}
    ruled = [c for c in result.snippets if routes[c.snippet.snippet_id]["route"] != "MachineLearning"]
    assert ruled
    for c in ruled:
        assert c.method == RULE
        assert c.label == routes[c.snippet.snippet_id]["label"]


def test_aggregates(synthetic, lexicon, library, trained):
    corpus, _ = synthetic
    clf, _, _ = trained
    result = classify_corpus(corpus, lexicon, library, clf.model_)
    by_note = {}
    for c in result.snippets:
        by_note.setdefault(c.snippet.note_id, []).append(c)
    assert [d.note_id for d in result.documents] == sorted(by_note)
    for d in result.documents:
        items = by_note[d.note_id]
        assert d.total_snippet_count == len(items)
        assert d.positive_snippet_count == sum(c.label == POSITIVE for c in items)
        assert d.positive == (d.positive_snippet_count >= 1)
    assert len(result.patients) == len(corpus.patients)
    for p in result.patients:
        pos = [c for c in result.snippets if c.snippet.patient_id == p.patient_id and c.label == POSITIVE]
        assert p.nlp_positive == bool(pos)
        assert p.positive_snippet_count == len(pos)
        assert p.first_positive_date == (min(c.snippet.note_date for c in pos) if pos else None)
        assert p.drug_name_positive == any(c.snippet.key_phrase.category == "SpecificDrugName" for c in pos)
    report = classification_report(result)
    assert report["positive_snippets"] + report["negative_snippets"] == report["total_snippets"] == len(result.snippets)


def test_workers_do_not_change_output(synthetic, lexicon, library, trained):
    corpus, _ = synthetic
    clf, _, _ = trained
    a = classify_corpus(corpus, lexicon, library, clf.model_, workers=1)
    b = classify_corpus(corpus, lexicon, library, clf.model_, workers=3, batch_size=500)
    assert [c.to_dict() for c in a.snippets] == [c.to_dict() for c in b.snippets]
    assert a.documents == b.documents and a.patients == b.patients


def test_no_key_phrases(library, lexicon, negative_model):
    corpus = Corpus(notes=(_note("vital signs stable"),), patients=(_patient("P1"),))
    result = classify_corpus(corpus, lexicon, library, negative_model)
    assert result.snippets == [] and result.documents == []
    assert result.patients == [PatientNlpStatus("P1", False, 0, None, False, False)]


def test_first_positive_date_is_min(library, lexicon, negative_model):
    notes = (
        _note("opioid dependence (icd-9-cm 304.00)", "N1", date=dt.date(2013, 5, 1)),
        _note("active opioid abuse", "N2", date=dt.date(2012, 2, 3)),
    )
    result = classify_corpus(Corpus(notes=notes, patients=(_patient("P1"),)), lexicon, library, negative_model)
    assert result.patients[0].first_positive_date == dt.date(2012, 2, 3)
    assert result.patients[0].other_phrase_positive and not result.patients[0].drug_name_positive


def test_adding_positive_never_flips_negative(library, lexicon, negative_model):
    notes = [_note("former opioid dependence", "N1"), _note("active opioid abuse", "N2")]
    base = classify_corpus(Corpus(notes=tuple(notes[:1]), patients=(_patient("P1"),)), lexicon, library, negative_model)
    more = classify_corpus(Corpus(notes=tuple(notes), patients=(_patient("P1"),)), lexicon, library, negative_model)
    assert not base.patients[0].nlp_positive and more.patients[0].nlp_positive


def test_report_examples():
    docs = [DocumentClassification(f"N{i}", False, 0, n) for i, n in enumerate((2, 3, 1, 2))]
    r = classification_report(docs)
    assert r["total_snippets"] == 8 and r["mean_snippets_per_note"] == 2.0
    empty = classification_report([])
    assert empty["total_snippets"] == 0 and empty["mean_snippets_per_note"] == 0.0
    assert 1_885_642 + 6_918_389 == 8_804_031


def test_serialization_roundtrips(synthetic, lexicon, library, trained):
    corpus, _ = synthetic
    clf, _, _ = trained
    result = classify_corpus(corpus, lexicon, library, clf.model_, explain=True)
    for c in result.snippets[:300]:
        assert SnippetClassification.from_dict(c.to_dict()) == c
    for d in result.documents[:50]:
        assert DocumentClassification.from_dict(d.to_dict()) == d
    for p in result.patients[:50]:
        assert PatientNlpStatus.from_dict(p.to_dict()) == p


def test_estimator_api(labelled_snippets, library):
    snippets, y = labelled_snippets
    clf = CascadeClassifier(library, epochs=3, max_unigrams=100, max_bigrams=50)
    assert clf.get_params()["epochs"] == 3
    clf.fit(snippets[:800], y[:800])
    assert clf.score(snippets[800:1200], y[800:1200]) > 0.85
    with pytest.raises(ValueError):
        CascadeClassifier().fit(snippets[:10], y[:10])
