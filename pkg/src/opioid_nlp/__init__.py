"""Rules-plus-SVM phenotyping of problematic opioid use in clinical notes.

Pipeline: key-phrase snippets are cut from notes, a categorized regex
library votes on each snippet, a linear SVM handles snippets the rules leave
undecided, and the per-patient results feed ICD/NLP cohort comparisons.
"""
from .cascade import (
    CascadeClassifier,
    CorpusClassification,
    DocumentClassification,
    PatientNlpStatus,
    SnippetClassification,
    classification_report,
    classify_corpus,
    classify_snippet,
)
from .cohort import (
    GroupAssignment,
    assign_groups,
    build_comparison_tables,
    check_partition,
    derive_variables,
    flag_icd_oud,
    load_comorbidity_map,
    positive_note_profile,
)
from .corpus import Corpus, CorpusError, corpus_stats, emit_corpus, ingest_corpus
from .features import NgramVectorizer, Vocabulary, build_vocabulary, preprocess, vectorize
from .learner import LinearModel, PegasosSVM, load_model, predict, save_model, split_train_test, train
from .lexicon import KeyPhrase, Lexicon, Snippet, extract_snippets, find_key_phrases, load_lexicon
from .metrics import ConfusionMatrix, MetricReport, compute_metrics, confusion, percent_agreement
from .rules import RuleLibrary, classify_by_rules, explain_rules, load_rule_library
from .stats import asd_binary, asd_continuous, chi_square_test, format_p, welch_t_test
from .synth import GroundTruth, SynthConfig, generate_synthetic_corpus

__version__ = "0.1.0"

__all__ = [
    "CascadeClassifier", "ConfusionMatrix", "Corpus", "CorpusClassification", "CorpusError",
    "DocumentClassification", "GroundTruth", "GroupAssignment", "KeyPhrase", "Lexicon", "LinearModel",
    "MetricReport", "NgramVectorizer", "PatientNlpStatus", "PegasosSVM", "RuleLibrary", "Snippet",
    "SnippetClassification", "SynthConfig", "Vocabulary", "asd_binary", "asd_continuous", "assign_groups",
    "build_comparison_tables", "build_vocabulary", "check_partition", "chi_square_test",
    "classification_report", "classify_by_rules", "classify_corpus", "classify_snippet", "compute_metrics",
    "confusion", "corpus_stats", "derive_variables", "emit_corpus", "explain_rules", "extract_snippets",
    "find_key_phrases", "flag_icd_oud", "format_p", "generate_synthetic_corpus", "ingest_corpus",
    "load_comorbidity_map", "load_lexicon", "load_model", "load_rule_library", "percent_agreement",
    "positive_note_profile", "predict", "preprocess", "save_model", "split_train_test", "train", "vectorize",
    "welch_t_test",
]
