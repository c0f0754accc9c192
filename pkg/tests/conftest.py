import pytest

from opioid_nlp.cascade import CascadeClassifier
from opioid_nlp.learner import split_train_test
from opioid_nlp.lexicon import extract_snippets, load_lexicon
from opioid_nlp.rules import load_rule_library
from opioid_nlp.synth import generate_synthetic_corpus

SEED = 7
N_PATIENTS = 1200


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def library():
    return load_rule_library()


@pytest.fixture(scope="session")
def synthetic():
    return generate_synthetic_corpus(SEED, N_PATIENTS)


@pytest.fixture(scope="session")
def labelled_snippets(synthetic, lexicon):
    corpus, truth = synthetic
    labels = truth.snippet_labels()
    snippets = [s for note in sorted(corpus.notes, key=lambda n: n.note_id) for s in extract_snippets(note, lexicon)]
    return snippets, [labels[s.snippet_id] for s in snippets]


@pytest.fixture(scope="session")
def trained(labelled_snippets, library):
    snippets, y = labelled_snippets
    train_idx, test_idx = split_train_test(snippets, y, 0.8, SEED)
    clf = CascadeClassifier(library, random_state=SEED).fit([snippets[i] for i in train_idx], [y[i] for i in train_idx])
    return clf, train_idx, test_idx


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    if acceptance and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.RESULTS:
            terminalreporter.write_line(line)
