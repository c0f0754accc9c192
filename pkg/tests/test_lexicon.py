import datetime as dt
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opioid_nlp.corpus import NoteRecord
from opioid_nlp.lexicon import (
    KeyPhrase,
    Lexicon,
    LexiconError,
    Snippet,
    extract_snippets,
    find_key_phrases,
    load_lexicon,
    normalize_token,
)

from oracles import VOCAB, brute_force


def _note(text, note_id="N1"):
    return NoteRecord(note_id, "P1", dt.date(2015, 1, 1), "T", text)


def test_default_lexicon_has_36_phrases(lexicon):
    assert len(lexicon) == 36
    cats = {kp.category for kp in lexicon}
    assert cats == {"SpecificDrugName", "OtherKeyPhrase"}
    assert sum(kp.category == "SpecificDrugName" for kp in lexicon) == 27


def test_longest_first_ordering(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("# comment\nopiate\tOtherKeyPhrase\nopiate abuse\tOtherKeyPhrase\nnorco\tSpecificDrugName\n")
    lex = load_lexicon(path)
    texts = [kp.text for kp in lex]
    assert texts.index("opiate abuse") < texts.index("opiate")


@pytest.mark.parametrize("content, msg", [
    ("norco\tSpecificDrugName\nnorco\tSpecificDrugName\n", "duplicate"),
    ("# nothing\n", "no key phrases"),
    ("Norco\tSpecificDrugName\n", "lowercase"),
    ("norco\tDrug\n", "category"),
])
def test_bad_lexicon_files(tmp_path, content, msg):
    path = tmp_path / "lex.tsv"
    path.write_text(content)
    with pytest.raises(LexiconError, match=msg):
        load_lexicon(path)


def test_longest_match_suppresses_shorter(lexicon):
    assert find_key_phrases("pt reports opiate abuse since 2015", lexicon) == [("opiate abuse", 2)]


def test_every_occurrence_reported(lexicon):
    assert find_key_phrases("Percocet, then more percocet.", lexicon) == [("percocet", 0), ("percocet", 3)]


def test_lorcet_example(lexicon):
    hits = find_key_phrases("pt has pain mostly at night was on lorcet", lexicon)
    assert hits == [("lorcet", 8)]


def test_token_boundaries(lexicon):
    assert find_key_phrases("dependenceX and xmorphine", lexicon) == []
    assert find_key_phrases("(morphine)", lexicon) == [("morphine", 0)]


def test_inner_phrase_at_later_position_is_separate(lexicon):
    # "opioid" is suppressed at 0, but "dependence" starting at 1 is its own occurrence
    assert find_key_phrases("opioid dependence dependence", lexicon) == [
        ("opioid dependence", 0), ("dependence", 1), ("dependence", 2)]


def test_normalize_token():
    assert normalize_token("--Oxycodone!!") == "oxycodone"
    assert normalize_token("5mg") == "5mg"
    assert normalize_token("...") == ""


def test_window_one_word_phrase(lexicon):
    tokens = [f"w{i}" for i in range(120)]
    tokens[60] = "methadone"
    [s] = extract_snippets(_note(" ".join(tokens)), lexicon)
    words = s.text.split()
    # 50 before, the phrase, 50 after: raw tokens 10..110
    assert words[0] == "w10" and words[-1] == "w110"
    assert len(words) == 101 and s.kp_token_index == 50 and s.note_token_offset == 60


def test_window_two_word_phrase(lexicon):
    tokens = [f"w{i}" for i in range(120)]
    tokens[60:62] = ["opiate", "abuse"]
    [s] = extract_snippets(_note(" ".join(tokens)), lexicon)
    words = s.text.split()
    assert words[0] == "w10" and words[-1] == "w111"


def test_window_clamps(lexicon):
    text = "a b c oxycodone d e f g h i"
    [s] = extract_snippets(_note(text), lexicon)
    assert s.text == text and s.kp_token_index == 3


def test_three_occurrences(lexicon):
    text = " ".join(["methadone"] + ["x"] * 30 + ["Methadone,"] + ["y"] * 70 + ["methadone"])
    snippets = extract_snippets(_note(text), lexicon)
    assert len(snippets) == 3
    for s in snippets:
        assert normalize_token(s.text.split()[s.kp_token_index]) == "methadone"
    assert len({(s.key_phrase.text, s.note_token_offset) for s in snippets}) == 3


def test_no_matches_gives_empty(lexicon):
    assert extract_snippets(_note("nothing relevant here"), lexicon) == []


def test_original_casing_preserved(lexicon):
    [s] = extract_snippets(_note("Pt ABUSES Oxycodone 5mg!"), lexicon)
    assert s.text == "Pt ABUSES Oxycodone 5mg!"


def test_snippet_roundtrip(lexicon):
    [s] = extract_snippets(_note("takes morphine daily"), lexicon)
    assert Snippet.from_dict(s.to_dict()) == s
    assert s.snippet_id == "N1:1"


def test_matches_brute_force_on_500_texts(lexicon):
    rng = random.Random(2024)
    for _ in range(500):
        text = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 25)))
        assert find_key_phrases(text, lexicon) == brute_force(text, lexicon), text


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=150), st.integers(0, 60))
def test_snippet_invariants(words, radius):
    lexicon = load_lexicon()
    text = " ".join(words)
    snippets = extract_snippets(_note(text), lexicon, radius)
    assert len(snippets) == len(brute_force(text, lexicon))
    for s in snippets:
        window = s.text.split()
        assert 0 <= s.kp_token_index < len(window)
        assert s.kp_token_index <= radius
        assert len(window) - s.kp_token_index - len(s.key_phrase.words) <= radius
        assert (s.key_phrase.text, s.kp_token_index) in find_key_phrases(s.text, lexicon)


def test_lexicon_rejects_bad_phrases():
    with pytest.raises(LexiconError):
        Lexicon([KeyPhrase("a b c", "OtherKeyPhrase")])
    with pytest.raises(LexiconError):
        Lexicon([KeyPhrase("norco,", "SpecificDrugName")])
