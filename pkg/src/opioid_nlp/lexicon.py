"""Key-phrase lexicon, token-boundary phrase matching and snippet extraction."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

CATEGORIES = ("SpecificDrugName", "OtherKeyPhrase")
DEFAULT_WINDOW_RADIUS = 50


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class KeyPhrase:
    text: str
    category: str

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(self.text.split(" "))


@dataclass(frozen=True)
class Snippet:
    note_id: str
    patient_id: str
    note_date: dt.date
    note_type: str
    key_phrase: KeyPhrase
    text: str
    kp_token_index: int
    note_token_offset: int
    window_radius: int = DEFAULT_WINDOW_RADIUS

    @property
    def snippet_id(self) -> str:
        return f"{self.note_id}:{self.note_token_offset}"

    def to_dict(self) -> dict:
        return {
            "snippet_id": self.snippet_id,
            "note_id": self.note_id,
            "patient_id": self.patient_id,
            "note_date": self.note_date.isoformat(),
            "note_type": self.note_type,
            "key_phrase": self.key_phrase.text,
            "category": self.key_phrase.category,
            "kp_token_index": self.kp_token_index,
            "note_token_offset": self.note_token_offset,
            "window_radius": self.window_radius,
            "text": self.text,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Snippet":
        return cls(
            note_id=obj["note_id"],
            patient_id=obj["patient_id"],
            note_date=dt.date.fromisoformat(obj["note_date"]),
            note_type=obj["note_type"],
            key_phrase=KeyPhrase(obj["key_phrase"], obj["category"]),
            text=obj["text"],
            kp_token_index=obj["kp_token_index"],
            note_token_offset=obj["note_token_offset"],
            window_radius=obj.get("window_radius", DEFAULT_WINDOW_RADIUS),
        )


def _sort_key(kp: KeyPhrase):
    return (-len(kp.words), -len(kp.text), kp.text)


class Lexicon(Sequence):
    """Immutable, longest-match-first ordered collection of key phrases."""

    def __init__(self, phrases):
        phrases = list(phrases)
        if not phrases:
            raise LexiconError("lexicon is empty")
        seen = set()
        for kp in phrases:
            if kp.text in seen:
                raise LexiconError(f"duplicate key phrase {kp.text!r}")
            seen.add(kp.text)
            if not kp.text or kp.text != kp.text.strip() or kp.text != kp.text.lower():
                raise LexiconError(f"key phrase {kp.text!r} must be lowercase without edge whitespace")
            if not 1 <= len(kp.words) <= 2 or any(normalize_token(w) != w for w in kp.words):
                raise LexiconError(f"key phrase {kp.text!r} must be one or two words without edge punctuation")
            if kp.category not in CATEGORIES:
                raise LexiconError(f"key phrase {kp.text!r} has unknown category {kp.category!r}")
        self._phrases = tuple(sorted(phrases, key=_sort_key))
        # first word -> candidate phrases, longest first
        self._by_first: dict[str, list[KeyPhrase]] = {}
        for kp in self._phrases:
            self._by_first.setdefault(kp.words[0], []).append(kp)

    def __getitem__(self, i):
        return self._phrases[i]

    def __len__(self):
        return len(self._phrases)

    def __repr__(self):
        return f"Lexicon({len(self)} phrases)"

    def get(self, text: str) -> KeyPhrase | None:
        for kp in self._phrases:
            if kp.text == text:
                return kp
        return None

    def candidates(self, word: str) -> list[KeyPhrase]:
        return self._by_first.get(word, [])


def load_lexicon(path=None) -> Lexicon:
    """Read ``phrase<TAB>category`` lines; defaults to the bundled 36-phrase file."""
    if path is None:
        text = resources.files("opioid_nlp").joinpath("data/lexicon.tsv").read_text(encoding="utf-8")
        source = "<bundled lexicon.tsv>"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    phrases = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"{source}:{lineno}: expected 'phrase<TAB>category'")
        phrase, category = parts[0].strip(), parts[1].strip()
        if phrase != phrase.lower():
            raise LexiconError(f"{source}:{lineno}: key phrase {phrase!r} is not lowercase")
        phrases.append(KeyPhrase(" ".join(phrase.split()), category))
    if not phrases:
        raise LexiconError(f"{source}: no key phrases")
    return Lexicon(phrases)


def normalize_token(token: str) -> str:
    """Lowercase and strip leading/trailing non-alphanumeric characters."""
    if token.isalnum():
        return token.lower()
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end].lower()


def find_in_tokens(norm: Sequence[str], lexicon: Lexicon) -> list[tuple[KeyPhrase, int]]:
    matches = []
    n = len(norm)
    for i, word in enumerate(norm):
        for kp in lexicon.candidates(word):
            k = len(kp.words)
            if i + k <= n and tuple(norm[i:i + k]) == kp.words:
                matches.append((kp, i))
                break
    return matches


def find_key_phrases(text: str, lexicon: Lexicon) -> list[tuple[str, int]]:
    """Every longest-match key-phrase occurrence as ``(phrase, raw token index)``.

    Tokens are whitespace-delimited; each is compared case-insensitively after
    stripping edge punctuation. At a given start position only the longest
    phrase is reported, but a shorter phrase starting later inside a longer
    match is still its own occurrence.
    """
    norm = [normalize_token(t) for t in text.split()]
    return [(kp.text, i) for kp, i in find_in_tokens(norm, lexicon)]


def extract_snippets(note, lexicon: Lexicon, window_radius: int = DEFAULT_WINDOW_RADIUS) -> list[Snippet]:
    if window_radius < 0:
        raise ValueError("window_radius must be non-negative")
    tokens = note.text.split()
    norm = [normalize_token(t) for t in tokens]
    snippets = []
    for kp, i in find_in_tokens(norm, lexicon):
        lo = max(0, i - window_radius)
        hi = min(len(tokens), i + len(kp.words) + window_radius)
        snippets.append(
            Snippet(
                note_id=note.note_id,
                patient_id=note.patient_id,
                note_date=note.note_date,
                note_type=note.note_type,
                key_phrase=kp,
                text=" ".join(tokens[lo:hi]),
                kp_token_index=i - lo,
                note_token_offset=i,
                window_radius=window_radius,
            )
        )
    return snippets
