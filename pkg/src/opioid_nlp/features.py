"""Snippet preprocessing, n-gram vocabulary selection and sparse vectorization.

Feature layout for a vocabulary with ``U`` unigrams and ``B`` bigrams is
``[unigram_0 .. unigram_{U-1}, bigram_0 .. bigram_{B-1}, position]``.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .lexicon import Snippet

DEFAULT_MAX_UNIGRAMS = 946
DEFAULT_MAX_BIGRAMS = 474
DEFAULT_MIN_DF = 2
ENCODING = "binary-presence+normalized-position"

_NON_ALNUM = re.compile(r"[^a-z0-9]+")
_LETTERS = re.compile(r"[a-z]+")
_ALNUM = re.compile(r"[a-z0-9]+")


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    kp_index: int

    def __post_init__(self):
        if not 0 <= self.kp_index < len(self.tokens):
            raise FeatureError(f"kp_index {self.kp_index} outside 0..{len(self.tokens) - 1}")


@dataclass(frozen=True)
class Vocabulary:
    unigrams: tuple[str, ...]
    bigrams: tuple[tuple[str, str], ...]
    caps: tuple[int, int] = (DEFAULT_MAX_UNIGRAMS, DEFAULT_MAX_BIGRAMS)
    unigram_df: tuple[int, ...] = ()
    bigram_df: tuple[int, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.unigrams) > self.caps[0] or len(self.bigrams) > self.caps[1]:
            raise FeatureError("vocabulary exceeds its caps")
        if len(set(self.unigrams)) != len(self.unigrams) or len(set(self.bigrams)) != len(self.bigrams):
            raise FeatureError("vocabulary contains duplicates")
        for u in self.unigrams:
            if not _LETTERS.fullmatch(u):
                raise FeatureError(f"unigram {u!r} is not all letters")
        for a, b in self.bigrams:
            if not (_LETTERS.fullmatch(a) and _ALNUM.fullmatch(b)):
                raise FeatureError(f"bigram {(a, b)!r} violates character constraints")
        index = {u: i for i, u in enumerate(self.unigrams)}
        index.update({bg: len(self.unigrams) + j for j, bg in enumerate(self.bigrams)})
        object.__setattr__(self, "_index", index)

    @property
    def n_ngrams(self) -> int:
        return len(self.unigrams) + len(self.bigrams)

    @property
    def n_features(self) -> int:
        return self.n_ngrams + 1

    @property
    def position_index(self) -> int:
        return self.n_ngrams

    def index(self, ngram) -> int | None:
        return self._index.get(ngram)

    def rows(self):
        """(ngram text, type, document frequency) for every entry in feature order."""
        udf = self.unigram_df or (0,) * len(self.unigrams)
        bdf = self.bigram_df or (0,) * len(self.bigrams)
        for u, df in zip(self.unigrams, udf):
            yield u, "unigram", df
        for (a, b), df in zip(self.bigrams, bdf):
            yield f"{a} {b}", "bigram", df

    def to_tsv(self) -> str:
        lines = ["ngram\ttype\tdocument_frequency"]
        lines += [f"{g}\t{t}\t{df}" for g, t, df in self.rows()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FeatureVector:
    indices: tuple[int, ...]
    position: float
    label: str | None = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise FeatureError("indices must be strictly increasing")
        if not 0.0 <= self.position <= 1.0:
            raise FeatureError(f"position {self.position} outside [0, 1]")

    def dense(self, vocabulary: Vocabulary) -> np.ndarray:
        x = np.zeros(vocabulary.n_features)
        x[list(self.indices)] = 1.0
        x[vocabulary.position_index] = self.position
        return x


def preprocess_text(text: str, kp_token_index: int) -> TokenSequence:
    """Lowercase, whitespace-tokenize, strip non-alphanumerics, drop empty tokens."""
    tokens = []
    kp_index = None
    for i, raw in enumerate(text.lower().split()):
        tok = _NON_ALNUM.sub("", raw)
        if i == kp_token_index:
            if not tok:
                raise FeatureError(f"key-phrase token {raw!r} vanished during preprocessing")
            kp_index = len(tokens)
        if tok:
            tokens.append(tok)
    if kp_index is None:
        raise FeatureError(f"kp_token_index {kp_token_index} beyond the snippet's tokens")
    return TokenSequence(tuple(tokens), kp_index)


def preprocess(snippet: Snippet) -> TokenSequence:
    return preprocess_text(snippet.text, snippet.kp_token_index)


def _unigrams(tokens: Sequence[str]) -> set[str]:
    return {t for t in tokens if _LETTERS.fullmatch(t)}


def _bigrams(tokens: Sequence[str]) -> set[tuple[str, str]]:
    # second element is alphanumeric by construction after preprocessing
    return {(a, b) for a, b in zip(tokens, tokens[1:]) if _LETTERS.fullmatch(a)}


def build_vocabulary(
    sequences: Iterable[TokenSequence],
    max_unigrams: int = DEFAULT_MAX_UNIGRAMS,
    max_bigrams: int = DEFAULT_MAX_BIGRAMS,
    min_df: int = DEFAULT_MIN_DF,
) -> Vocabulary:
    """Pick the most document-frequent eligible n-grams, ties broken lexicographically."""
    udf: Counter = Counter()
    bdf: Counter = Counter()
    n_docs = 0
    for seq in sequences:
        n_docs += 1
        udf.update(_unigrams(seq.tokens))
        bdf.update(_bigrams(seq.tokens))
    if n_docs == 0:
        raise FeatureError("no training sequences")

    def top(counter, cap):
        kept = [(g, df) for g, df in counter.items() if df >= min_df]
        kept.sort(key=lambda item: (-item[1], item[0]))
        return kept[:cap]

    uni = top(udf, max_unigrams)
    bi = top(bdf, max_bigrams)
    if not uni and not bi:
        raise FeatureError(f"no n-gram reaches min_df={min_df}")
    return Vocabulary(
        unigrams=tuple(g for g, _ in uni),
        bigrams=tuple(g for g, _ in bi),
        caps=(max_unigrams, max_bigrams),
        unigram_df=tuple(df for _, df in uni),
        bigram_df=tuple(df for _, df in bi),
    )


def vectorize(seq: TokenSequence, vocabulary: Vocabulary, label: str | None = None) -> FeatureVector:
    hits = set()
    for g in _unigrams(seq.tokens):
        j = vocabulary.index(g)
        if j is not None:
            hits.add(j)
    for g in _bigrams(seq.tokens):
        j = vocabulary.index(g)
        if j is not None:
            hits.add(j)
    return FeatureVector(tuple(sorted(hits)), seq.kp_index / max(1, len(seq.tokens)), label)


def to_matrix(vectors: Sequence[FeatureVector], vocabulary: Vocabulary) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for fv in vectors:
        indices.extend(fv.indices)
        data.extend([1.0] * len(fv.indices))
        indices.append(vocabulary.position_index)
        data.append(fv.position)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(vectors), vocabulary.n_features),
    )


def _as_sequence(item) -> TokenSequence:
    if isinstance(item, TokenSequence):
        return item
    if isinstance(item, Snippet):
        return preprocess(item)
    raise TypeError(f"expected Snippet or TokenSequence, got {type(item).__name__}")


class NgramVectorizer(TransformerMixin, BaseEstimator):
    """Binary n-gram presence plus key-phrase position, as a scikit-learn transformer.

    Parameters
    ----------
    max_unigrams : int, default=946
        Cap on all-letter unigrams kept in the vocabulary.
    max_bigrams : int, default=474
        Cap on bigrams whose first word is all letters.
    min_df : int, default=2
        Minimum number of training snippets an n-gram must occur in.

    Attributes
    ----------
    vocabulary_ : Vocabulary
        Selected n-grams, set by ``fit``.
    """

    def __init__(self, max_unigrams=DEFAULT_MAX_UNIGRAMS, max_bigrams=DEFAULT_MAX_BIGRAMS, min_df=DEFAULT_MIN_DF):
        self.max_unigrams = max_unigrams
        self.max_bigrams = max_bigrams
        self.min_df = min_df

    def fit(self, X, y=None):
        seqs = [_as_sequence(x) for x in X]
        self.vocabulary_ = build_vocabulary(seqs, self.max_unigrams, self.max_bigrams, self.min_df)
        return self

    def transform(self, X) -> sp.csr_matrix:
        check_is_fitted(self, "vocabulary_")
        return to_matrix([vectorize(_as_sequence(x), self.vocabulary_) for x in X], self.vocabulary_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        names = list(self.vocabulary_.unigrams) + [f"{a} {b}" for a, b in self.vocabulary_.bigrams]
        return np.asarray(names + ["__position__"], dtype=object)
