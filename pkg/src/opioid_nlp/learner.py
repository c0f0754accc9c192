"""Linear hinge-loss classifier trained by stochastic sub-gradient descent.

The optimizer is Pegasos: at step ``t`` the learning rate is ``1/(lam*t)``,
samples are visited in a seeded random order each epoch and the iterate is
projected onto the ball of radius ``1/sqrt(lam)``. The intercept is handled
as an extra always-one feature, so it is regularized like the other weights.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .features import ENCODING, FeatureVector, Vocabulary, to_matrix
from .rules import NEGATIVE, POSITIVE

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 20
_MAGIC = "# opioid-nlp linear model"


class ModelError(ValueError):
    pass


class ModelVersionError(ModelError):
    pass


class ChecksumError(ModelError):
    pass


def encode_labels(y) -> np.ndarray:
    out = np.empty(len(y), dtype=np.float64)
    for i, label in enumerate(y):
        if label in (POSITIVE, 1, 1.0, True):
            out[i] = 1.0
        elif label in (NEGATIVE, -1, -1.0, 0, False):
            out[i] = -1.0
        else:
            raise ValueError(f"unrecognized label {label!r}")
    return out


def split_train_test(items: Sequence, labels: Sequence[str], train_fraction: float = 0.8, seed: int = 0):
    """Stratified, seeded split. Returns ``(train_indices, test_indices)``, each sorted."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie strictly between 0 and 1, got {train_fraction}")
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)
    train, test = [], []
    for label in sorted(by_class):
        idx = by_class[label]
        if len(idx) < 2:
            raise ValueError(f"class {label!r} has {len(idx)} example(s); need at least 2")
        order = rng.permutation(len(idx))
        n_train = min(max(int(round(train_fraction * len(idx))), 1), len(idx) - 1)
        train.extend(idx[k] for k in order[:n_train])
        test.extend(idx[k] for k in order[n_train:])
    return sorted(train), sorted(test)


def hinge_objective(X, y, w, b, lam) -> float:
    margins = y * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (w @ w + b * b))


class PegasosSVM(ClassifierMixin, BaseEstimator):
    """L2-regularized linear SVM (primal hinge loss) fitted with Pegasos.

    Parameters
    ----------
    lam : float, default=1e-4
        Regularization strength; the objective is
        ``mean(hinge) + lam/2 * (||w||^2 + b^2)``.
    epochs : int, default=20
        Passes over the training data.
    random_state : int, default=0
        Seed for the per-epoch shuffles.
    project : bool, default=True
        Apply the Pegasos projection step after each update.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    classes_ : ndarray of str
        ``["Negative", "Positive"]``.
    objective_curve_ : list of float
        Training objective after each epoch.
    """

    def __init__(self, lam=DEFAULT_LAMBDA, epochs=DEFAULT_EPOCHS, random_state=0, project=True):
        self.lam = lam
        self.epochs = epochs
        self.random_state = random_state
        self.project = project

    def fit(self, X, y):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if int(self.epochs) < 1:
            raise ValueError("epochs must be at least 1")
        X = sp.csr_matrix(check_array(X, accept_sparse="csr", dtype=np.float64))
        X.sum_duplicates()
        yy = encode_labels(list(y))
        if X.shape[0] != len(yy):
            raise ValueError("X and y differ in length")
        if len(set(yy)) < 2:
            raise ValueError("training data must contain both classes")
        n, d = X.shape
        lam = float(self.lam)
        indptr, indices, data = X.indptr, X.indices, X.data
        rng = np.random.default_rng(self.random_state)

        # w = scale * v (intercept is v[d]); keeps the shrink step O(1)
        v = np.zeros(d + 1)
        scale = 1.0
        sq_norm_v = 0.0
        radius = 1.0 / math.sqrt(lam)
        t = 0
        curve = []
        for epoch in range(int(self.epochs)):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                lo, hi = indptr[i], indptr[i + 1]
                cols = indices[lo:hi]
                vals = data[lo:hi]
                margin = yy[i] * scale * (float(v[cols] @ vals) + v[d])
                scale *= 1.0 - eta * lam
                if scale == 0.0:
                    v[:] = 0.0
                    sq_norm_v = 0.0
                    scale = 1.0
                elif scale < 1e-6:
                    # fold the scale back in before 1/scale blows up
                    v *= scale
                    sq_norm_v = float(v @ v)
                    scale = 1.0
                if margin < 1.0:
                    step = eta * yy[i] / scale
                    old = v[cols]
                    sq_norm_v += float(2.0 * step * (old @ vals) + step * step * (vals @ vals))
                    v[cols] = old + step * vals
                    sq_norm_v += 2.0 * step * v[d] + step * step
                    v[d] += step
                if self.project and sq_norm_v > 0.0:
                    norm = scale * math.sqrt(sq_norm_v)
                    if norm > radius:
                        scale *= radius / norm
            w = scale * v[:d]
            b = scale * v[d]
            obj = hinge_objective(X, yy, w, b, lam)
            if not math.isfinite(obj):
                raise FloatingPointError(f"objective diverged at epoch {epoch + 1}; check lam")
            curve.append(obj)
            logger.debug("epoch %d objective %.6f", epoch + 1, obj)
            # refresh the running norm to keep rounding drift bounded
            sq_norm_v = float(v @ v)
        self.coef_ = scale * v[:d]
        self.intercept_ = float(scale * v[d])
        self.classes_ = np.array([NEGATIVE, POSITIVE], dtype=object)
        self.objective_curve_ = curve
        self.n_features_in_ = d
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_array(X, accept_sparse="csr", dtype=np.float64)
        if X.shape[1] != self.coef_.shape[0]:
            raise ValueError(f"X has {X.shape[1]} features, model expects {self.coef_.shape[0]}")
        return np.asarray(X @ self.coef_).ravel() + self.intercept_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, POSITIVE, NEGATIVE).astype(object)


@dataclass
class LinearModel:
    """Trained weights bound to the vocabulary they index."""

    vocabulary: Vocabulary
    weights: np.ndarray  # n-gram weights followed by the position weight
    bias: float
    hyperparameters: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION
    encoding: str = ENCODING

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.vocabulary.n_features,):
            raise ModelError(
                f"weight vector has length {self.weights.shape[0]}, vocabulary needs {self.vocabulary.n_features}"
            )
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ModelError("model contains non-finite values")

    @property
    def position_weight(self) -> float:
        return float(self.weights[-1])

    def margin(self, fv: FeatureVector) -> float:
        if fv.indices and fv.indices[-1] >= self.vocabulary.n_ngrams:
            raise ModelError(
                f"feature index {fv.indices[-1]} outside vocabulary of {self.vocabulary.n_ngrams} n-grams"
            )
        total = math.fsum(self.weights[j] for j in fv.indices)
        return total + self.position_weight * fv.position + self.bias

    def decision_function(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        X = to_matrix(vectors, self.vocabulary)
        return np.asarray(X @ self.weights).ravel() + self.bias


def train(vectors: Sequence[FeatureVector], vocabulary: Vocabulary, lam=DEFAULT_LAMBDA,
          epochs=DEFAULT_EPOCHS, seed=0) -> tuple[LinearModel, list[float]]:
    """Fit on labeled feature vectors; returns the model and its objective trace."""
    if not vectors:
        raise ValueError("empty training set")
    if any(fv.label is None for fv in vectors):
        raise ValueError("every training vector needs a label")
    X = to_matrix(vectors, vocabulary)
    svm = PegasosSVM(lam=lam, epochs=epochs, random_state=seed).fit(X, [fv.label for fv in vectors])
    model = LinearModel(
        vocabulary=vocabulary,
        weights=svm.coef_,
        bias=svm.intercept_,
        hyperparameters={"lambda": float(lam), "epochs": int(epochs), "seed": int(seed)},
    )
    return model, svm.objective_curve_


def predict(model: LinearModel, fv: FeatureVector) -> tuple[str, float]:
    """Label and margin; a margin of exactly zero counts as Positive."""
    m = model.margin(fv)
    return (POSITIVE if m >= 0.0 else NEGATIVE), m


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _body_lines(model: LinearModel) -> list[str]:
    voc = model.vocabulary
    hp = model.hyperparameters
    lines = [
        f"lambda={_fmt(hp.get('lambda', DEFAULT_LAMBDA))}",
        f"epochs={hp.get('epochs', DEFAULT_EPOCHS)}",
        f"seed={hp.get('seed', 0)}",
        f"encoding={model.encoding}",
        f"caps={voc.caps[0]},{voc.caps[1]}",
        f"[vocabulary] {voc.n_ngrams}",
    ]
    lines += [f"{t}\t{g}\t{df}" for g, t, df in voc.rows()]
    lines.append(f"[weights] {voc.n_ngrams}")
    lines += [_fmt(w) for w in model.weights[:-1]]
    lines.append(f"[bias]\n{_fmt(model.bias)}")
    lines.append(f"[position_weight]\n{_fmt(model.position_weight)}")
    return lines


def dumps_model(model: LinearModel) -> str:
    body = "\n".join(_body_lines(model)) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{_MAGIC}\nformat_version={model.format_version}\nchecksum=sha256:{digest}\n{body}"


def save_model(model: LinearModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8", newline="\n")


def loads_model(text: str) -> LinearModel:
    head = text.split("\n", 3)
    if len(head) < 4 or head[0] != _MAGIC:
        raise ModelError("not a model file")
    if not head[1].startswith("format_version="):
        raise ModelError("missing format_version")
    try:
        version = int(head[1].split("=", 1)[1])
    except ValueError as exc:
        raise ModelError(f"bad format_version line {head[1]!r}") from exc
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format_version {version} unsupported (expected {FORMAT_VERSION})")
    if not head[2].startswith("checksum=sha256:"):
        raise ModelError("missing checksum")
    body = head[3]
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != head[2].split(":", 1)[1]:
        raise ChecksumError("model checksum mismatch (file truncated or modified)")

    lines = iter(body.split("\n"))
    meta = {}
    for line in lines:
        if line.startswith("[vocabulary]"):
            n_vocab = int(line.split()[1])
            break
        key, _, value = line.partition("=")
        meta[key] = value
    uni, udf, bi, bdf = [], [], [], []
    for _ in range(n_vocab):
        kind, gram, df = next(lines).split("\t")
        if kind == "unigram":
            uni.append(gram)
            udf.append(int(df))
        else:
            a, b = gram.split(" ")
            bi.append((a, b))
            bdf.append(int(df))
    caps = tuple(int(c) for c in meta["caps"].split(","))
    vocabulary = Vocabulary(tuple(uni), tuple(bi), caps, tuple(udf), tuple(bdf))
    if not next(lines).startswith("[weights]"):
        raise ModelError("missing [weights] section")
    weights = [float(next(lines)) for _ in range(n_vocab)]
    if next(lines) != "[bias]":
        raise ModelError("missing [bias] section")
    bias = float(next(lines))
    if next(lines) != "[position_weight]":
        raise ModelError("missing [position_weight] section")
    weights.append(float(next(lines)))
    return LinearModel(
        vocabulary=vocabulary,
        weights=np.array(weights),
        bias=bias,
        hyperparameters={"lambda": float(meta["lambda"]), "epochs": int(meta["epochs"]), "seed": int(meta["seed"])},
        format_version=version,
        encoding=meta["encoding"],
    )


def load_model(path) -> LinearModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
