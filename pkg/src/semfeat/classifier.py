"""Document feature assembly, logistic-regression classifiers, and metrics.

Three featurization schemes are supported: TF-IDF Bag-of-Words, literal
dictionary counts, and context-smoothed dictionary counts. Models are
L2- or L1-regularized logistic regressions over the resulting sparse
vectors; evaluation reports exact AUROC, accuracy at 0.5, and the full
precision-recall sweep.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .context import ContextModel, smooth_match_counts, smoothed_feature
from .corpus import Corpus
from .dictionary import Dictionary, TokenMatcher, dict_feature
from .errors import DataError, NotFoundError, StateError
from .optim import Penalty, fit_logistic

BOW_TFIDF = "bow-tfidf"
DICT_LITERAL = "dictionaries-literal"
DICT_SMOOTHED = "dictionaries-smoothed"
SCHEMES = (BOW_TFIDF, DICT_LITERAL, DICT_SMOOTHED)

#: weights with magnitude at or below this count as zero
ZERO_WEIGHT_EPS = 1e-12


@dataclass(frozen=True)
class FeatureSpec:
    """Featurization scheme plus whatever it needs to produce dense ids.

    BoW specs carry the vocabulary (token -> feature id) and the matching
    idf value per id; dictionary schemes carry the ordered dictionary ids
    (feature id = position in that order).
    """

    scheme: str
    vocab: Optional[dict[str, int]] = None
    idf: Optional[tuple[float, ...]] = None
    dictionary_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DataError(f"unknown scheme {self.scheme!r}", code="bad_scheme")
        if self.scheme == BOW_TFIDF:
            if self.vocab is None or self.idf is None:
                raise DataError("bow spec requires vocab and idf", code="bad_spec")
        elif self.dictionary_ids is None:
            raise DataError("dictionary scheme requires dictionary ids", code="bad_spec")

    @property
    def feature_count(self) -> int:
        if self.scheme == BOW_TFIDF:
            return len(self.vocab)
        return len(self.dictionary_ids)

    def to_json(self) -> dict:
        obj: dict = {"scheme": self.scheme}
        if self.scheme == BOW_TFIDF:
            obj["vocab"] = self.vocab
            obj["idf"] = list(self.idf)
        else:
            obj["dictionary_ids"] = list(self.dictionary_ids)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSpec":
        if obj["scheme"] == BOW_TFIDF:
            return cls(scheme=obj["scheme"], vocab=obj["vocab"],
                       idf=tuple(obj["idf"]))
        return cls(scheme=obj["scheme"],
                   dictionary_ids=tuple(obj["dictionary_ids"]))


@dataclass(frozen=True)
class FeatureVector:
    """Sparse feature map for one document; zero values are never stored."""

    doc_id: str
    entries: dict[int, float]


def build_bow_spec(corpus: Corpus, min_df: int = 2) -> FeatureSpec:
    """TF-IDF vocabulary over corpus unigrams with document frequency >= min_df.

    idf(t) = ln((1+N)/(1+df_t)) + 1. Feature ids are assigned in sorted
    token order, so the spec is deterministic for a given corpus.
    """
    if len(corpus) == 0:
        raise DataError("corpus is empty", code="empty_corpus")
    df: dict[str, int] = {}
    for doc in corpus.documents:
        for tok in set(doc.tokens):
            df[tok] = df.get(tok, 0) + 1
    kept = sorted(tok for tok, n in df.items() if n >= min_df)
    if not kept:
        raise DataError(f"no token has document frequency >= {min_df}",
                        code="empty_vocabulary")
    n_docs = len(corpus)
    vocab = {tok: i for i, tok in enumerate(kept)}
    idf = tuple(math.log((1 + n_docs) / (1 + df[tok])) + 1.0 for tok in kept)
    return FeatureSpec(scheme=BOW_TFIDF, vocab=vocab, idf=idf)


def _bow_vector(spec: FeatureSpec, doc_id: str, tokens: Sequence[str]) -> FeatureVector:
    tf: dict[int, int] = {}
    for tok in tokens:
        fid = spec.vocab.get(tok)
        if fid is not None:
            tf[fid] = tf.get(fid, 0) + 1
    entries = {fid: n * spec.idf[fid] for fid, n in tf.items()}
    norm = math.sqrt(sum(v * v for v in entries.values()))
    if norm > 0:
        entries = {fid: v / norm for fid, v in entries.items()}
    return FeatureVector(doc_id=doc_id, entries=entries)


def _require_dictionaries(spec: FeatureSpec,
                          dictionaries: Optional[Mapping[str, Dictionary]]) -> list[Dictionary]:
    if dictionaries is None:
        raise DataError("dictionary scheme requires dictionaries", code="missing_dictionaries")
    out = []
    for did in spec.dictionary_ids:
        if did not in dictionaries:
            raise NotFoundError(f"unknown dictionary {did!r}", code="unknown_dictionary")
        out.append(dictionaries[did])
    return out


def _require_model(context_models: Optional[Mapping[str, ContextModel]],
                   d: Dictionary) -> ContextModel:
    model = None if context_models is None else context_models.get(d.id)
    if model is None or not model.is_trained():
        raise StateError(f"dictionary {d.id!r} has no trained context model",
                         code="untrained_model")
    if d.gamma is None:
        raise StateError(f"dictionary {d.id!r} is not calibrated", code="uncalibrated")
    return model


def featurize_docs(corpus: Corpus, spec: FeatureSpec, doc_ids: Sequence[str],
                   dictionaries: Optional[Mapping[str, Dictionary]] = None,
                   context_models: Optional[Mapping[str, ContextModel]] = None,
                   ) -> list[FeatureVector]:
    """Vectorize many documents, sharing per-dictionary scans.

    For the smoothed scheme every dictionary's candidate positions are
    scored once across the requested documents instead of per call.
    """
    if spec.scheme == BOW_TFIDF:
        return [_bow_vector(spec, did, corpus.doc(did).tokens) for did in doc_ids]

    dicts = _require_dictionaries(spec, dictionaries)
    counts_per_dict: list[dict[str, int]] = []
    if spec.scheme == DICT_LITERAL:
        for d in dicts:
            matcher = TokenMatcher(d.terms)
            counts_per_dict.append(
                {did: len(matcher.find(corpus.doc(did).tokens)) for did in doc_ids})
    else:
        for d in dicts:
            model = _require_model(context_models, d)
            counts_per_dict.append(smooth_match_counts(corpus, model, d, doc_ids))

    feature = dict_feature if spec.scheme == DICT_LITERAL else smoothed_feature
    vectors = []
    for did in doc_ids:
        entries = {}
        for j, counts in enumerate(counts_per_dict):
            value = feature(counts[did])
            if value != 0.0:
                entries[j] = value
        vectors.append(FeatureVector(doc_id=did, entries=entries))
    return vectors


def vectorize(corpus: Corpus, spec: FeatureSpec, doc_id: str,
              dictionaries: Optional[Mapping[str, Dictionary]] = None,
              context_models: Optional[Mapping[str, ContextModel]] = None,
              ) -> FeatureVector:
    """Feature vector of one document under the given spec."""
    corpus.doc(doc_id)  # raise early on unknown documents
    return featurize_docs(corpus, spec, [doc_id], dictionaries, context_models)[0]


@dataclass
class LogRegModel:
    """Trained logistic-regression document classifier."""

    spec: FeatureSpec
    weights: np.ndarray
    bias: float
    penalty: Penalty
    iterations: int
    final_objective: float

    def to_json(self) -> dict:
        nz = {str(i): float(w) for i, w in enumerate(self.weights) if w != 0.0}
        return {
            "version": "logreg/1",
            "spec": self.spec.to_json(),
            "weights": nz,
            "bias": float(self.bias),
            "regularization": self.penalty.to_json(),
            "training": {"iterations": self.iterations,
                         "objective": self.final_objective},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LogRegModel":
        if obj.get("version") != "logreg/1":
            raise DataError(f"unsupported model version {obj.get('version')!r}",
                            code="bad_version")
        spec = FeatureSpec.from_json(obj["spec"])
        weights = np.zeros(spec.feature_count)
        for k, v in obj["weights"].items():
            weights[int(k)] = v
        return cls(spec=spec, weights=weights, bias=obj["bias"],
                   penalty=Penalty.from_json(obj["regularization"]),
                   iterations=obj["training"]["iterations"],
                   final_objective=obj["training"]["objective"])


def load_model(path) -> LogRegModel:
    with open(path, encoding="utf-8") as fh:
        return LogRegModel.from_json(json.load(fh))


def save_model(model: LogRegModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, ensure_ascii=False)
        fh.write("\n")


def train(examples: Sequence[tuple[FeatureVector, int]], penalty: Penalty,
          seed: int = 0, spec: Optional[FeatureSpec] = None) -> LogRegModel:
    """Fit a classifier on (vector, label) pairs.

    Minimizes average logistic loss plus the penalty (bias unregularized).
    Requires both classes present and finite feature values. Deterministic;
    ``seed`` is kept for contract stability, the solver has no randomness.
    """
    if spec is None:
        raise DataError("train requires the feature spec", code="bad_spec")
    if not examples:
        raise DataError("no training examples", code="single_class")
    n_features = spec.feature_count
    rows, cols, vals = [], [], []
    y = np.empty(len(examples))
    for i, (vec, label) in enumerate(examples):
        if label not in (0, 1):
            raise DataError(f"label must be 0/1, got {label!r}", code="bad_labels")
        y[i] = label
        for fid, value in vec.entries.items():
            if not 0 <= fid < n_features:
                raise DataError(f"feature id {fid} outside spec range", code="bad_feature_id")
            if not math.isfinite(value):
                raise DataError(f"non-finite feature value for id {fid}", code="non_finite")
            rows.append(i)
            cols.append(fid)
            vals.append(value)
    X = sparse.csr_matrix((vals, (rows, cols)), shape=(len(examples), n_features))
    fit = fit_logistic(X, y, penalty)
    return LogRegModel(spec=spec, weights=fit.weights[1:], bias=float(fit.weights[0]),
                       penalty=penalty, iterations=fit.iterations,
                       final_objective=fit.objective)


_MAX_PROB = float(np.nextafter(1.0, 0.0))


def predict(model: LogRegModel, v: FeatureVector) -> float:
    """Membership probability sigmoid(bias + w.x), clamped into (0, 1)."""
    z = model.bias
    n = len(model.weights)
    for fid, value in v.entries.items():
        if not 0 <= fid < n:
            raise DataError(f"feature id {fid} outside model spec", code="bad_feature_id")
        z += model.weights[fid] * value
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-min(z, 700.0)))
    else:
        ez = math.exp(max(z, -700.0))
        p = ez / (1.0 + ez)
    return min(max(p, 1e-300), _MAX_PROB)


def exact_auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(score of a positive > score of a negative) + half the tie mass.

    Computed with integer pair counting over score groups, so it matches a
    brute-force O(n^2) pairwise count exactly.
    """
    n_pos = sum(1 for l in labels if l == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("evaluation set contains a single class", code="single_class")
    pairs = sorted(zip(scores, labels))
    wins = 0
    ties = 0
    neg_below = 0
    i = 0
    while i < len(pairs):
        j = i
        group_pos = group_neg = 0
        while j < len(pairs) and pairs[j][0] == pairs[i][0]:
            if pairs[j][1] == 1:
                group_pos += 1
            else:
                group_neg += 1
            j += 1
        wins += group_pos * neg_below
        ties += group_pos * group_neg
        neg_below += group_neg
        i = j
    return (wins + 0.5 * ties) / (n_pos * n_neg)


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float]]:
    """(recall, precision) at every distinct score threshold, descending.

    Threshold t predicts positive where score >= t, so recall is
    nondecreasing along the curve and the last point has recall 1 and
    precision equal to the positive prevalence.
    """
    n_pos = sum(1 for l in labels if l == 1)
    items = sorted(zip(scores, labels), key=lambda sl: -sl[0])
    points = []
    tp = fp = 0
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j][0] == items[i][0]:
            if items[j][1] == 1:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((tp / n_pos, tp / (tp + fp)))
        i = j
    return points


@dataclass(frozen=True)
class EvalReport:
    """Classifier evaluation: exact AUROC, accuracy at 0.5, PR sweep."""

    auroc: float
    accuracy: float
    pr_points: tuple[tuple[float, float], ...]
    positives: int
    negatives: int
    nonzero_weights: int

    def to_json(self) -> dict:
        return {
            "auroc": self.auroc,
            "accuracy": self.accuracy,
            "pr_curve": [{"recall": r, "precision": p} for r, p in self.pr_points],
            "positives": self.positives,
            "negatives": self.negatives,
            "nonzero_weights": self.nonzero_weights,
        }

    def pr_csv(self) -> str:
        lines = ["recall,precision"]
        lines.extend(f"{r!r},{p!r}" for r, p in self.pr_points)
        return "\n".join(lines) + "\n"


def evaluate(model: LogRegModel, test: Sequence[tuple[FeatureVector, int]]) -> EvalReport:
    """Score a labeled test set. Requires both classes present."""
    if not test:
        raise DataError("empty evaluation set", code="single_class")
    scores = [predict(model, vec) for vec, _label in test]
    labels = [label for _vec, label in test]
    auroc = exact_auroc(scores, labels)
    correct = sum(1 for s, l in zip(scores, labels) if (1 if s >= 0.5 else 0) == l)
    return EvalReport(
        auroc=auroc,
        accuracy=correct / len(test),
        pr_points=tuple(pr_curve(scores, labels)),
        positives=sum(labels),
        negatives=len(labels) - sum(labels),
        nonzero_weights=nonzero_weight_count(model),
    )


def nonzero_weight_count(model: LogRegModel) -> int:
    """Number of non-bias weights with magnitude above the zero epsilon."""
    return int(np.sum(np.abs(model.weights) > ZERO_WEIGHT_EPS))
