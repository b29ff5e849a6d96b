"""Per-dictionary context models and smooth matching.

A context model scores how strongly the surroundings of a token span look
like the surroundings of a dictionary's terms. Ten non-overlapping windows
(sizes 1, 2, 4, 8, 16 on each side) each contribute a naive-Bayes log-odds
feature; a small logistic layer combines the ten features into a membership
probability. Positions whose probability clears the dictionary's threshold
gamma are "smooth matches", counted by the smoothed document feature.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus, NgramRef, keyword_search
from .dictionary import Dictionary, TokenMatcher, corpus_matches, literal_matches
from .errors import DataError, StateError
from .optim import Penalty, fit_logistic

IN_DICTIONARY = "in"
OUT_OF_DICTIONARY = "out"
CLASSES = (IN_DICTIONARY, OUT_OF_DICTIONARY)

WINDOW_SIZES = (1, 2, 4, 8, 16)

# Largest float strictly below 1; membership probabilities are clamped into
# (0, 1) so a threshold of exactly 1.0 can never be met.
_MAX_PROB = float(np.nextafter(1.0, 0.0))
_MIN_PROB = 1e-300


@dataclass(frozen=True)
class WindowSpec:
    """One context window: a token-distance band on one side of the span.

    A window of size s covers distances [s, 2s) from the span edge, so the
    five sizes tile distances 1..31 without overlapping each other or the
    span itself.
    """

    side: str  # "before" | "after"
    size: int

    @property
    def offset_range(self) -> tuple[int, int]:
        return (self.size, 2 * self.size)


#: Canonical window order: five before-windows nearest-first, then five
#: after-windows nearest-first. theta[i+1] weighs WINDOWS[i].
WINDOWS: tuple[WindowSpec, ...] = tuple(
    [WindowSpec("before", s) for s in WINDOW_SIZES]
    + [WindowSpec("after", s) for s in WINDOW_SIZES]
)


@dataclass(frozen=True)
class ContextInstance:
    """A target span plus the unigram sets of its ten windows."""

    ref: NgramRef
    windows: tuple[frozenset[str], ...]
    label: Optional[str] = None  # "in" | "out" | None


def extract_instance(corpus: Corpus, ref: NgramRef,
                     label: Optional[str] = None) -> ContextInstance:
    """Build the ten window unigram sets for a span.

    Windows are truncated at document boundaries (possibly empty) and never
    include tokens of the span itself.
    """
    doc = corpus.doc(ref.doc_id)
    toks = doc.tokens
    n = len(toks)
    if ref.start < 0 or ref.length < 1 or ref.end > n:
        raise DataError(
            f"invalid ngram ref: start={ref.start} length={ref.length} in "
            f"{n}-token document", code="invalid_ref")
    windows = []
    for spec in WINDOWS:
        lo, hi = spec.offset_range
        if spec.side == "before":
            # distances lo..hi-1 before the first token
            a = max(0, ref.start - hi + 1)
            b = max(0, ref.start - lo + 1)
        else:
            # distances lo..hi-1 past the last token
            a = min(n, ref.end + lo - 1)
            b = min(n, ref.end + hi - 1)
        windows.append(frozenset(toks[a:b]))
    return ContextInstance(ref=ref, windows=tuple(windows), label=label)


@dataclass
class ContextModel:
    """Naive-Bayes window statistics plus logistic weights for one dictionary.

    ``window_counts[i][c][token]`` counts training instances of class c that
    had ``token`` in window i; ``class_totals[i][c]`` is the matching sum.
    ``theta`` holds the bias at index 0 and one weight per window. Treated
    as immutable once trained; safe for concurrent scoring.
    """

    dictionary_id: str
    laplace_alpha: float = 1.0
    vocab: dict[str, int] = field(default_factory=dict)
    window_counts: list[dict[str, dict[str, int]]] = field(
        default_factory=lambda: [{c: {} for c in CLASSES} for _ in WINDOWS])
    class_totals: list[dict[str, int]] = field(
        default_factory=lambda: [{c: 0 for c in CLASSES} for _ in WINDOWS])
    theta: Optional[np.ndarray] = None
    trained_on: dict[str, int] = field(
        default_factory=lambda: {c: 0 for c in CLASSES})
    iterations: int = 0
    final_objective: float = 0.0
    _tables: Optional[tuple] = field(default=None, repr=False, compare=False)

    def counts_populated(self) -> bool:
        return all(self.trained_on[c] > 0 for c in CLASSES)

    def is_trained(self) -> bool:
        return self.counts_populated() and self.theta is not None

    def _logodds_tables(self) -> tuple[list[dict[str, float]], list[float]]:
        """Per-window token -> log-odds contribution, plus the fallback for
        tokens unseen at training (the pure alpha-mass ratio)."""
        if self._tables is None:
            v = len(self.vocab)
            alpha = self.laplace_alpha
            tables: list[dict[str, float]] = []
            defaults: list[float] = []
            for i in range(len(WINDOWS)):
                c_in = self.window_counts[i][IN_DICTIONARY]
                c_out = self.window_counts[i][OUT_OF_DICTIONARY]
                denom_in = self.class_totals[i][IN_DICTIONARY] + alpha * v
                denom_out = self.class_totals[i][OUT_OF_DICTIONARY] + alpha * v
                default = math.log(alpha / denom_in) - math.log(alpha / denom_out)
                tbl = {}
                for tok in set(c_in) | set(c_out):
                    p_in = (c_in.get(tok, 0) + alpha) / denom_in
                    p_out = (c_out.get(tok, 0) + alpha) / denom_out
                    tbl[tok] = math.log(p_in) - math.log(p_out)
                tables.append(tbl)
                defaults.append(default)
            object.__setattr__(self, "_tables", (tables, defaults))
        return self._tables

    def to_json(self) -> dict:
        return {
            "version": "context-model/1",
            "dictionary_id": self.dictionary_id,
            "laplace_alpha": self.laplace_alpha,
            "windows": [{"side": w.side, "size": w.size} for w in WINDOWS],
            "vocab": self.vocab,
            "window_counts": self.window_counts,
            "class_totals": self.class_totals,
            "theta": None if self.theta is None else [float(t) for t in self.theta],
            "trained_on": self.trained_on,
            "training": {"iterations": self.iterations,
                         "objective": self.final_objective},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContextModel":
        if obj.get("version") != "context-model/1":
            raise DataError(f"unsupported context model version {obj.get('version')!r}",
                            code="bad_version")
        theta = obj.get("theta")
        return cls(
            dictionary_id=obj["dictionary_id"],
            laplace_alpha=obj["laplace_alpha"],
            vocab=obj["vocab"],
            window_counts=obj["window_counts"],
            class_totals=obj["class_totals"],
            theta=None if theta is None else np.asarray(theta, dtype=float),
            trained_on=obj["trained_on"],
            iterations=obj["training"]["iterations"],
            final_objective=obj["training"]["objective"],
        )


def load_context_model(path) -> ContextModel:
    with open(path, encoding="utf-8") as fh:
        return ContextModel.from_json(json.load(fh))


def save_context_model(model: ContextModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, ensure_ascii=False)
        fh.write("\n")


def nb_window_logodds(model: ContextModel, window_index: int,
                      unigrams: frozenset[str] | set[str]) -> float:
    """Log-odds that the span is in-dictionary given one window's unigrams.

    Sums log p(u|in, window) - log p(u|out, window) over the unigram set,
    with Laplace-smoothed estimates over the model vocabulary. The class
    prior is deliberately excluded (the logistic bias absorbs it). An empty
    window is neutral: 0.0. ``window_index`` is 1-based (1..10).
    """
    if not model.counts_populated():
        raise StateError("context model has no training counts", code="untrained_model")
    if not 1 <= window_index <= len(WINDOWS):
        raise DataError(f"window index {window_index} outside 1..{len(WINDOWS)}",
                        code="bad_window")
    tables, defaults = model._logodds_tables()
    tbl = tables[window_index - 1]
    default = defaults[window_index - 1]
    total = 0.0
    for u in unigrams:
        total += tbl.get(u, default)
    return total


def _clamp_prob(p: float) -> float:
    return min(max(p, _MIN_PROB), _MAX_PROB)


def predict_membership(model: ContextModel, instance: ContextInstance) -> float:
    """Probability the instance's span belongs to the dictionary.

    sigmoid(theta_0 + sum_i c_i * theta_i) with c_i the window log-odds,
    clamped into the open interval (0, 1).
    """
    if not model.is_trained():
        raise StateError("context model not trained", code="untrained_model")
    tables, defaults = model._logodds_tables()
    theta = model.theta
    z = theta[0]
    for i, window in enumerate(instance.windows):
        th = theta[i + 1]
        if th == 0.0 or not window:
            continue
        tbl = tables[i]
        default = defaults[i]
        c = 0.0
        for u in window:
            c += tbl.get(u, default)
        z += th * c
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-min(z, 700.0)))
    else:
        ez = math.exp(max(z, -700.0))
        p = ez / (1.0 + ez)
    return _clamp_prob(p)


def instance_features(model: ContextModel, instance: ContextInstance) -> np.ndarray:
    """The ten window log-odds features of one instance."""
    return np.array([nb_window_logodds(model, i + 1, w)
                     for i, w in enumerate(instance.windows)])


def sample_training_instances(corpus: Corpus, d: Dictionary,
                              negative_ratio: float = 10.0, seed: int = 0,
                              max_positives: int = 100_000) -> list[ContextInstance]:
    """Labeled context instances for training a dictionary's context model.

    Positives are all literal-match spans (uniformly subsampled above
    ``max_positives``); negatives are uniform random unigram positions that
    do not fall inside any literal match, ``negative_ratio`` per positive.
    Deterministic given the seed.
    """
    if len(corpus) == 0:
        raise DataError("corpus is empty", code="empty_corpus")
    if negative_ratio <= 0:
        raise DataError("negative_ratio must be positive", code="bad_ratio")
    rng = random.Random(seed)
    match_lists = corpus_matches(corpus, d)

    positives: list[NgramRef] = []
    covered: dict[str, set[int]] = {}
    for doc in corpus.documents:
        spans = covered.setdefault(doc.id, set())
        for start, length, _term in match_lists[doc.id].matches:
            positives.append(NgramRef(doc.id, start, length))
            spans.update(range(start, start + length))
    if not positives:
        raise DataError("dictionary has no corpus support", code="no_corpus_support")
    if len(positives) > max_positives:
        positives = rng.sample(positives, max_positives)
        positives.sort(key=lambda r: (r.doc_id, r.start, r.length))

    negatives_pool: list[NgramRef] = []
    for doc in corpus.documents:
        spans = covered[doc.id]
        negatives_pool.extend(NgramRef(doc.id, i, 1)
                              for i in range(len(doc.tokens)) if i not in spans)
    want = int(round(negative_ratio * len(positives)))
    if want >= len(negatives_pool):
        negatives = negatives_pool
    else:
        negatives = rng.sample(negatives_pool, want)
        negatives.sort(key=lambda r: (r.doc_id, r.start, r.length))

    instances = [extract_instance(corpus, r, IN_DICTIONARY) for r in positives]
    instances.extend(extract_instance(corpus, r, OUT_OF_DICTIONARY) for r in negatives)
    return instances


def train_context_model(instances: Sequence[ContextInstance],
                        l2_lambda: float = 1.0, seed: int = 0,
                        dictionary_id: str = "", laplace_alpha: float = 1.0) -> ContextModel:
    """Accumulate window counts and fit the logistic combination.

    The naive-Bayes counts and the logistic weights are fit on the same
    instance set (no held-out split). The bias is unregularized; the solver
    runs to gradient max-norm <= 1e-6 or 1000 iterations. ``seed`` is part
    of the contract for reproducibility; the solver itself is deterministic.
    """
    if l2_lambda <= 0:
        raise DataError("l2_lambda must be positive", code="bad_lambda")
    if laplace_alpha <= 0:
        raise DataError("laplace_alpha must be positive", code="bad_alpha")
    labels = {inst.label for inst in instances}
    if labels != set(CLASSES):
        raise DataError("training instances must include both classes",
                        code="single_class")

    model = ContextModel(dictionary_id=dictionary_id, laplace_alpha=laplace_alpha)
    vocab_tokens: set[str] = set()
    for inst in instances:
        model.trained_on[inst.label] += 1
        for i, window in enumerate(inst.windows):
            counts = model.window_counts[i][inst.label]
            for tok in window:
                counts[tok] = counts.get(tok, 0) + 1
            model.class_totals[i][inst.label] += len(window)
            vocab_tokens.update(window)
    model.vocab = {tok: i for i, tok in enumerate(sorted(vocab_tokens))}

    X = np.array([instance_features(model, inst) for inst in instances])
    y = np.array([1.0 if inst.label == IN_DICTIONARY else 0.0 for inst in instances])
    fit = fit_logistic(X, y, Penalty.l2(l2_lambda))
    model.theta = fit.weights
    model.iterations = fit.iterations
    model.final_objective = fit.objective
    return model


@dataclass(frozen=True)
class SmoothMatchList:
    """Smooth matches of one dictionary in one document: candidate spans
    whose membership probability reached the dictionary's gamma."""

    dictionary_id: str
    doc_id: str
    matches: tuple[tuple[NgramRef, float], ...]

    @property
    def count(self) -> int:
        return len(self.matches)


def _candidate_refs(corpus: Corpus, d: Dictionary, doc_id: str,
                    matcher: Optional[TokenMatcher] = None) -> list[NgramRef]:
    # Candidates: every unigram position, plus literal multi-token term
    # spans. Evaluating all possible spans would be quadratic.
    doc = corpus.doc(doc_id)
    refs = [NgramRef(doc_id, i, 1) for i in range(len(doc.tokens))]
    seen_spans: set[tuple[int, int]] = set()
    for start, length, _term in literal_matches(corpus, d, doc_id, matcher).matches:
        if length > 1 and (start, length) not in seen_spans:
            seen_spans.add((start, length))
            refs.append(NgramRef(doc_id, start, length))
    return refs


def score_candidates(corpus: Corpus, model: ContextModel, d: Dictionary,
                     doc_id: str, matcher: Optional[TokenMatcher] = None
                     ) -> list[tuple[NgramRef, float]]:
    """Membership probability for every candidate position of one document."""
    if not model.is_trained():
        raise StateError("context model not trained", code="untrained_model")
    return [(ref, predict_membership(model, extract_instance(corpus, ref)))
            for ref in _candidate_refs(corpus, d, doc_id, matcher)]


def smooth_matches(corpus: Corpus, model: ContextModel, d: Dictionary,
                   doc_id: str, matcher: Optional[TokenMatcher] = None) -> SmoothMatchList:
    """Candidate positions whose membership probability is >= gamma."""
    if d.gamma is None:
        raise StateError(f"dictionary {d.id!r} has no gamma: calibrate first",
                         code="uncalibrated")
    hits = tuple((ref, p) for ref, p in score_candidates(corpus, model, d, doc_id, matcher)
                 if p >= d.gamma)
    return SmoothMatchList(dictionary_id=d.id, doc_id=doc_id, matches=hits)


def smooth_match_counts(corpus: Corpus, model: ContextModel, d: Dictionary,
                        doc_ids: Optional[Sequence[str]] = None) -> dict[str, int]:
    """Smooth-match count per document, sharing one automaton for the scan."""
    if d.gamma is None:
        raise StateError(f"dictionary {d.id!r} has no gamma: calibrate first",
                         code="uncalibrated")
    matcher = TokenMatcher(d.terms)
    ids = corpus.doc_ids if doc_ids is None else list(doc_ids)
    gamma = d.gamma
    return {doc_id: sum(1 for _ref, p in score_candidates(corpus, model, d, doc_id, matcher)
                        if p >= gamma)
            for doc_id in ids}


def smoothed_feature(smooth_match_count: int) -> float:
    """Smoothed document feature: natural log of (1 + smooth match count)."""
    if smooth_match_count < 0:
        raise DataError("match count must be nonnegative", code="negative_count")
    return math.log1p(smooth_match_count)


def calibrate_threshold(corpus: Corpus, model: ContextModel, d: Dictionary,
                        target_avg_matches: Optional[float] = None) -> float:
    """Choose gamma so the corpus-mean smooth matches per document hits a target.

    Scores every candidate position corpus-wide and returns the smallest
    candidate probability whose acceptance keeps mean matches per document
    <= target. When the target asks for more matches than candidates exist,
    gamma falls back to the minimum observed probability. The default
    target is the corpus-mean literal match count of the dictionary.
    """
    if len(corpus) == 0:
        raise DataError("corpus is empty", code="empty_corpus")
    if not model.is_trained():
        raise StateError("context model not trained", code="untrained_model")
    matcher = TokenMatcher(d.terms)
    if target_avg_matches is None:
        total_literal = sum(len(matcher.find(doc.tokens)) for doc in corpus.documents)
        target_avg_matches = total_literal / len(corpus)
    if target_avg_matches <= 0:
        raise DataError("calibration target must be positive", code="bad_target")

    probs: list[float] = []
    for doc_id in corpus.doc_ids:
        probs.extend(p for _ref, p in score_candidates(corpus, model, d, doc_id, matcher))
    if not probs:
        raise DataError("corpus has no candidate positions", code="empty_corpus")

    budget = target_avg_matches * len(corpus)
    if len(probs) <= budget:
        return min(probs)
    probs.sort(reverse=True)
    gamma = probs[0]
    cum = 0
    i = 0
    while i < len(probs):
        j = i
        while j < len(probs) and probs[j] == probs[i]:
            j += 1
        cum = j
        if cum <= budget:
            gamma = probs[i]
        else:
            break
        i = j
    return gamma


@dataclass(frozen=True)
class ContextRow:
    """One line of the ranked-context view for a term occurrence."""

    percentile: float
    probability: float
    before: str
    target: str
    after: str
    doc_id: str
    start: int


def rank_contexts(corpus: Corpus, model: ContextModel, term: Sequence[str],
                  limit: int = 0) -> list[ContextRow]:
    """Occurrences of a term ranked by descending membership probability.

    Row r (0-based, over all occurrences) gets percentile 100*r/count; the
    before/after texts show up to 8 tokens each side. ``limit`` <= 0 returns
    every row. Absent terms yield an empty list.
    """
    if not model.is_trained():
        raise StateError("context model not trained", code="untrained_model")
    occurrences = keyword_search(corpus, list(term))
    if not occurrences:
        return []
    scored = [(ref, predict_membership(model, extract_instance(corpus, ref)))
              for ref in occurrences]
    scored.sort(key=lambda rp: (-rp[1], rp[0].doc_id, rp[0].start))
    n = len(scored)
    rows = []
    for r, (ref, p) in enumerate(scored):
        if limit > 0 and r >= limit:
            break
        toks = corpus.doc(ref.doc_id).tokens
        rows.append(ContextRow(
            percentile=100.0 * r / n,
            probability=p,
            before=" ".join(toks[max(0, ref.start - 8):ref.start]),
            target=" ".join(toks[ref.start:ref.end]),
            after=" ".join(toks[ref.end:ref.end + 8]),
            doc_id=ref.doc_id,
            start=ref.start,
        ))
    return rows


@dataclass(frozen=True)
class SuggestionList:
    """Candidate terms to add to a dictionary, best first.

    Entries are (term tokens, mean membership probability, occurrence
    count); dictionary members never appear.
    """

    dictionary_id: str
    entries: tuple[tuple[tuple[str, ...], float, int], ...]


def suggest_terms(corpus: Corpus, model: ContextModel, d: Dictionary,
                  max_ngram_len: int = 1, min_occurrences: int = 3,
                  top_k: int = 10) -> SuggestionList:
    """Rank n-grams outside the dictionary by mean membership probability.

    Candidates are all n-grams up to ``max_ngram_len`` tokens occurring at
    least ``min_occurrences`` times; each is scored by averaging the context
    model's prediction over every occurrence.
    """
    if not model.is_trained():
        raise StateError("context model not trained", code="untrained_model")
    exclude = d.term_set()
    occurrences: dict[tuple[str, ...], list[NgramRef]] = {}
    for doc in corpus.documents:
        toks = doc.tokens
        for n in range(1, max_ngram_len + 1):
            for start in range(len(toks) - n + 1):
                term = toks[start:start + n]
                if term in exclude:
                    continue
                occurrences.setdefault(term, []).append(NgramRef(doc.id, start, n))

    scored = []
    for term, refs in occurrences.items():
        if len(refs) < min_occurrences:
            continue
        mean = sum(predict_membership(model, extract_instance(corpus, ref))
                   for ref in refs) / len(refs)
        scored.append((term, mean, len(refs)))
    scored.sort(key=lambda e: (-e[1], e[0]))
    return SuggestionList(dictionary_id=d.id, entries=tuple(scored[:top_k]))
