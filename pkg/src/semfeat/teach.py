"""Interactive teaching sessions: labels, dictionaries, models, sampling.

Every mutation is an event; applying the ordered event log to an empty
session reproduces the exact state (labels, dictionaries, staleness, and,
because training is deterministic, the models bit for bit). That is what
makes crash recovery a pure replay.
"""

from __future__ import annotations

import dataclasses
import random
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

from . import classifier, context
from .classifier import (BOW_TFIDF, DICT_LITERAL, DICT_SMOOTHED, SCHEMES,
                         FeatureSpec, LogRegModel)
from .context import ContextModel
from .corpus import Corpus, keyword_search, tokenize
from .dictionary import Dictionary, validate_dictionary
from .errors import DataError, NotFoundError, StateError
from .optim import Penalty

EVENT_CREATE = "create"
EVENT_LABEL = "label"
EVENT_UPSERT_DICT = "upsert_dictionary"
EVENT_REMOVE_DICT = "remove_dictionary"
EVENT_RETRAIN = "retrain"
EVENT_TRAIN_CONTEXT = "train_context"
EVENT_CALIBRATE = "calibrate"

STRATEGIES = ("uncertainty", "disagreement", "keyword")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Event:
    """One session mutation; the log of these is the source of truth."""

    seq: int
    kind: str
    at: str
    data: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "at": self.at, "data": self.data}

    @classmethod
    def from_json(cls, obj: dict) -> "Event":
        return cls(seq=obj["seq"], kind=obj["kind"], at=obj["at"], data=obj["data"])


@dataclass(frozen=True)
class LabelRecord:
    label: int
    at: str


@dataclass(frozen=True)
class BlindnessReport:
    """Training-set documents the current model gets wrong.

    Each disagreement is (doc_id, teacher label, model score); the error
    rate is disagreements over training-set size.
    """

    disagreements: tuple[tuple[str, int, float], ...]
    training_error_rate: float


@dataclass
class SessionDefaults:
    """Numeric knobs fixed at session creation and reused by every retrain."""

    l2_lambda: float = 1.0
    min_df: int = 2
    negative_ratio: float = 10.0
    laplace_alpha: float = 1.0
    max_positives: int = 100_000

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SessionDefaults":
        return cls(**obj)


class TeachingSession:
    """State of one teaching task over an immutable corpus.

    All mutations go through events (single writer); reads of trained
    models are safe once published.
    """

    def __init__(self, corpus: Corpus, create_event: Event):
        if create_event.kind != EVENT_CREATE:
            raise DataError("first event must be the create event", code="bad_event")
        self.corpus = corpus
        self.labels: dict[str, LabelRecord] = {}
        self.dictionaries: dict[str, Dictionary] = {}
        self.context_models: dict[str, ContextModel] = {}
        self.context_stale: set[str] = set()
        self.current_model: Optional[LogRegModel] = None
        self.current_scheme: Optional[str] = None
        self.model_stale: bool = False
        self.bow_model: Optional[LogRegModel] = None
        self.bow_stale: bool = False
        self.events: list[Event] = []
        self.epoch = 0
        self._bow_spec: Optional[FeatureSpec] = None
        self._apply(create_event)

    # -- construction ----------------------------------------------------

    @classmethod
    def create(cls, corpus: Corpus, task: str, epsilon: float = 0.01,
               seed: int = 0, auto_seed: bool = False,
               session_id: Optional[str] = None,
               defaults: Optional[SessionDefaults] = None,
               at: Optional[str] = None) -> "TeachingSession":
        """Start a session, optionally auto-seeding 5+5 labels from ground truth."""
        if not 0.0 < epsilon <= 1.0:
            raise DataError("epsilon must lie in (0, 1]", code="bad_epsilon")
        event = Event(seq=0, kind=EVENT_CREATE, at=at or _now(), data={
            "session_id": session_id or uuid.uuid4().hex,
            "task": task,
            "epsilon": epsilon,
            "seed": seed,
            "auto_seed": auto_seed,
            "defaults": (defaults or SessionDefaults()).to_json(),
        })
        return cls(corpus, event)

    @classmethod
    def replay(cls, corpus: Corpus, events: Sequence[Event]) -> "TeachingSession":
        """Rebuild a session by applying its full event log in order."""
        if not events:
            raise DataError("empty event log", code="bad_event")
        session = cls(corpus, events[0])
        for event in events[1:]:
            session._apply(event)
        return session

    # -- event machinery -------------------------------------------------

    def _next_event(self, kind: str, data: dict, at: Optional[str] = None) -> Event:
        return Event(seq=self.events[-1].seq + 1 if self.events else 0,
                     kind=kind, at=at or _now(), data=data)

    def _apply(self, event: Event) -> None:
        handler = {
            EVENT_CREATE: self._apply_create,
            EVENT_LABEL: self._apply_label,
            EVENT_UPSERT_DICT: self._apply_upsert_dict,
            EVENT_REMOVE_DICT: self._apply_remove_dict,
            EVENT_RETRAIN: self._apply_retrain,
            EVENT_TRAIN_CONTEXT: self._apply_train_context,
            EVENT_CALIBRATE: self._apply_calibrate,
        }.get(event.kind)
        if handler is None:
            raise DataError(f"unknown event kind {event.kind!r}", code="bad_event")
        handler(event)
        self.events.append(event)
        self.epoch += 1

    def _apply_create(self, event: Event) -> None:
        data = event.data
        self.id: str = data["session_id"]
        self.task: str = data["task"]
        self.epsilon: float = data["epsilon"]
        self.seed: int = data["seed"]
        self.defaults = SessionDefaults.from_json(data["defaults"])
        if data["auto_seed"]:
            pos = self.corpus.labeled_ids(1)
            neg = self.corpus.labeled_ids(0)
            if len(pos) < 5 or len(neg) < 5:
                raise DataError(
                    f"auto-seed needs >= 5 ground-truth docs per class, have "
                    f"{len(pos)} positive / {len(neg)} negative", code="insufficient_seed")
            rng = random.Random(self.seed)
            for doc_id in rng.sample(pos, 5) + rng.sample(neg, 5):
                label = self.corpus.doc(doc_id).label
                self.labels[doc_id] = LabelRecord(label=label, at=event.at)

    def _apply_label(self, event: Event) -> None:
        doc_id = event.data["doc_id"]
        label = event.data["label"]
        self.corpus.doc(doc_id)  # unknown doc -> NotFoundError
        if label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {label!r}", code="bad_labels")
        self.labels[doc_id] = LabelRecord(label=label, at=event.at)
        self.model_stale = True
        self.bow_stale = True

    def _apply_upsert_dict(self, event: Event) -> None:
        d = Dictionary.from_json(event.data["dictionary"])
        findings = validate_dictionary(d)
        if findings:
            raise DataError("invalid dictionary: " + "; ".join(findings),
                            code="invalid_dictionary")
        old = self.dictionaries.get(d.id)
        self.dictionaries[d.id] = d
        # a gamma-only change (teacher applying a threshold) keeps the
        # context model valid; changed terms invalidate it
        if old is None or old.terms != d.terms:
            self.context_stale.add(d.id)
        self.model_stale = True

    def _apply_remove_dict(self, event: Event) -> None:
        dict_id = event.data["dict_id"]
        if dict_id not in self.dictionaries:
            raise NotFoundError(f"unknown dictionary {dict_id!r}", code="unknown_dictionary")
        del self.dictionaries[dict_id]
        self.context_models.pop(dict_id, None)
        self.context_stale.discard(dict_id)
        self.model_stale = True

    def _apply_train_context(self, event: Event) -> None:
        data = event.data
        dict_id = data["dict_id"]
        if dict_id not in self.dictionaries:
            raise NotFoundError(f"unknown dictionary {dict_id!r}", code="unknown_dictionary")
        instances = context.sample_training_instances(
            self.corpus, self.dictionaries[dict_id],
            negative_ratio=data["negative_ratio"], seed=data["seed"],
            max_positives=data["max_positives"])
        model = context.train_context_model(
            instances, l2_lambda=data["l2_lambda"], seed=data["seed"],
            dictionary_id=dict_id, laplace_alpha=data["laplace_alpha"])
        self.context_models[dict_id] = model
        self.context_stale.discard(dict_id)
        if self.current_scheme == DICT_SMOOTHED:
            self.model_stale = True

    def _apply_calibrate(self, event: Event) -> None:
        dict_id = event.data["dict_id"]
        d = self._get_dictionary(dict_id)
        model = self._get_context_model(dict_id)
        gamma = context.calibrate_threshold(self.corpus, model, d,
                                            target_avg_matches=event.data["target"])
        self.dictionaries[dict_id] = dataclasses.replace(d, gamma=gamma)
        if self.current_scheme == DICT_SMOOTHED:
            self.model_stale = True

    def _apply_retrain(self, event: Event) -> None:
        scheme = event.data["scheme"]
        if scheme not in SCHEMES:
            raise DataError(f"unknown scheme {scheme!r}", code="bad_scheme")
        vectors, labels = self._training_matrix(scheme)
        spec = self._feature_spec(scheme)
        penalty = Penalty.l2(self.defaults.l2_lambda)
        self.current_model = classifier.train(list(zip(vectors, labels)), penalty,
                                              seed=self.seed, spec=spec)
        self.current_scheme = scheme
        self.model_stale = False
        if scheme == BOW_TFIDF:
            self.bow_model = self.current_model
            self.bow_stale = False
        elif self.bow_model is None or self.bow_stale:
            bow_spec = self._feature_spec(BOW_TFIDF)
            bow_vectors = classifier.featurize_docs(self.corpus, bow_spec,
                                                    list(self.labels))
            self.bow_model = classifier.train(list(zip(bow_vectors, labels)), penalty,
                                              seed=self.seed, spec=bow_spec)
            self.bow_stale = False

    # -- public mutators (build an event, apply it, hand it back) --------

    def add_label(self, doc_id: str, label: int, at: Optional[str] = None) -> Event:
        """Record a teacher label; relabeling overwrites and is logged."""
        event = self._next_event(EVENT_LABEL, {"doc_id": doc_id, "label": label}, at)
        self._apply(event)
        return event

    def upsert_dictionary(self, d: Dictionary, at: Optional[str] = None) -> Event:
        event = self._next_event(EVENT_UPSERT_DICT, {"dictionary": d.to_json()}, at)
        self._apply(event)
        return event

    def remove_dictionary(self, dict_id: str, at: Optional[str] = None) -> Event:
        event = self._next_event(EVENT_REMOVE_DICT, {"dict_id": dict_id}, at)
        self._apply(event)
        return event

    def train_context(self, dict_id: str, negative_ratio: Optional[float] = None,
                      seed: Optional[int] = None, l2_lambda: Optional[float] = None,
                      max_positives: Optional[int] = None,
                      at: Optional[str] = None) -> Event:
        """(Re)train the context model backing one dictionary."""
        event = self._next_event(EVENT_TRAIN_CONTEXT, {
            "dict_id": dict_id,
            "negative_ratio": self.defaults.negative_ratio if negative_ratio is None else negative_ratio,
            "seed": self.seed if seed is None else seed,
            "l2_lambda": self.defaults.l2_lambda if l2_lambda is None else l2_lambda,
            "laplace_alpha": self.defaults.laplace_alpha,
            "max_positives": self.defaults.max_positives if max_positives is None else max_positives,
        }, at)
        self._apply(event)
        return event

    def calibrate(self, dict_id: str, target: Optional[float] = None,
                  at: Optional[str] = None) -> Event:
        """Set the dictionary's gamma from a corpus-wide calibration scan.

        A None target resolves to the dictionary's corpus-mean literal match
        count before the event is recorded, so replay sees a concrete value.
        """
        d = self._get_dictionary(dict_id)
        if target is None:
            from .dictionary import TokenMatcher
            matcher = TokenMatcher(d.terms)
            total = sum(len(matcher.find(doc.tokens)) for doc in self.corpus.documents)
            target = total / len(self.corpus)
        event = self._next_event(EVENT_CALIBRATE, {"dict_id": dict_id, "target": target}, at)
        self._apply(event)
        return event

    def retrain(self, scheme: str, at: Optional[str] = None) -> Event:
        """Train the current model on the session's labels under a scheme.

        Also refreshes the BoW baseline whenever it is absent or stale, so
        disagreement sampling always compares against the same labels.
        """
        event = self._next_event(EVENT_RETRAIN, {"scheme": scheme}, at)
        self._apply(event)
        return event

    # -- internal featurization helpers ----------------------------------

    def _get_dictionary(self, dict_id: str) -> Dictionary:
        if dict_id not in self.dictionaries:
            raise NotFoundError(f"unknown dictionary {dict_id!r}", code="unknown_dictionary")
        return self.dictionaries[dict_id]

    def _get_context_model(self, dict_id: str) -> ContextModel:
        model = self.context_models.get(dict_id)
        if model is None:
            raise StateError(f"dictionary {dict_id!r} has no context model: train it first",
                             code="untrained_model")
        if dict_id in self.context_stale:
            raise StateError(f"context model for {dict_id!r} is stale: retrain it",
                             code="stale_model")
        return model

    def _feature_spec(self, scheme: str) -> FeatureSpec:
        if scheme == BOW_TFIDF:
            if self._bow_spec is None:
                self._bow_spec = classifier.build_bow_spec(self.corpus,
                                                           min_df=self.defaults.min_df)
            return self._bow_spec
        if not self.dictionaries:
            raise StateError("session has no dictionaries", code="no_dictionaries")
        if scheme == DICT_SMOOTHED:
            for dict_id in self.dictionaries:
                self._get_context_model(dict_id)
                if self.dictionaries[dict_id].gamma is None:
                    raise StateError(f"dictionary {dict_id!r} is not calibrated",
                                     code="uncalibrated")
        return FeatureSpec(scheme=scheme, dictionary_ids=tuple(self.dictionaries))

    def _training_matrix(self, scheme: str) -> tuple[list, list[int]]:
        if not self.labels:
            raise DataError("session has no labels", code="single_class")
        labels = [rec.label for rec in self.labels.values()]
        if len(set(labels)) < 2:
            raise DataError("labels cover a single class", code="single_class")
        spec = self._feature_spec(scheme)
        vectors = classifier.featurize_docs(self.corpus, spec, list(self.labels),
                                            dictionaries=self.dictionaries,
                                            context_models=self.context_models)
        return vectors, labels

    def _score_docs(self, model: LogRegModel, doc_ids: Sequence[str]) -> list[float]:
        for did in model.spec.dictionary_ids or ():
            if did not in self.dictionaries:
                raise StateError(f"model references removed dictionary {did!r}: retrain",
                                 code="stale_model")
        vectors = classifier.featurize_docs(self.corpus, model.spec, doc_ids,
                                            dictionaries=self.dictionaries,
                                            context_models=self.context_models)
        return [classifier.predict(model, v) for v in vectors]

    # -- reads -------------------------------------------------------------

    def sample_next(self, strategy: str, count: int = 1,
                    query: Optional[str] = None) -> list[str]:
        """Next documents to label; never returns an already-labeled doc.

        uncertainty ranks unlabeled docs by |score - 0.5| ascending;
        disagreement by |current - bow| descending; keyword returns search
        hits in (doc id, position) order. Ties break by doc id.
        """
        if strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {strategy!r}", code="bad_strategy")
        unlabeled = [did for did in self.corpus.doc_ids if did not in self.labels]
        if strategy == "keyword":
            if not query or not tokenize(query):
                raise DataError("keyword strategy requires a query", code="empty_query")
            hits = keyword_search(self.corpus, tokenize(query))
            ordered = []
            seen = set()
            for ref in hits:
                if ref.doc_id not in seen and ref.doc_id not in self.labels:
                    seen.add(ref.doc_id)
                    ordered.append(ref.doc_id)
            return ordered[:count]
        if self.current_model is None:
            raise StateError("no trained current model: retrain first", code="model_missing")
        if not unlabeled:
            return []
        scores = self._score_docs(self.current_model, unlabeled)
        if strategy == "uncertainty":
            ranked = sorted(zip(unlabeled, scores), key=lambda ds: (abs(ds[1] - 0.5), ds[0]))
        else:
            if self.bow_model is None:
                raise StateError("no trained BoW baseline: retrain first", code="model_missing")
            bow_scores = self._score_docs(self.bow_model, unlabeled)
            ranked = sorted(zip(unlabeled, (abs(s - b) for s, b in zip(scores, bow_scores))),
                            key=lambda ds: (-ds[1], ds[0]))
        return [doc_id for doc_id, _ in ranked[:count]]

    def detect_blindness(self) -> BlindnessReport:
        """Training-set disagreements between the current model and the teacher."""
        if self.current_model is None:
            raise StateError("no trained current model", code="model_missing")
        if self.model_stale:
            raise StateError("current model is stale: retrain first", code="stale_model")
        doc_ids = list(self.labels)
        scores = self._score_docs(self.current_model, doc_ids)
        disagreements = []
        for doc_id, score in zip(doc_ids, scores):
            label = self.labels[doc_id].label
            if (1 if score >= 0.5 else 0) != label:
                disagreements.append((doc_id, label, score))
        disagreements.sort(key=lambda d: d[0])
        return BlindnessReport(disagreements=tuple(disagreements),
                               training_error_rate=len(disagreements) / len(doc_ids))

    def loop_status(self) -> dict:
        """Teaching-loop stopping check: training error rate below epsilon."""
        report = self.detect_blindness()
        return {"converged": report.training_error_rate < self.epsilon,
                "training_error_rate": report.training_error_rate}

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "version": "session/1",
            "id": self.id,
            "task": self.task,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "defaults": self.defaults.to_json(),
            "labels": [{"doc_id": did, "label": rec.label, "at": rec.at}
                       for did, rec in self.labels.items()],
            "dictionaries": [d.to_json() for d in self.dictionaries.values()],
            "context_models": {did: m.to_json() for did, m in self.context_models.items()},
            "context_stale": sorted(self.context_stale),
            "current_scheme": self.current_scheme,
            "current_model": None if self.current_model is None else self.current_model.to_json(),
            "model_stale": self.model_stale,
            "bow_model": None if self.bow_model is None else self.bow_model.to_json(),
            "bow_stale": self.bow_stale,
            "events": [e.to_json() for e in self.events],
            "epoch": self.epoch,
        }

    @classmethod
    def from_snapshot(cls, corpus: Corpus, obj: dict) -> "TeachingSession":
        if obj.get("version") != "session/1":
            raise DataError(f"unsupported session version {obj.get('version')!r}",
                            code="bad_version")
        events = [Event.from_json(e) for e in obj["events"]]
        session = cls.__new__(cls)
        session.corpus = corpus
        session.id = obj["id"]
        session.task = obj["task"]
        session.epsilon = obj["epsilon"]
        session.seed = obj["seed"]
        session.defaults = SessionDefaults.from_json(obj["defaults"])
        session.labels = {rec["doc_id"]: LabelRecord(label=rec["label"], at=rec["at"])
                          for rec in obj["labels"]}
        session.dictionaries = {d["id"]: Dictionary.from_json(d)
                                for d in obj["dictionaries"]}
        session.context_models = {did: ContextModel.from_json(m)
                                  for did, m in obj["context_models"].items()}
        session.context_stale = set(obj["context_stale"])
        session.current_scheme = obj["current_scheme"]
        session.current_model = (None if obj["current_model"] is None
                                 else LogRegModel.from_json(obj["current_model"]))
        session.model_stale = obj["model_stale"]
        session.bow_model = (None if obj["bow_model"] is None
                             else LogRegModel.from_json(obj["bow_model"]))
        session.bow_stale = obj["bow_stale"]
        session.events = events
        session.epoch = obj["epoch"]
        session._bow_spec = None
        return session
