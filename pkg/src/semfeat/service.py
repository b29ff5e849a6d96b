"""HTTP/JSON service exposing the teaching engine to the browser UI.

One corpus is loaded at startup and shared read-only; sessions are
serialized through per-session locks and every mutation is persisted to the
session's event log before the response is sent.
"""

from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import classifier, context, schemas
from .classifier import SCHEMES
from .corpus import Corpus, load_corpus, tokenize
from .dictionary import Dictionary
from .errors import DataError, NotFoundError, SemfeatError, StateError
from .optim import Penalty
from .store import SessionStore
from .teach import SessionDefaults, TeachingSession


@dataclass
class ServiceConfig:
    """Startup configuration for one service process."""

    corpus_path: str
    data_dir: str
    host: str = "127.0.0.1"
    port: int = 8000
    l2_lambda: float = 1.0
    laplace_alpha: float = 1.0
    negative_ratio: float = 10.0
    epsilon: float = 0.01
    calibration_target: Optional[float] = None
    min_df: int = 2
    max_request_bytes: int = 10_000_000
    snapshot_every: int = 25
    ui_dir: Optional[str] = None

    def validate(self) -> None:
        if self.l2_lambda <= 0 or self.laplace_alpha <= 0 or self.negative_ratio <= 0:
            raise DataError("lambda, alpha, and negative ratio must be positive",
                            code="bad_config")
        if not 0.0 < self.epsilon <= 1.0:
            raise DataError("epsilon must lie in (0, 1]", code="bad_config")
        if self.calibration_target is not None and self.calibration_target <= 0:
            raise DataError("calibration target must be positive", code="bad_config")
        if self.min_df < 1 or self.max_request_bytes < 1 or self.snapshot_every < 1:
            raise DataError("min_df, request limit, and snapshot cadence must be >= 1",
                            code="bad_config")
        data_dir = Path(self.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        probe = data_dir / ".write-probe"
        try:
            probe.write_text("ok")
            probe.unlink()
        except OSError as exc:
            raise DataError(f"data directory not writable: {exc}", code="bad_config")

    def session_defaults(self) -> SessionDefaults:
        return SessionDefaults(l2_lambda=self.l2_lambda, min_df=self.min_df,
                               negative_ratio=self.negative_ratio,
                               laplace_alpha=self.laplace_alpha)


class _Engine:
    """Shared mutable service state behind per-session locks."""

    def __init__(self, config: ServiceConfig, corpus: Corpus):
        self.config = config
        self.corpus = corpus
        self.store = SessionStore(config.data_dir, snapshot_every=config.snapshot_every)
        self.sessions: dict[str, TeachingSession] = {}
        self.locks: dict[str, threading.Lock] = {}
        self.metrics_cache: dict[str, dict[str, tuple[int, dict]]] = {}
        self.registry_lock = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self.registry_lock:
            if session_id not in self.locks:
                self.locks[session_id] = threading.Lock()
            return self.locks[session_id]

    def get_session(self, session_id: str) -> TeachingSession:
        with self.registry_lock:
            session = self.sessions.get(session_id)
        if session is not None:
            return session
        if not self.store.exists(session_id):
            raise NotFoundError(f"unknown session {session_id!r}", code="unknown_session")
        with self.lock(session_id):
            with self.registry_lock:
                if session_id in self.sessions:  # lost the race to another loader
                    return self.sessions[session_id]
            session = self.store.load(session_id, self.corpus)
            with self.registry_lock:
                self.sessions[session_id] = session
            return session

    def register(self, session: TeachingSession) -> None:
        with self.registry_lock:
            self.sessions[session.id] = session
            self.locks.setdefault(session.id, threading.Lock())


def _session_view(session: TeachingSession) -> schemas.SessionView:
    labels = [rec.label for rec in session.labels.values()]
    return schemas.SessionView(
        id=session.id,
        task=session.task,
        epsilon=session.epsilon,
        labels=len(labels),
        positive_labels=sum(labels),
        negative_labels=len(labels) - sum(labels),
        dictionaries=[
            schemas.DictionaryView(
                id=d.id, name=d.name, terms=[list(t) for t in d.terms], gamma=d.gamma,
                context_model_trained=d.id in session.context_models,
                context_model_stale=d.id in session.context_stale,
            )
            for d in session.dictionaries.values()
        ],
        current_scheme=session.current_scheme,
        model_trained=session.current_model is not None,
        model_stale=session.model_stale,
        bow_trained=session.bow_model is not None,
        bow_stale=session.bow_stale,
        events=len(session.events),
    )


def _eval_examples(engine: _Engine, session: TeachingSession, scheme: str):
    """Held-out evaluation set: ground-truth-labeled docs the teacher has
    not labeled, vectorized under a freshly trained model for the scheme."""
    eval_ids = [doc.id for doc in engine.corpus.documents
                if doc.label is not None and doc.id not in session.labels]
    if not eval_ids:
        raise StateError("no ground-truth documents outside the training set",
                         code="no_eval_docs")
    vectors, labels = session._training_matrix(scheme)
    model = classifier.train(list(zip(vectors, labels)),
                             Penalty.l2(session.defaults.l2_lambda),
                             seed=session.seed, spec=session._feature_spec(scheme))
    eval_vectors = classifier.featurize_docs(
        engine.corpus, model.spec, eval_ids,
        dictionaries=session.dictionaries, context_models=session.context_models)
    eval_labels = [engine.corpus.doc(did).label for did in eval_ids]
    return model, list(zip(eval_vectors, eval_labels))


def create_app(config: ServiceConfig, corpus: Optional[Corpus] = None) -> FastAPI:
    config.validate()
    if corpus is None:
        corpus = load_corpus(config.corpus_path)
    engine = _Engine(config, corpus)
    app = FastAPI(title="semfeat", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(SemfeatError)
    async def _semfeat_error(request: Request, exc: SemfeatError):
        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, StateError):
            status = 409
        elif isinstance(exc, DataError):
            status = 422
        return JSONResponse(status_code=status,
                            content={"error": str(exc), "code": exc.code})

    @app.middleware("http")
    async def _limit_body(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > config.max_request_bytes:
            return JSONResponse(status_code=413,
                                content={"error": "request body too large",
                                         "code": "request_too_large"})
        return await call_next(request)

    # -- sessions ---------------------------------------------------------

    @app.post("/sessions", response_model=schemas.SessionView)
    def create_session(req: schemas.CreateSessionRequest):
        session = TeachingSession.create(
            engine.corpus, task=req.task, epsilon=req.epsilon, seed=req.seed,
            auto_seed=req.auto_seed, defaults=config.session_defaults())
        engine.register(session)
        engine.store.append_event(session.id, session.events[0])
        return _session_view(session)

    @app.get("/sessions")
    def list_sessions():
        with engine.registry_lock:
            known = set(engine.sessions)
        ids = sorted(known | set(engine.store.list_ids()))
        return {"sessions": [{"id": sid, "task": engine.get_session(sid).task}
                             for sid in ids]}

    @app.get("/sessions/{session_id}", response_model=schemas.SessionView)
    def get_session(session_id: str):
        return _session_view(engine.get_session(session_id))

    @app.post("/sessions/{session_id}/labels", response_model=schemas.LabelResponse)
    def add_label(session_id: str, req: schemas.LabelRequest):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            event = session.add_label(req.doc_id, req.label)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            return schemas.LabelResponse(doc_id=req.doc_id, label=req.label,
                                         labels=len(session.labels))

    @app.get("/sessions/{session_id}/next", response_model=schemas.NextResponse)
    def sample_next(session_id: str, strategy: str = Query(...),
                    count: int = Query(default=1, ge=1, le=1000),
                    query: Optional[str] = None):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            doc_ids = session.sample_next(strategy, count=count, query=query)
        return schemas.NextResponse(strategy=strategy, doc_ids=doc_ids)

    @app.post("/sessions/{session_id}/retrain", response_model=schemas.SessionView)
    def retrain(session_id: str, req: schemas.RetrainRequest):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            event = session.retrain(req.scheme)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            return _session_view(session)

    @app.get("/sessions/{session_id}/blindness", response_model=schemas.BlindnessView)
    def blindness(session_id: str):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            report = session.detect_blindness()
        return schemas.BlindnessView(
            disagreements=[schemas.DisagreementView(doc_id=d, teacher_label=l,
                                                    model_score=s)
                           for d, l, s in report.disagreements],
            training_error_rate=report.training_error_rate)

    @app.get("/sessions/{session_id}/status", response_model=schemas.StatusView)
    def status(session_id: str):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            state = session.loop_status()
        return schemas.StatusView(converged=state["converged"],
                                  training_error_rate=state["training_error_rate"],
                                  epsilon=session.epsilon,
                                  labels=len(session.labels))

    # -- dictionaries -----------------------------------------------------

    @app.put("/sessions/{session_id}/dictionaries/{dict_id}",
             response_model=schemas.SessionView)
    def upsert_dictionary(session_id: str, dict_id: str, req: schemas.DictionaryPayload):
        session = engine.get_session(session_id)
        d = Dictionary(id=dict_id, name=req.name,
                       terms=tuple(tuple(t) for t in req.terms), gamma=req.gamma)
        with engine.lock(session_id):
            event = session.upsert_dictionary(d)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            return _session_view(session)

    @app.delete("/sessions/{session_id}/dictionaries/{dict_id}",
                response_model=schemas.SessionView)
    def remove_dictionary(session_id: str, dict_id: str):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            event = session.remove_dictionary(dict_id)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            return _session_view(session)

    @app.post("/sessions/{session_id}/dictionaries/{dict_id}/train-context",
              response_model=schemas.TrainContextResponse)
    def train_context(session_id: str, dict_id: str, req: schemas.TrainContextRequest):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            event = session.train_context(dict_id, negative_ratio=req.negative_ratio,
                                          seed=req.seed, l2_lambda=req.l2_lambda,
                                          max_positives=req.max_positives)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            model = session.context_models[dict_id]
            return schemas.TrainContextResponse(
                dict_id=dict_id,
                positives=model.trained_on[context.IN_DICTIONARY],
                negatives=model.trained_on[context.OUT_OF_DICTIONARY],
                iterations=model.iterations,
                objective=model.final_objective)

    @app.post("/sessions/{session_id}/dictionaries/{dict_id}/calibrate",
              response_model=schemas.CalibrateResponse)
    def calibrate(session_id: str, dict_id: str, req: schemas.CalibrateRequest):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            target = req.target if req.target is not None else config.calibration_target
            event = session.calibrate(dict_id, target=target)
            engine.store.append_event(session_id, event)
            engine.store.maybe_snapshot(session)
            d = session.dictionaries[dict_id]
            counts = context.smooth_match_counts(
                engine.corpus, session.context_models[dict_id], d)
            mean = sum(counts.values()) / len(counts)
            return schemas.CalibrateResponse(dict_id=dict_id, gamma=d.gamma,
                                             target=event.data["target"],
                                             mean_smooth_matches=mean)

    @app.get("/sessions/{session_id}/dictionaries/{dict_id}/contexts",
             response_model=schemas.ContextsResponse)
    def contexts(session_id: str, dict_id: str, term: str = Query(...),
                 limit: int = Query(default=40, ge=0),
                 gamma: Optional[float] = Query(default=None, gt=0.0, le=1.0)):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            model = session._get_context_model(dict_id)
            term_tokens = tokenize(term)
            if not term_tokens:
                raise DataError("empty term", code="empty_query")
            all_rows = context.rank_contexts(engine.corpus, model, term_tokens, limit=0)
        occurrences = len(all_rows)
        trigger = None
        if gamma is not None and occurrences:
            trigger = 100.0 * sum(1 for r in all_rows if r.probability >= gamma) / occurrences
        rows = all_rows if limit <= 0 else all_rows[:limit]
        return schemas.ContextsResponse(
            term=term, occurrences=occurrences,
            rows=[schemas.ContextRowView(**dataclasses.asdict(r)) for r in rows],
            gamma=gamma, trigger_percent=trigger)

    @app.get("/sessions/{session_id}/dictionaries/{dict_id}/suggestions",
             response_model=schemas.SuggestionsResponse)
    def suggestions(session_id: str, dict_id: str,
                    k: int = Query(default=10, ge=1, le=1000),
                    min_occurrences: int = Query(default=3, ge=1),
                    max_len: int = Query(default=1, ge=1, le=4)):
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            d = session._get_dictionary(dict_id)
            model = session._get_context_model(dict_id)
            result = context.suggest_terms(engine.corpus, model, d,
                                           max_ngram_len=max_len,
                                           min_occurrences=min_occurrences, top_k=k)
        return schemas.SuggestionsResponse(
            dict_id=dict_id,
            entries=[schemas.SuggestionView(term=list(t), mean_probability=p,
                                            occurrences=n)
                     for t, p, n in result.entries])

    # -- metrics and documents ---------------------------------------------

    @app.get("/sessions/{session_id}/metrics", response_model=schemas.MetricsResponse)
    def metrics(session_id: str, scheme: str = Query(...)):
        if scheme not in SCHEMES:
            raise DataError(f"unknown scheme {scheme!r}", code="bad_scheme")
        session = engine.get_session(session_id)
        with engine.lock(session_id):
            cache = engine.metrics_cache.setdefault(session_id, {})
            cached = cache.get(scheme)
            if cached is not None and cached[0] == session.epoch:
                return schemas.MetricsResponse(**cached[1])
            model, examples = _eval_examples(engine, session, scheme)
            report = classifier.evaluate(model, examples)
            payload = dict(scheme=scheme, auroc=report.auroc, accuracy=report.accuracy,
                           pr_curve=[{"recall": r, "precision": p}
                                     for r, p in report.pr_points],
                           positives=report.positives, negatives=report.negatives,
                           nonzero_weights=report.nonzero_weights,
                           eval_docs=len(examples))
            cache[scheme] = (session.epoch, payload)
            return schemas.MetricsResponse(**payload)

    @app.get("/docs/{doc_id}", response_model=schemas.DocView)
    def get_doc(doc_id: str):
        doc = engine.corpus.doc(doc_id)
        return schemas.DocView(id=doc.id, text=doc.text, tokens=list(doc.tokens),
                               label=doc.label)

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
