"""Teaching sessions: seeding, sampling, retraining, blindness, replay."""

import json
import math
import random

import numpy as np
import pytest

from semfeat.classifier import (BOW_TFIDF, DICT_LITERAL, FeatureSpec,
                                LogRegModel)
from semfeat.corpus import ingest
from semfeat.dictionary import Dictionary
from semfeat.errors import DataError, NotFoundError, StateError
from semfeat.optim import Penalty
from semfeat.teach import TeachingSession

from .synth import homonym_corpus


def seeded_corpus():
    """12 ground-truth-labeled docs plus unlabeled extras."""
    records = []
    for i in range(6):
        records.append((f"p{i}", f"may meeting on 1{i} may 2020 agenda", 1))
    for i in range(6):
        records.append((f"n{i}", f"you may contact the team about item {i}", 0))
    records.append(("u0", "a neutral note about nothing", None))
    records.append(("u1", "another unlabeled item for later", None))
    return ingest(records)


class TestCreate:
    def test_auto_seed_balanced(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True, seed=1)
        labels = [rec.label for rec in session.labels.values()]
        assert len(labels) == 10
        assert sum(labels) == 5

    def test_auto_seed_deterministic(self):
        c = seeded_corpus()
        s1 = TeachingSession.create(c, "demo", auto_seed=True, seed=9, session_id="s")
        s2 = TeachingSession.create(c, "demo", auto_seed=True, seed=9, session_id="s")
        assert list(s1.labels) == list(s2.labels)

    def test_auto_seed_requires_five_per_class(self):
        corpus = ingest([("a", "x", 1), ("b", "y", 0)])
        with pytest.raises(DataError, match="auto-seed"):
            TeachingSession.create(corpus, "demo", auto_seed=True)

    def test_empty_start(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        assert session.labels == {}
        assert session.current_model is None

    def test_bad_epsilon(self):
        with pytest.raises(DataError):
            TeachingSession.create(seeded_corpus(), "demo", epsilon=0.0)


class TestAddLabel:
    def test_new_label_grows_training_set(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.add_label("p0", 1)
        assert len(session.labels) == 1

    def test_relabel_overwrites_and_logs(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.add_label("p0", 1)
        session.add_label("p0", 0)
        assert len(session.labels) == 1
        assert session.labels["p0"].label == 0
        label_events = [e for e in session.events if e.kind == "label"]
        assert len(label_events) == 2

    def test_unknown_doc_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        with pytest.raises(NotFoundError):
            session.add_label("ghost", 1)

    def test_marks_models_stale(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.retrain(BOW_TFIDF)
        assert not session.model_stale
        session.add_label("u0", 1)
        assert session.model_stale and session.bow_stale


def manual_model(weights, bias, dictionary_ids=("m",)):
    spec = FeatureSpec(scheme=DICT_LITERAL, dictionary_ids=dictionary_ids)
    return LogRegModel(spec=spec, weights=np.asarray(weights, dtype=float),
                       bias=bias, penalty=Penalty.l2(), iterations=1,
                       final_objective=0.0)


class TestSampleNext:
    def setup_method(self):
        self.corpus = ingest([
            ("d1", "may may may x", None),
            ("d2", "may x y z", None),
            ("d3", "x y z w", None),
        ])
        self.session = TeachingSession.create(self.corpus, "demo")
        self.session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))

    def test_uncertainty_orders_by_distance_to_half(self):
        # literal counts 3, 1, 0 -> scores sigmoid(2*ln(1+n) - 0.08)
        self.session.current_model = manual_model([2.0], -0.08)
        self.session.current_scheme = DICT_LITERAL
        assert self.session.sample_next("uncertainty", count=3) == ["d3", "d2", "d1"]

    def test_uncertainty_requires_model(self):
        with pytest.raises(StateError, match="retrain"):
            self.session.sample_next("uncertainty")

    def test_disagreement_orders_by_score_gap(self):
        self.session.current_model = manual_model([2.0], 0.0)
        self.session.current_scheme = DICT_LITERAL
        self.session.bow_model = manual_model([-2.0], 0.0)
        # gap = |sigmoid(2f) - sigmoid(-2f)| grows with count
        assert self.session.sample_next("disagreement", count=3) == ["d1", "d2", "d3"]

    def test_disagreement_requires_bow_baseline(self):
        self.session.current_model = manual_model([2.0], 0.0)
        with pytest.raises(StateError, match="BoW"):
            self.session.sample_next("disagreement")

    def test_keyword_returns_unlabeled_hits(self):
        assert self.session.sample_next("keyword", count=5, query="may") == ["d1", "d2"]
        self.session.add_label("d1", 1)
        assert self.session.sample_next("keyword", count=5, query="may") == ["d2"]

    def test_never_returns_labeled_docs(self):
        self.session.current_model = manual_model([2.0], 0.0)
        self.session.current_scheme = DICT_LITERAL
        self.session.add_label("d3", 0)
        assert "d3" not in self.session.sample_next("uncertainty", count=3)

    def test_all_labeled_gives_empty(self):
        self.session.current_model = manual_model([2.0], 0.0)
        for did in ("d1", "d2", "d3"):
            self.session.add_label(did, 1)
        assert self.session.sample_next("uncertainty", count=3) == []

    def test_unknown_strategy(self):
        with pytest.raises(DataError):
            self.session.sample_next("magic")


class TestRetrain:
    def test_bow_retrain_clears_staleness(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        assert session.current_model is None
        session.retrain(BOW_TFIDF)
        assert session.current_model is not None
        assert not session.model_stale
        assert session.bow_model is not None

    def test_literal_retrain_also_trains_bow_baseline(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.retrain(DICT_LITERAL)
        assert session.current_scheme == DICT_LITERAL
        assert session.bow_model is not None
        assert session.bow_model.spec.scheme == BOW_TFIDF

    def test_retrain_without_label_change_is_identical(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.retrain(BOW_TFIDF)
        first = json.dumps(session.current_model.to_json(), sort_keys=True)
        session.retrain(BOW_TFIDF)
        assert json.dumps(session.current_model.to_json(), sort_keys=True) == first

    def test_single_class_labels_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.add_label("p0", 1)
        with pytest.raises(DataError):
            session.retrain(BOW_TFIDF)

    def test_smoothed_requires_trained_calibrated_dictionaries(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        with pytest.raises(StateError):
            session.retrain("dictionaries-smoothed")


class TestBlindness:
    def test_separable_training_data_has_no_disagreements(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.retrain(BOW_TFIDF)
        report = session.detect_blindness()
        assert report.disagreements == ()
        assert report.training_error_rate == 0.0

    def test_identical_vectors_opposite_labels_disagree(self):
        corpus = ingest([("a", "may x", None), ("b", "may x", None)])
        session = TeachingSession.create(corpus, "demo")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.add_label("a", 1)
        session.add_label("b", 0)
        session.retrain(DICT_LITERAL)
        report = session.detect_blindness()
        assert len(report.disagreements) >= 1

    def test_stale_model_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.retrain(BOW_TFIDF)
        session.add_label("u0", 1)
        with pytest.raises(StateError, match="stale"):
            session.detect_blindness()

    def test_missing_model_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        with pytest.raises(StateError):
            session.detect_blindness()

    def test_disagreement_set_matches_direct_recomputation(self):
        corpus = ingest([("a", "may x", None), ("b", "may x", None),
                         ("c", "may may q", None), ("d", "plain words", None)])
        session = TeachingSession.create(corpus, "demo")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        for did, label in [("a", 1), ("b", 0), ("c", 1), ("d", 0)]:
            session.add_label(did, label)
        session.retrain(DICT_LITERAL)
        report = session.detect_blindness()
        expected = set()
        for did in session.labels:
            score = session._score_docs(session.current_model, [did])[0]
            if (1 if score >= 0.5 else 0) != session.labels[did].label:
                expected.add(did)
        assert {d for d, _l, _s in report.disagreements} == expected


class TestLoopStatus:
    def test_converged_iff_rate_below_epsilon(self):
        session = TeachingSession.create(seeded_corpus(), "demo",
                                         auto_seed=True, epsilon=0.01)
        session.retrain(BOW_TFIDF)
        status = session.loop_status()
        assert status["training_error_rate"] == 0.0
        assert status["converged"] is True

    def test_not_converged_with_errors(self):
        corpus = ingest([("a", "may x", None), ("b", "may x", None)])
        session = TeachingSession.create(corpus, "demo", epsilon=0.01)
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.add_label("a", 1)
        session.add_label("b", 0)
        session.retrain(DICT_LITERAL)
        status = session.loop_status()
        assert status["training_error_rate"] >= 0.5
        assert status["converged"] is False

    def test_epsilon_one_converges_with_any_imperfect_rate(self):
        corpus = ingest([("a", "may x q", None), ("b", "may x q", None),
                         ("c", "zz top", None)])
        session = TeachingSession.create(corpus, "demo", epsilon=1.0)
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        for did, label in [("a", 1), ("b", 0), ("c", 0)]:
            session.add_label(did, label)
        session.retrain(DICT_LITERAL)
        assert session.loop_status()["converged"] is True


class TestDictionaries:
    def test_upsert_marks_stale(self):
        session = TeachingSession.create(seeded_corpus(), "demo", auto_seed=True)
        session.retrain(BOW_TFIDF)
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        assert session.model_stale
        assert "m" in session.context_stale

    def test_modify_terms_marks_context_stale(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.train_context("m")
        assert "m" not in session.context_stale
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may", "june"]))
        assert "m" in session.context_stale

    def test_gamma_only_change_keeps_context_model_fresh(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.train_context("m")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"], gamma=0.5))
        assert "m" not in session.context_stale
        assert session.dictionaries["m"].gamma == 0.5

    def test_invalid_dictionary_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        bad = Dictionary(id="m", name="m", terms=(("May",),))
        with pytest.raises(DataError, match="canonical"):
            session.upsert_dictionary(bad)

    def test_remove_unknown_rejected(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        with pytest.raises(NotFoundError):
            session.remove_dictionary("ghost")

    def test_remove_drops_model_and_marks_stale(self):
        session = TeachingSession.create(seeded_corpus(), "demo")
        session.upsert_dictionary(Dictionary.from_texts("m", "m", ["may"]))
        session.train_context("m")
        session.remove_dictionary("m")
        assert "m" not in session.dictionaries
        assert "m" not in session.context_models


class TestReplay:
    def build_session(self):
        corpus, months = homonym_corpus(n_docs=120, seed=3)
        session = TeachingSession.create(corpus, "homonym", auto_seed=True,
                                         seed=5, session_id="fixed")
        session.upsert_dictionary(months)
        session.add_label("d00020", 1)
        session.add_label("d00021", 0)
        session.retrain(DICT_LITERAL)
        session.train_context("months")
        session.calibrate("months")
        session.retrain("dictionaries-smoothed")
        session.add_label("d00030", 1)
        return corpus, session

    def test_replay_reproduces_state_bit_exactly(self):
        corpus, session = self.build_session()
        replayed = TeachingSession.replay(corpus, session.events)
        assert json.dumps(replayed.snapshot(), sort_keys=True) == \
            json.dumps(session.snapshot(), sort_keys=True)

    def test_snapshot_roundtrip(self):
        corpus, session = self.build_session()
        snap = session.snapshot()
        restored = TeachingSession.from_snapshot(corpus, json.loads(json.dumps(snap)))
        assert json.dumps(restored.snapshot(), sort_keys=True) == \
            json.dumps(snap, sort_keys=True)
