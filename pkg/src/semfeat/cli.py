"""Command-line client for batch pipelines.

Each subcommand is a thin wrapper over the engine that reads and writes the
same JSON formats the service uses, so anything the service produces can be
reproduced from files. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import classifier, context
from .classifier import (BOW_TFIDF, DICT_LITERAL, DICT_SMOOTHED, SCHEMES,
                         FeatureSpec, FeatureVector)
from .corpus import load_corpus
from .dictionary import load_dictionary, save_dictionary
from .errors import SemfeatError
from .optim import Penalty


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, ensure_ascii=False, indent=2)
    sys.stdout.write("\n")


def _load_dicts(paths: Sequence[str]) -> dict[str, object]:
    dicts = {}
    for path in paths:
        d = load_dictionary(path)
        dicts[d.id] = d
    return dicts


def _load_models(paths: Sequence[str]) -> dict[str, object]:
    models = {}
    for path in paths:
        m = context.load_context_model(path)
        models[m.dictionary_id] = m
    return models


def cmd_ingest(args) -> None:
    corpus = load_corpus(args.corpus)
    if args.output:
        from .corpus import save_corpus
        save_corpus(corpus, args.output)
    _emit({"documents": len(corpus), "tokens": corpus.token_count(),
           "index_entries": corpus.index_entry_count()})


def cmd_train_context(args) -> None:
    corpus = load_corpus(args.corpus)
    d = load_dictionary(args.dict)
    instances = context.sample_training_instances(
        corpus, d, negative_ratio=args.ratio, seed=args.seed,
        max_positives=args.max_positives)
    model = context.train_context_model(instances, l2_lambda=args.l2, seed=args.seed,
                                        dictionary_id=d.id, laplace_alpha=args.alpha)
    context.save_context_model(model, args.output)
    _emit({"dictionary_id": d.id,
           "positives": model.trained_on[context.IN_DICTIONARY],
           "negatives": model.trained_on[context.OUT_OF_DICTIONARY],
           "iterations": model.iterations, "objective": model.final_objective})


def cmd_calibrate(args) -> None:
    corpus = load_corpus(args.corpus)
    d = load_dictionary(args.dict)
    model = context.load_context_model(args.model)
    gamma = context.calibrate_threshold(corpus, model, d,
                                        target_avg_matches=args.target)
    d.gamma = gamma
    save_dictionary(d, args.dict)
    counts = context.smooth_match_counts(corpus, model, d)
    _emit({"dictionary_id": d.id, "gamma": gamma,
           "mean_smooth_matches": sum(counts.values()) / len(counts)})


def cmd_suggest(args) -> None:
    corpus = load_corpus(args.corpus)
    d = load_dictionary(args.dict)
    model = context.load_context_model(args.model)
    result = context.suggest_terms(corpus, model, d, max_ngram_len=args.max_len,
                                   min_occurrences=args.min_occurrences, top_k=args.k)
    _emit({"dictionary_id": d.id,
           "entries": [{"term": list(t), "mean_probability": p, "occurrences": n}
                       for t, p, n in result.entries]})


def cmd_rank_contexts(args) -> None:
    corpus = load_corpus(args.corpus)
    model = context.load_context_model(args.model)
    from .corpus import tokenize
    rows = context.rank_contexts(corpus, model, tokenize(args.term), limit=args.limit)
    _emit({"term": args.term,
           "rows": [{"percentile": r.percentile, "probability": r.probability,
                     "before": r.before, "target": r.target, "after": r.after,
                     "doc_id": r.doc_id, "start": r.start} for r in rows]})


def cmd_featurize(args) -> None:
    corpus = load_corpus(args.corpus)
    dicts = _load_dicts(args.dict or [])
    models = _load_models(args.context_model or [])
    if args.scheme == BOW_TFIDF:
        spec = classifier.build_bow_spec(corpus, min_df=args.min_df)
    else:
        spec = FeatureSpec(scheme=args.scheme, dictionary_ids=tuple(dicts))
    vectors = classifier.featurize_docs(corpus, spec, corpus.doc_ids,
                                        dictionaries=dicts, context_models=models)
    payload = {
        "version": "features/1",
        "spec": spec.to_json(),
        "vectors": [{"doc_id": v.doc_id,
                     "label": corpus.doc(v.doc_id).label,
                     "entries": {str(fid): val for fid, val in v.entries.items()}}
                    for v in vectors],
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")
    _emit({"scheme": args.scheme, "documents": len(vectors),
           "features": spec.feature_count})


def _read_features(path) -> tuple[FeatureSpec, list[tuple[FeatureVector, Optional[int]]]]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != "features/1":
        raise SemfeatError(f"unsupported features version {payload.get('version')!r}")
    spec = FeatureSpec.from_json(payload["spec"])
    items = [(FeatureVector(doc_id=rec["doc_id"],
                            entries={int(k): v for k, v in rec["entries"].items()}),
              rec.get("label"))
             for rec in payload["vectors"]]
    return spec, items


def cmd_train(args) -> None:
    spec, items = _read_features(args.features)
    examples = [(vec, label) for vec, label in items if label is not None]
    penalty = Penalty.l1(args.l1) if args.l1 is not None else Penalty.l2(args.l2)
    model = classifier.train(examples, penalty, seed=args.seed, spec=spec)
    classifier.save_model(model, args.output)
    _emit({"scheme": spec.scheme, "examples": len(examples),
           "nonzero_weights": classifier.nonzero_weight_count(model),
           "iterations": model.iterations, "objective": model.final_objective})


def cmd_eval(args) -> None:
    model = classifier.load_model(args.model)
    corpus = load_corpus(args.corpus)
    dicts = _load_dicts(args.dict or [])
    models = _load_models(args.context_model or [])
    labeled_ids = [doc.id for doc in corpus.documents if doc.label is not None]
    vectors = classifier.featurize_docs(corpus, model.spec, labeled_ids,
                                        dictionaries=dicts, context_models=models)
    examples = [(vec, corpus.doc(vec.doc_id).label) for vec in vectors]
    report = classifier.evaluate(model, examples)
    if args.pr_csv:
        with open(args.pr_csv, "w", encoding="utf-8") as fh:
            fh.write(report.pr_csv())
    _emit(report.to_json())


def cmd_serve(args) -> None:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        corpus_path=args.corpus, data_dir=args.data_dir, host=args.host,
        port=args.port, l2_lambda=args.l2, laplace_alpha=args.alpha,
        negative_ratio=args.ratio, epsilon=args.epsilon,
        calibration_target=args.target, min_df=args.min_df, ui_dir=args.ui_dir)
    uvicorn.run(create_app(config), host=config.host, port=config.port)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semfeat",
                     description="Semantic-featuring workbench for text classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a JSONL corpus and report stats")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", help="write a normalized copy")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-context", help="train a dictionary's context model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--ratio", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--max-positives", type=int, default=100_000)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train_context)

    p = sub.add_parser("calibrate", help="set a dictionary's gamma from a target rate")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True, help="dictionary file, updated in place")
    p.add_argument("--model", required=True)
    p.add_argument("--target", type=float, default=None,
                   help="mean smooth matches per document (default: literal mean)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("suggest", help="rank candidate terms for a dictionary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--min-occurrences", type=int, default=3)
    p.add_argument("--max-len", type=int, default=1)
    p.set_defaults(func=cmd_suggest)

    p = sub.add_parser("rank-contexts", help="show term occurrences ranked by probability")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--term", required=True)
    p.add_argument("--limit", type=int, default=0)
    p.set_defaults(func=cmd_rank_contexts)

    p = sub.add_parser("featurize", help="vectorize a corpus under a scheme")
    p.add_argument("--corpus", required=True)
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--dict", action="append")
    p.add_argument("--context-model", action="append")
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a classifier on a features file")
    p.add_argument("--features", required=True)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--l1", type=float, default=None,
                   help="use L1 regularization at this strength instead of L2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a labeled JSONL corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", action="append")
    p.add_argument("--context-model", action="append")
    p.add_argument("--pr-csv", help="also write the PR curve as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--corpus", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--ratio", type=float, default=10.0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--target", type=float, default=None)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SemfeatError as exc:
        print(f"semfeat: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"semfeat: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
