"""Corpus ingestion, tokenization, and positional keyword search.

A corpus is immutable once ingested: every document carries its cached
token stream, and an inverted index maps each token to every
(doc_id, position) where it occurs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .errors import DataError, NotFoundError

# Maximal alphanumeric runs become tokens; any other non-whitespace
# character is a single-character token. [^\W_] is "word char minus
# underscore", i.e. Unicode alphanumeric.
_TOKEN_RE = re.compile(r"[^\W_]+|\S")


def tokenize(text: str) -> list[str]:
    """Split text into lowercase tokens.

    Lowercasing uses the plain per-string Unicode mapping; numbers are kept
    verbatim and punctuation survives as single-character tokens. No
    stemming, no stop-word removal. Deterministic: the same text always
    yields the same token list.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    """One ingested document with its cached token stream."""

    id: str
    text: str
    tokens: tuple[str, ...]
    label: Optional[int] = None  # ground-truth 0/1 when supplied at ingest


@dataclass(frozen=True)
class NgramRef:
    """A token span inside one document: tokens[start : start+length)."""

    doc_id: str
    start: int
    length: int = 1

    @property
    def end(self) -> int:
        return self.start + self.length


class Corpus:
    """Ordered, immutable collection of documents plus an inverted index.

    Safe for concurrent reads; there is no mutation API, new documents
    require a fresh ingest.
    """

    def __init__(self, documents: Sequence[Document]):
        self._docs: dict[str, Document] = {}
        index: dict[str, list[tuple[str, int]]] = {}
        for doc in documents:
            if doc.id in self._docs:
                raise DataError(f"duplicate document id {doc.id!r}", code="duplicate_id")
            self._docs[doc.id] = doc
            for pos, tok in enumerate(doc.tokens):
                index.setdefault(tok, []).append((doc.id, pos))
        for postings in index.values():
            postings.sort()
        self._index = index

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    @property
    def documents(self) -> list[Document]:
        return list(self._docs.values())

    @property
    def doc_ids(self) -> list[str]:
        return list(self._docs.keys())

    def doc(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise NotFoundError(f"unknown document {doc_id!r}", code="unknown_document") from None

    def postings(self, token: str) -> list[tuple[str, int]]:
        """All (doc_id, position) pairs for one token, sorted."""
        return self._index.get(token, [])

    def token_count(self) -> int:
        return sum(len(d.tokens) for d in self._docs.values())

    def index_entry_count(self) -> int:
        return sum(len(p) for p in self._index.values())

    def labeled_ids(self, label: int) -> list[str]:
        """Ids of documents whose ground-truth label equals ``label``."""
        return [d.id for d in self._docs.values() if d.label == label]


def ingest(records: Iterable[tuple[str, str, Optional[int]]]) -> Corpus:
    """Build a Corpus from (id, text, label) records.

    Raises DataError naming the offending id on duplicates.
    """
    docs = []
    seen: set[str] = set()
    for doc_id, text, label in records:
        if doc_id in seen:
            raise DataError(f"duplicate document id {doc_id!r}", code="duplicate_id")
        seen.add(doc_id)
        docs.append(Document(id=doc_id, text=text, tokens=tuple(tokenize(text)), label=label))
    return Corpus(docs)


def read_jsonl(lines: Iterable[str]) -> Iterator[tuple[str, str, Optional[int]]]:
    """Parse the corpus wire format: one {"id","text","label"?} object per line.

    Blank lines are skipped. Malformed records raise DataError carrying the
    1-based line number.
    """
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {lineno}: invalid JSON ({exc.msg})", code="malformed_record") from None
        if not isinstance(obj, dict):
            raise DataError(f"line {lineno}: record is not a JSON object", code="malformed_record")
        doc_id = obj.get("id")
        text = obj.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"line {lineno}: missing or non-string 'id'", code="malformed_record")
        if not isinstance(text, str):
            raise DataError(f"line {lineno}: missing or non-string 'text'", code="malformed_record")
        label = obj.get("label")
        if label is not None and label not in (0, 1):
            raise DataError(f"line {lineno}: 'label' must be 0 or 1", code="malformed_record")
        yield doc_id, text, label


def load_corpus(path) -> Corpus:
    """Read a JSONL corpus file from disk."""
    with open(path, encoding="utf-8") as fh:
        return ingest(read_jsonl(fh))


def save_corpus(corpus: Corpus, path) -> None:
    """Write the corpus back out in the JSONL wire format."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            rec: dict = {"id": doc.id, "text": doc.text}
            if doc.label is not None:
                rec["label"] = doc.label
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def keyword_search(corpus: Corpus, query: Sequence[str]) -> list[NgramRef]:
    """All positions where the query tokens occur contiguously.

    Results are ordered by (doc id, start). Empty result on no hit.
    """
    if not query:
        raise DataError("empty query", code="empty_query")
    refs = []
    for doc_id, pos in corpus.postings(query[0]):
        tokens = corpus.doc(doc_id).tokens
        if pos + len(query) > len(tokens):
            continue
        if all(tokens[pos + i] == q for i, q in enumerate(query)):
            refs.append(NgramRef(doc_id=doc_id, start=pos, length=len(query)))
    return refs


def ngram_at(corpus: Corpus, ref: NgramRef) -> tuple[str, ...]:
    """Tokens of the referenced span; raises on out-of-range refs."""
    doc = corpus.doc(ref.doc_id)
    if ref.start < 0 or ref.length < 1 or ref.end > len(doc.tokens):
        raise DataError(
            f"ngram ref out of range: start={ref.start} length={ref.length} "
            f"doc has {len(doc.tokens)} tokens",
            code="invalid_ref",
        )
    return doc.tokens[ref.start : ref.end]
