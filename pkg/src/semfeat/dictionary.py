"""Teacher-authored dictionaries and literal multi-pattern matching.

A dictionary is a named set of n-gram terms treated as one semantic
concept. Literal matching runs an Aho-Corasick automaton over the token
stream so every term is found in one pass; the document-level feature is
log(1 + match count), independent of which terms matched.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import Corpus, tokenize
from .errors import DataError


@dataclass
class Dictionary:
    """Named set of n-gram terms with an optional smooth-match threshold.

    ``terms`` keeps insertion order; the index of a term in it is the
    term index reported in match lists. ``gamma`` stays None until the
    teacher or the calibrator sets it; when set it must lie in (0, 1].
    """

    id: str
    name: str
    terms: tuple[tuple[str, ...], ...]
    gamma: Optional[float] = None

    @classmethod
    def from_texts(cls, id: str, name: str, term_texts: Sequence[str],
                   gamma: Optional[float] = None) -> "Dictionary":
        """Build a dictionary from raw term strings, tokenizing each."""
        return cls(id=id, name=name,
                   terms=tuple(tuple(tokenize(t)) for t in term_texts),
                   gamma=gamma)

    def term_set(self) -> set[tuple[str, ...]]:
        return set(self.terms)

    def to_json(self) -> dict:
        obj: dict = {"id": self.id, "name": self.name,
                     "terms": [list(t) for t in self.terms]}
        if self.gamma is not None:
            obj["gamma"] = self.gamma
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Dictionary":
        return cls(
            id=obj["id"],
            name=obj.get("name", obj["id"]),
            terms=tuple(tuple(t) for t in obj["terms"]),
            gamma=obj.get("gamma"),
        )


def load_dictionary(path) -> Dictionary:
    with open(path, encoding="utf-8") as fh:
        return Dictionary.from_json(json.load(fh))


def save_dictionary(d: Dictionary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d.to_json(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class MatchList:
    """Literal matches of one dictionary in one document.

    ``matches`` holds (start, length, term_index) triples sorted by
    (start, length); each distinct span appears once.
    """

    dictionary_id: str
    doc_id: str
    matches: tuple[tuple[int, int, int], ...]

    @property
    def count(self) -> int:
        return len(self.matches)


class TokenMatcher:
    """Aho-Corasick automaton over token sequences.

    Built once per pattern set, then matches any token stream in a single
    left-to-right pass regardless of how many patterns there are.
    """

    def __init__(self, patterns: Sequence[tuple[str, ...]]):
        self._patterns = [tuple(p) for p in patterns]
        # state 0 is the root; goto maps state -> {token: state}
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[list[int]] = [[]]
        for idx, pattern in enumerate(self._patterns):
            if not pattern:
                raise DataError("empty pattern", code="empty_term")
            state = 0
            for tok in pattern:
                nxt = self._goto[state].get(tok)
                if nxt is None:
                    nxt = len(self._goto)
                    self._goto.append({})
                    self._fail.append(0)
                    self._out.append([])
                    self._goto[state][tok] = nxt
                state = nxt
            self._out[state].append(idx)
        self._build_failure_links()

    def _build_failure_links(self) -> None:
        queue: deque[int] = deque()
        for state in self._goto[0].values():
            self._fail[state] = 0
            queue.append(state)
        while queue:
            state = queue.popleft()
            for tok, nxt in self._goto[state].items():
                queue.append(nxt)
                fall = self._fail[state]
                while fall and tok not in self._goto[fall]:
                    fall = self._fail[fall]
                self._fail[nxt] = self._goto[fall].get(tok, 0)
                if self._fail[nxt] == nxt:
                    self._fail[nxt] = 0
                self._out[nxt] = self._out[nxt] + self._out[self._fail[nxt]]

    def find(self, tokens: Sequence[str]) -> list[tuple[int, int, int]]:
        """All (start, length, pattern_index) matches, sorted by (start, length)."""
        hits = []
        state = 0
        for end, tok in enumerate(tokens):
            while state and tok not in self._goto[state]:
                state = self._fail[state]
            state = self._goto[state].get(tok, 0)
            for idx in self._out[state]:
                length = len(self._patterns[idx])
                hits.append((end - length + 1, length, idx))
        hits.sort()
        return hits


def literal_matches(corpus: Corpus, d: Dictionary, doc_id: str,
                    matcher: Optional[TokenMatcher] = None) -> MatchList:
    """Every position where any term of the dictionary occurs.

    Overlapping occurrences of distinct terms are all reported; a given
    (start, length) span appears at most once. Pass a prebuilt ``matcher``
    when scanning many documents with the same dictionary.
    """
    doc = corpus.doc(doc_id)
    if matcher is None:
        matcher = TokenMatcher(d.terms)
    return MatchList(dictionary_id=d.id, doc_id=doc_id,
                     matches=tuple(matcher.find(doc.tokens)))


def corpus_matches(corpus: Corpus, d: Dictionary) -> dict[str, MatchList]:
    """Literal matches for every document, built with a single automaton."""
    matcher = TokenMatcher(d.terms)
    return {doc.id: MatchList(dictionary_id=d.id, doc_id=doc.id,
                              matches=tuple(matcher.find(doc.tokens)))
            for doc in corpus.documents}


def dict_feature(match_count: int) -> float:
    """Document feature for a dictionary: natural log of (1 + match count)."""
    if match_count < 0:
        raise DataError("match count must be nonnegative", code="negative_count")
    return math.log1p(match_count)


def validate_dictionary(d: Dictionary) -> list[str]:
    """Check a dictionary for structural problems.

    Returns a list of human-readable findings; empty means well-formed.
    Reported findings: empty term list, empty terms, duplicate terms, and
    terms not stored in canonical (tokenized, lowercase) form.
    """
    findings = []
    if not d.terms:
        findings.append("dictionary has no terms")
    seen: set[tuple[str, ...]] = set()
    for term in d.terms:
        if not term:
            findings.append("empty term")
            continue
        if term in seen:
            findings.append(f"duplicate term {' '.join(term)!r}")
        seen.add(term)
        if tuple(tokenize(" ".join(term))) != term:
            findings.append(f"term {' '.join(term)!r} not in canonical token form")
    if d.gamma is not None and not (0.0 < d.gamma <= 1.0):
        findings.append(f"gamma {d.gamma} outside (0, 1]")
    return findings
