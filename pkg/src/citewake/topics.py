"""Title-based topic assignment and topical popularity/retraction series.

The default annotator is an offline dictionary: a UTF-8 file of
"phrase<TAB>topic_key" lines.  Titles are tokenized case-insensitively and
scanned left to right with longest-match-first semantics, so a phrase like
"gene expression" beats its prefix "gene".  Anything satisfying the
TitleAnnotator protocol (for instance an adapter around a remote annotation
service) can be swapped in; nothing in this package requires network access.

For a topic k, Pop(y) is the fraction of all papers published in year y that
carry k, and Ret(y) is the fraction of all papers published in y that are
retracted papers carrying k.  Both share the same denominator, all papers
published in y.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol

from . import CitewakeError
from .corpus import Corpus
from .stats import GrangerResult, StatsError, granger_test


class TopicsError(CitewakeError):
    module = "topics"


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class TitleAnnotator(Protocol):
    """Pluggable topic annotator over paper titles."""

    @property
    def topics(self) -> frozenset[str]: ...

    def annotate(self, title: str) -> frozenset[str]: ...


class DictionaryAnnotator:
    """Longest-match phrase dictionary, case-insensitive, offline."""

    def __init__(self, phrases: dict[str, str]):
        if not phrases:
            raise TopicsError("empty topic dictionary")
        self._by_tokens: dict[tuple[str, ...], str] = {}
        for phrase, topic in phrases.items():
            toks = tuple(_tokens(phrase))
            if not toks:
                raise TopicsError(f"phrase {phrase!r} has no tokens")
            self._by_tokens[toks] = topic
        self._max_len = max(len(t) for t in self._by_tokens)
        self._topics = frozenset(self._by_tokens.values())

    @classmethod
    def from_file(cls, path: str | Path) -> "DictionaryAnnotator":
        path = Path(path)
        if not path.exists():
            raise TopicsError(f"dictionary file not found: {path}")
        phrases: dict[str, str] = {}
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                if "\t" not in line:
                    raise TopicsError(f"{path.name} line {lineno}: expected phrase<TAB>topic")
                phrase, topic = line.split("\t", 1)
                phrases[phrase.strip()] = topic.strip()
        return cls(phrases)

    @property
    def topics(self) -> frozenset[str]:
        return self._topics

    def annotate(self, title: str) -> frozenset[str]:
        toks = _tokens(title)
        found: set[str] = set()
        i = 0
        while i < len(toks):
            matched = 0
            for length in range(min(self._max_len, len(toks) - i), 0, -1):
                topic = self._by_tokens.get(tuple(toks[i : i + length]))
                if topic is not None:
                    found.add(topic)
                    matched = length
                    break
            i += matched if matched else 1
        return frozenset(found)


class CallableAnnotator:
    """Adapter for an external annotation backend supplied as a callable."""

    def __init__(self, topics: Iterable[str], fetch: Callable[[str], Iterable[str]]):
        self._topics = frozenset(topics)
        self._fetch = fetch

    @property
    def topics(self) -> frozenset[str]:
        return self._topics

    def annotate(self, title: str) -> frozenset[str]:
        found = frozenset(self._fetch(title))
        unknown = found - self._topics
        if unknown:
            raise TopicsError(f"annotator returned unknown topics: {sorted(unknown)}")
        return found


@dataclass(frozen=True, slots=True)
class TopicAssignment:
    paper_id: str
    topics: frozenset[str]


_EMPTY = TopicAssignment(paper_id="", topics=frozenset())


def annotate_titles(
    corpus: Corpus, annotator: TitleAnnotator
) -> dict[str, TopicAssignment]:
    return {
        pid: TopicAssignment(paper_id=pid, topics=annotator.annotate(rec.title))
        for pid, rec in corpus.papers.items()
    }


@dataclass(frozen=True, slots=True)
class TopicSeries:
    topic: str
    esi_category: Optional[str]
    pop: dict[int, float]
    ret: dict[int, float]


def _known_topics(assignments: dict[str, TopicAssignment]) -> set[str]:
    out: set[str] = set()
    for a in assignments.values():
        out |= a.topics
    return out


def topic_series(
    corpus: Corpus, assignments: dict[str, TopicAssignment], topic: str
) -> TopicSeries:
    """Yearly popularity and retraction-rate series for one topic."""
    if topic not in _known_topics(assignments):
        raise TopicsError(f"unknown topic {topic!r}")
    pop: dict[int, float] = {}
    ret: dict[int, float] = {}
    esi_counts: Counter[str] = Counter()
    for year in sorted(corpus.by_year):
        pids = corpus.by_year[year]
        members = [
            pid for pid in pids if topic in assignments.get(pid, _EMPTY).topics
        ]
        retracted = sum(1 for pid in members if pid in corpus.retracted)
        pop[year] = len(members) / len(pids)
        ret[year] = retracted / len(pids)
        esi_counts.update(corpus.papers[pid].esi_category for pid in members)
    esi = (
        min(esi_counts, key=lambda c: (-esi_counts[c], c)) if esi_counts else None
    )
    return TopicSeries(topic=topic, esi_category=esi, pop=pop, ret=ret)


@dataclass(frozen=True, slots=True)
class TopicRank:
    topic: str
    frequency: int
    esi_category: Optional[str]


def top_topics(
    corpus: Corpus, assignments: dict[str, TopicAssignment], limit: int = 10
) -> list[TopicRank]:
    """Topics ranked by frequency among retracted papers; ties by name."""
    freq: Counter[str] = Counter()
    for pid in corpus.retracted:
        for topic in assignments.get(pid, _EMPTY).topics:
            freq[topic] += 1
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]
    out = []
    for topic, count in ranked:
        esi_counts = Counter(
            corpus.papers[pid].esi_category
            for pid, a in assignments.items()
            if topic in a.topics
        )
        esi = min(esi_counts, key=lambda c: (-esi_counts[c], c)) if esi_counts else None
        out.append(TopicRank(topic=topic, frequency=count, esi_category=esi))
    return out


@dataclass(frozen=True, slots=True)
class GrangerCell:
    topic: str
    n_lags: int
    result: Optional[GrangerResult]
    status: str  # ok | not_computable

    @property
    def significant(self) -> bool:
        return self.result is not None and self.result.p_value < 0.05

    @property
    def max_abs_a(self) -> Optional[float]:
        if self.result is None:
            return None
        return max(abs(a) for a in self.result.a_coeffs)

    @property
    def max_abs_b(self) -> Optional[float]:
        if self.result is None:
            return None
        return max(abs(b) for b in self.result.b_coeffs)


def topic_granger_screen(
    corpus: Corpus,
    assignments: dict[str, TopicAssignment],
    topics: Iterable[str],
    lags: Iterable[int] = (1, 2, 3),
) -> list[GrangerCell]:
    """Does a topic's retraction rate help predict its popularity?

    Runs granger_test with X = the topic's retraction-rate series and
    Y = its popularity series, for each topic and lag order.  Series too
    short for a lag are reported as not-computable rather than raised.
    """
    cells: list[GrangerCell] = []
    for topic in topics:
        series = topic_series(corpus, assignments, topic)
        years = sorted(series.pop)
        x = [series.ret[y] for y in years]
        y = [series.pop[y] for y in years]
        for n in lags:
            try:
                result = granger_test(x, y, n)
            except StatsError:
                cells.append(GrangerCell(topic, n, None, "not_computable"))
                continue
            cells.append(GrangerCell(topic, n, result, "ok"))
    return cells
