"""Bibliographic corpus: ingestion, indexing, and descriptive statistics.

The corpus is an in-memory collection of paper records with a citation graph
derived from their reference lists.  Entity identity for authors and
institutions is a normalized exact string match (lowercase, collapsed
whitespace, punctuation stripped); no ML disambiguation is attempted.

Dangling-edge policy: a reference pointing outside the corpus is kept in the
paper's ``references`` list (it still participates in reference-set overlap
measures) but produces no ``cited_by`` edge, so citation counts only reflect
in-corpus citations.

A paper counts as retracted when its title contains the phrase "retracted
article" (case-insensitive) or when it carries an explicit retraction notice.
Title-only retractions have no known retraction year and are skipped by
statistics that need one.
"""

from __future__ import annotations

import csv
import json
import re
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from . import CitewakeError
from .annotation import ReasonCode

DEFAULT_YEAR_WINDOW = (1980, 2014)

RETRACTED_TITLE_PATTERN = re.compile(r"retracted article", re.IGNORECASE)

_PUNCT_RE = re.compile(r"[^\w\s-]")
_WS_RE = re.compile(r"\s+")


class CorpusError(CitewakeError):
    module = "corpus"


def normalize_name(raw: str) -> str:
    """Lowercase, strip punctuation except hyphens, collapse whitespace."""
    cleaned = _PUNCT_RE.sub("", raw.lower())
    return _WS_RE.sub(" ", cleaned).strip()


class EntityKind(str, Enum):
    PAPER = "paper"
    AUTHOR = "author"
    INSTITUTION = "institution"


@dataclass(frozen=True, slots=True)
class EntityKey:
    kind: EntityKind
    key: str

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.key}"


@dataclass(frozen=True, slots=True)
class RetractionNotice:
    retraction_year: int
    reason: Optional[ReasonCode] = None
    requester: str = "not_found"


@dataclass(frozen=True, slots=True)
class PaperRecord:
    paper_id: str
    title: str
    pub_year: int
    journal: str
    esi_category: str
    author_names: tuple[str, ...]
    institution_names: tuple[str, ...]
    references: tuple[str, ...]
    pub_month: Optional[int] = None
    retraction: Optional[RetractionNotice] = None

    @property
    def pub_date(self) -> tuple[int, Optional[int]]:
        """Match granularity: (year, month) when month is known, else year only."""
        return (self.pub_year, self.pub_month)


@dataclass
class Corpus:
    """Immutable after construction; all maps keep file insertion order."""

    papers: dict[str, PaperRecord]
    cited_by: dict[str, list[str]]
    by_author: dict[str, list[str]]
    by_institution: dict[str, list[str]]
    by_year: dict[int, list[str]]
    by_journal: dict[str, list[str]]
    retracted: set[str] = field(default_factory=set)

    def is_retracted(self, paper_id: str) -> bool:
        return paper_id in self.retracted

    def retraction_year(self, paper_id: str) -> Optional[int]:
        paper = self.papers[paper_id]
        if paper.retraction is None:
            return None
        return paper.retraction.retraction_year

    def citation_count(self, paper_id: str) -> int:
        return len(self.cited_by.get(paper_id, ()))

    def year_range(self) -> tuple[int, int]:
        years = self.by_year.keys()
        return (min(years), max(years))


# ---------------------------------------------------------------------------
# Ingestion


def _validate_record(rec: PaperRecord, window: tuple[int, int], where: str) -> None:
    lo, hi = window
    if not (lo <= rec.pub_year <= hi):
        raise CorpusError(
            f"{where}: pub_year {rec.pub_year} outside corpus window {lo}-{hi}"
        )
    if rec.pub_month is not None and not (1 <= rec.pub_month <= 12):
        raise CorpusError(f"{where}: pub_month {rec.pub_month} not in 1-12")
    if rec.paper_id in rec.references:
        raise CorpusError(f"{where}: self-citation edge on {rec.paper_id!r}")
    if len(set(rec.references)) != len(rec.references):
        raise CorpusError(f"{where}: duplicate reference in {rec.paper_id!r}")
    if rec.retraction is not None and rec.retraction.retraction_year < rec.pub_year:
        raise CorpusError(
            f"{where}: retraction year {rec.retraction.retraction_year} precedes "
            f"publication year {rec.pub_year} for {rec.paper_id!r}"
        )


def build_corpus(
    records: Iterable[PaperRecord],
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW,
) -> Corpus:
    """Index parsed records into a Corpus; raises on invariant violations."""
    papers: dict[str, PaperRecord] = {}
    for i, rec in enumerate(records):
        where = f"record {i + 1}"
        if rec.paper_id in papers:
            raise CorpusError(f"{where}: duplicate paper_id {rec.paper_id!r}")
        _validate_record(rec, year_window, where)
        papers[rec.paper_id] = rec

    cited_by: dict[str, list[str]] = {pid: [] for pid in papers}
    by_author: dict[str, list[str]] = {}
    by_institution: dict[str, list[str]] = {}
    by_year: dict[int, list[str]] = {}
    by_journal: dict[str, list[str]] = {}
    for pid, rec in papers.items():
        for ref in rec.references:
            if ref in papers:
                cited_by[ref].append(pid)
        for name in rec.author_names:
            norm = normalize_name(name)
            if norm:
                by_author.setdefault(norm, []).append(pid)
        for name in rec.institution_names:
            norm = normalize_name(name)
            if norm:
                by_institution.setdefault(norm, []).append(pid)
        by_year.setdefault(rec.pub_year, []).append(pid)
        by_journal.setdefault(rec.journal, []).append(pid)

    corpus = Corpus(
        papers=papers,
        cited_by=cited_by,
        by_author=by_author,
        by_institution=by_institution,
        by_year=by_year,
        by_journal=by_journal,
    )
    detect_retractions(corpus)
    return corpus


def _parse_notice(obj: dict, where: str) -> RetractionNotice:
    if "retraction_year" not in obj:
        raise CorpusError(f"{where}: retraction notice missing retraction_year")
    reason_raw = obj.get("reason")
    reason: Optional[ReasonCode] = None
    if reason_raw not in (None, "", "unknown"):
        try:
            reason = ReasonCode(reason_raw)
        except ValueError:
            raise CorpusError(f"{where}: unknown retraction reason {reason_raw!r}") from None
    requester = obj.get("requester") or "not_found"
    if requester not in ("editor", "author", "not_found"):
        raise CorpusError(f"{where}: unknown requester {requester!r}")
    return RetractionNotice(
        retraction_year=int(obj["retraction_year"]),
        reason=reason,
        requester=requester,
    )


_REQUIRED_FIELDS = ("paper_id", "title", "pub_year", "journal", "esi_category")


def _record_from_obj(obj: dict, where: str) -> PaperRecord:
    for name in _REQUIRED_FIELDS:
        if obj.get(name) in (None, ""):
            raise CorpusError(f"{where}: missing field {name!r}")
    try:
        pub_year = int(obj["pub_year"])
    except (TypeError, ValueError):
        raise CorpusError(f"{where}: pub_year {obj['pub_year']!r} is not an integer") from None
    pub_month = obj.get("pub_month")
    if pub_month not in (None, ""):
        pub_month = int(pub_month)
    else:
        pub_month = None
    retraction = None
    if obj.get("retraction"):
        retraction = _parse_notice(obj["retraction"], where)
    return PaperRecord(
        paper_id=str(obj["paper_id"]),
        title=str(obj["title"]),
        pub_year=pub_year,
        pub_month=pub_month,
        journal=str(obj["journal"]),
        esi_category=str(obj["esi_category"]),
        author_names=tuple(obj.get("author_names") or ()),
        institution_names=tuple(obj.get("institution_names") or ()),
        references=tuple(obj.get("references") or ()),
        retraction=retraction,
    )


def _iter_jsonl(path: Path) -> Iterable[PaperRecord]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{where}: expected a JSON object")
            yield _record_from_obj(obj, where)


def _split_list(cell: str) -> list[str]:
    return [part.strip() for part in cell.split(";") if part.strip()]


def _iter_csv(path: Path) -> Iterable[PaperRecord]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            where = f"{path.name} line {lineno}"
            obj: dict = dict(row)
            obj["author_names"] = _split_list(row.get("author_names") or "")
            obj["institution_names"] = _split_list(row.get("institution_names") or "")
            obj["references"] = _split_list(row.get("references") or "")
            if row.get("retraction_year"):
                obj["retraction"] = {
                    "retraction_year": row["retraction_year"],
                    "reason": row.get("retraction_reason") or None,
                    "requester": row.get("retraction_requester") or None,
                }
            else:
                obj["retraction"] = None
            yield _record_from_obj(obj, where)


def record_to_obj(rec: PaperRecord) -> dict:
    """JSON-ready dict in the JSONL input schema."""
    obj = {
        "paper_id": rec.paper_id,
        "title": rec.title,
        "pub_year": rec.pub_year,
        "pub_month": rec.pub_month,
        "journal": rec.journal,
        "esi_category": rec.esi_category,
        "author_names": list(rec.author_names),
        "institution_names": list(rec.institution_names),
        "references": list(rec.references),
    }
    if rec.retraction is not None:
        obj["retraction"] = {
            "retraction_year": rec.retraction.retraction_year,
            "reason": rec.retraction.reason.value if rec.retraction.reason else None,
            "requester": rec.retraction.requester,
        }
    return obj


def ingest_corpus(
    path: str | Path,
    format: str = "jsonl",
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW,
) -> Corpus:
    """Parse a JSONL or CSV corpus file and build the indexed Corpus."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"input file not found: {path}")
    if format == "jsonl":
        records = _iter_jsonl(path)
    elif format == "csv":
        records = _iter_csv(path)
    else:
        raise CorpusError(f"unknown format {format!r} (expected jsonl or csv)")
    return build_corpus(records, year_window=year_window)


# ---------------------------------------------------------------------------
# Retraction detection and descriptive statistics


def detect_retractions(corpus: Corpus) -> list[str]:
    """Mark and return papers retracted by title pattern or explicit notice."""
    found = [
        pid
        for pid, rec in corpus.papers.items()
        if rec.retraction is not None or RETRACTED_TITLE_PATTERN.search(rec.title)
    ]
    corpus.retracted = set(found)
    return found


def annual_retraction_rate(corpus: Corpus) -> dict[int, float]:
    """Share of each year's publications that were later retracted.

    Attributed to publication year; denominators include the retracted
    papers themselves.
    """
    rates: dict[int, float] = {}
    for year in sorted(corpus.by_year):
        pids = corpus.by_year[year]
        retracted = sum(1 for pid in pids if pid in corpus.retracted)
        rates[year] = retracted / len(pids)
    return rates


@dataclass(frozen=True, slots=True)
class DelayStats:
    per_paper: dict[str, int]
    median_by_year: dict[int, float]
    median_overall: Optional[float]


def retraction_delay(corpus: Corpus) -> DelayStats:
    """Years from publication to retraction, per paper and median per retraction year.

    Papers without a retraction notice (title-only detections) carry no
    retraction year and are excluded.
    """
    per_paper: dict[str, int] = {}
    by_year: dict[int, list[int]] = {}
    for pid in corpus.retracted:
        rec = corpus.papers[pid]
        if rec.retraction is None:
            continue
        delay = rec.retraction.retraction_year - rec.pub_year
        per_paper[pid] = delay
        by_year.setdefault(rec.retraction.retraction_year, []).append(delay)
    median_by_year = {
        year: float(statistics.median(delays))
        for year, delays in sorted(by_year.items())
    }
    overall = float(statistics.median(per_paper.values())) if per_paper else None
    return DelayStats(per_paper=per_paper, median_by_year=median_by_year, median_overall=overall)


@dataclass(frozen=True, slots=True)
class EsiRate:
    esi_category: str
    retracted: int
    total: int
    rate: float


def esi_retraction_rates(corpus: Corpus) -> list[EsiRate]:
    """Per-field retraction rates, sorted by rate descending then category name."""
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for pid, rec in corpus.papers.items():
        totals[rec.esi_category] = totals.get(rec.esi_category, 0) + 1
        if pid in corpus.retracted:
            hits[rec.esi_category] = hits.get(rec.esi_category, 0) + 1
    rows = [
        EsiRate(cat, hits.get(cat, 0), total, hits.get(cat, 0) / total)
        for cat, total in totals.items()
    ]
    rows.sort(key=lambda r: (-r.rate, r.esi_category))
    return rows


@dataclass(frozen=True, slots=True)
class CitationDistribution:
    counts: dict[str, int]
    histogram: list[tuple[int, int, int]]
    median: Optional[float]


def citation_distribution(corpus: Corpus, subset: str = "all") -> CitationDistribution:
    """Total citation counts over a paper subset, with log-binned histogram.

    Histogram bins are [0,1), [1,2), [2,4), [4,8), ... doubling upward.
    An empty subset yields an empty histogram and an undefined (None) median.
    """
    if subset == "all":
        pids = list(corpus.papers)
    elif subset == "retracted":
        pids = [pid for pid in corpus.papers if pid in corpus.retracted]
    else:
        raise CorpusError(f"unknown subset {subset!r} (expected all or retracted)")
    counts = {pid: corpus.citation_count(pid) for pid in pids}
    if not counts:
        return CitationDistribution(counts={}, histogram=[], median=None)
    max_count = max(counts.values())
    edges = [0, 1]
    while edges[-1] <= max_count:
        edges.append(edges[-1] * 2)
    histogram = []
    for lo, hi in zip(edges, edges[1:]):
        n = sum(1 for c in counts.values() if lo <= c < hi)
        histogram.append((lo, hi, n))
    median = float(statistics.median(counts.values()))
    return CitationDistribution(counts=counts, histogram=histogram, median=median)
