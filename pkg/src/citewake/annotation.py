"""Retraction-reason coding: schema, multi-rater ingestion, agreement, trends.

Retractions are coded along two axes: the *reason* (plagiarism, falsification
or fabrication, violation of rules, unintended error, other, or not found)
and the *requester* (editor, author, not found).  The first three reasons
together form the misconduct group.  Multiple raters may code the same paper;
``fleiss_kappa`` quantifies their agreement and ``resolve_reasons`` merges
them into one code per paper by majority vote.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from . import CitewakeError

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Corpus


class AnnotationError(CitewakeError):
    module = "annotation"


class ReasonCode(str, Enum):
    PLAGIARISM = "plagiarism"
    FALSIFICATION_FABRICATION = "falsification_fabrication"
    VIOLATION_OF_RULES = "violation_of_rules"
    ERROR = "error"
    OTHER = "other"
    NOT_FOUND = "not_found"

    @property
    def is_misconduct(self) -> bool:
        return self in MISCONDUCT_REASONS


MISCONDUCT_REASONS = frozenset(
    {
        ReasonCode.PLAGIARISM,
        ReasonCode.FALSIFICATION_FABRICATION,
        ReasonCode.VIOLATION_OF_RULES,
    }
)

REQUESTERS = ("editor", "author", "not_found")


@dataclass(frozen=True, slots=True)
class AnnotationRecord:
    """One rater's coding of one retracted paper."""

    paper_id: str
    rater_id: str
    reason: ReasonCode
    requester: str

    def __post_init__(self) -> None:
        if self.requester not in REQUESTERS:
            raise AnnotationError(
                f"unknown requester {self.requester!r} for paper {self.paper_id!r}"
            )


def load_annotations_csv(path: str | Path) -> list[AnnotationRecord]:
    """Read annotation records from CSV with columns paper_id, rater_id, reason, requester."""
    path = Path(path)
    if not path.exists():
        raise AnnotationError(f"annotation file not found: {path}")
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"paper_id", "rater_id", "reason", "requester"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise AnnotationError(
                f"annotation CSV must have columns {sorted(required)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            key = (row["paper_id"], row["rater_id"])
            if key in seen:
                raise AnnotationError(
                    f"duplicate (paper_id, rater_id) {key} at line {lineno}"
                )
            seen.add(key)
            try:
                reason = ReasonCode(row["reason"])
            except ValueError:
                raise AnnotationError(
                    f"unknown reason {row['reason']!r} at line {lineno}"
                ) from None
            records.append(
                AnnotationRecord(
                    paper_id=row["paper_id"],
                    rater_id=row["rater_id"],
                    reason=reason,
                    requester=row["requester"],
                )
            )
    return records


@dataclass(frozen=True, slots=True)
class FleissKappaResult:
    kappa: float
    n_subjects: int
    n_raters: int
    excluded_subjects: int
    degenerate: bool = False


def fleiss_kappa(
    records: Sequence[AnnotationRecord],
    category_axis: str = "reason",
    strict: bool = False,
) -> FleissKappaResult:
    """Fleiss' kappa over subjects (papers) coded by a fixed number of raters.

    kappa = (Pbar - PbarE) / (1 - PbarE), where Pbar is the mean per-subject
    pairwise agreement and PbarE the chance agreement from the marginal
    category proportions.

    Subjects must all have the same rater count; the modal count is taken as
    the panel size and subjects with any other count are dropped (reported in
    ``excluded_subjects``).  With ``strict=True`` such subjects raise instead.
    When all mass falls in one category, chance agreement is 1 and kappa is
    undefined; that case is returned with ``degenerate=True`` and a NaN kappa.
    """
    if category_axis not in ("reason", "requester"):
        raise AnnotationError(f"unknown category_axis {category_axis!r}")
    by_subject: dict[str, list[str]] = defaultdict(list)
    for rec in records:
        value = rec.reason.value if category_axis == "reason" else rec.requester
        by_subject[rec.paper_id].append(value)
    if not by_subject:
        raise AnnotationError("no annotation records")

    count_freq = Counter(len(v) for v in by_subject.values())
    # Panel size = modal rater count, ties resolved toward the larger panel.
    n_raters = max(sorted(count_freq), key=lambda c: (count_freq[c], c))
    if n_raters < 2:
        raise AnnotationError("need at least 2 raters per subject")
    offending = sorted(s for s, v in by_subject.items() if len(v) != n_raters)
    if offending and strict:
        raise AnnotationError(
            f"unequal rater counts for subjects: {', '.join(offending)}"
        )
    subjects = sorted(s for s in by_subject if s not in set(offending))
    if not subjects:
        raise AnnotationError("no subjects with the modal rater count")

    categories = sorted({v for s in subjects for v in by_subject[s]})
    n = n_raters
    n_subj = len(subjects)
    category_totals = dict.fromkeys(categories, 0)
    p_sum = 0.0
    for s in subjects:
        counts = Counter(by_subject[s])
        p_sum += (sum(c * c for c in counts.values()) - n) / (n * (n - 1))
        for cat, c in counts.items():
            category_totals[cat] += c
    p_bar = p_sum / n_subj
    p_e = sum((t / (n_subj * n)) ** 2 for t in category_totals.values())
    if p_e == 1.0:
        return FleissKappaResult(
            kappa=float("nan"),
            n_subjects=n_subj,
            n_raters=n,
            excluded_subjects=len(offending),
            degenerate=True,
        )
    kappa = (p_bar - p_e) / (1.0 - p_e)
    return FleissKappaResult(
        kappa=kappa,
        n_subjects=n_subj,
        n_raters=n,
        excluded_subjects=len(offending),
    )


def resolve_reasons(
    records: Sequence[AnnotationRecord], resolution: str = "majority"
) -> dict[str, ReasonCode]:
    """Merge multi-rater codes into one reason per paper.

    majority: most frequent code wins, ties resolve to not_found.
    first_rater: the code of the lexicographically first rater_id.
    """
    if resolution not in ("majority", "first_rater"):
        raise AnnotationError(f"unknown resolution {resolution!r}")
    by_subject: dict[str, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        by_subject[rec.paper_id].append(rec)
    resolved: dict[str, ReasonCode] = {}
    for pid, recs in by_subject.items():
        if resolution == "first_rater":
            resolved[pid] = min(recs, key=lambda r: r.rater_id).reason
            continue
        counts = Counter(r.reason for r in recs)
        top = counts.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            resolved[pid] = ReasonCode.NOT_FOUND
        else:
            resolved[pid] = top[0][0]
    return resolved


def reason_distribution(
    records: Sequence[AnnotationRecord], resolution: str = "majority"
) -> dict[ReasonCode, float]:
    """Proportion of papers per resolved reason; proportions sum to 1."""
    resolved = resolve_reasons(records, resolution)
    if not resolved:
        raise AnnotationError("no annotation records")
    counts = Counter(resolved.values())
    total = len(resolved)
    return {code: counts.get(code, 0) / total for code in ReasonCode}


def reason_trend(
    corpus: "Corpus",
    records: Sequence[AnnotationRecord],
    from_year: int = 2000,
    top_n: int = 3,
    resolution: str = "majority",
) -> dict[ReasonCode, dict[int, float]]:
    """Yearly rate series for the top reasons.

    For each of the ``top_n`` most frequent resolved reasons (not_found is
    never ranked), the series maps year y to the number of papers retracted
    in y for that reason divided by the number of papers published in y.
    """
    resolved = resolve_reasons(records, resolution)
    ranked = Counter(
        code for code in resolved.values() if code is not ReasonCode.NOT_FOUND
    )
    top = [code for code, _ in sorted(ranked.items(), key=lambda kv: (-kv[1], kv[0].value))][:top_n]

    retraction_years: dict[str, int] = {}
    for pid in resolved:
        paper = corpus.papers.get(pid)
        if paper is not None and paper.retraction is not None:
            retraction_years[pid] = paper.retraction.retraction_year

    years = sorted(y for y in corpus.by_year if y >= from_year)
    trend: dict[ReasonCode, dict[int, float]] = {}
    for code in top:
        series: dict[int, float] = {}
        for y in years:
            published = len(corpus.by_year[y])
            hits = sum(
                1
                for pid, c in resolved.items()
                if c is code and retraction_years.get(pid) == y
            )
            series[y] = hits / published
        trend[code] = series
    return trend
