"""Per-entity impact curves and pre/post-retraction impact splits.

An impact curve counts the citations an entity receives in each year from its
first cited year y0 to a horizon year yn.  For a paper, y0 is its publication
year; for an author or institution, y0 is the first year any of their papers
is cited, and the curve sums citations over all attributed papers.  Citations
are dated by the citing paper's publication year.

Splitting at a retraction year yr puts yr itself in the pre-retraction window
(the matching distance integrates the pre window through yr inclusive); the
``yr_in_pre`` flag flips the boundary for sensitivity analysis.  The change
ratio post/pre is undefined when the pre window holds no citations; callers
exclude such entities from ratio-based tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from . import CitewakeError
from .corpus import Corpus, EntityKey, EntityKind

DEFAULT_HORIZON_YEAR = 2014


class ImpactError(CitewakeError):
    module = "impact"


@dataclass(frozen=True, slots=True)
class ImpactCurve:
    entity: EntityKey
    y0: int
    yn: int
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.yn < self.y0:
            raise ImpactError(f"horizon {self.yn} precedes first year {self.y0}")
        if len(self.values) != self.yn - self.y0 + 1:
            raise ImpactError(
                f"curve for {self.entity} has {len(self.values)} values, "
                f"wants {self.yn - self.y0 + 1}"
            )
        if any(v < 0 for v in self.values):
            raise ImpactError(f"negative citation count in curve for {self.entity}")

    def total(self) -> int:
        return sum(self.values)

    def value_at(self, year: int) -> int:
        if not (self.y0 <= year <= self.yn):
            raise ImpactError(f"year {year} outside curve range [{self.y0}, {self.yn}]")
        return self.values[year - self.y0]


@dataclass(frozen=True, slots=True)
class SplitImpact:
    yr: int
    pre_impact: int
    post_impact: int

    @property
    def change_ratio(self) -> Optional[float]:
        if self.pre_impact == 0:
            return None
        return self.post_impact / self.pre_impact


def entity_papers(corpus: Corpus, entity: EntityKey) -> list[str]:
    """Paper ids attributed to an entity; error when the entity is unknown."""
    if entity.kind is EntityKind.PAPER:
        if entity.key not in corpus.papers:
            raise ImpactError(f"unknown paper {entity.key!r}")
        return [entity.key]
    index = corpus.by_author if entity.kind is EntityKind.AUTHOR else corpus.by_institution
    pids = index.get(entity.key)
    if pids is None:
        raise ImpactError(f"unknown {entity.kind.value} {entity.key!r}")
    return pids


def impact_curve(
    corpus: Corpus, entity: EntityKey, yn: int = DEFAULT_HORIZON_YEAR
) -> ImpactCurve:
    """Yearly citation counts for an entity on [y0, yn]."""
    pids = entity_papers(corpus, entity)
    per_year: dict[int, int] = {}
    for pid in pids:
        for citer in corpus.cited_by.get(pid, ()):
            year = corpus.papers[citer].pub_year
            per_year[year] = per_year.get(year, 0) + 1

    if entity.kind is EntityKind.PAPER:
        y0 = corpus.papers[entity.key].pub_year
    else:
        cited_years = [y for y in per_year if per_year[y] > 0]
        if not cited_years:
            raise ImpactError(f"no impact history for {entity} (never cited)")
        y0 = min(cited_years)
    if y0 > yn:
        raise ImpactError(f"{entity} first cited in {y0}, after horizon {yn}")

    values = tuple(per_year.get(y, 0) for y in range(y0, yn + 1))
    return ImpactCurve(entity=entity, y0=y0, yn=yn, values=values)


def entity_retraction_year(corpus: Corpus, entity: EntityKey) -> int:
    """Retraction year of a retracted entity.

    Papers use their notice's year; authors and institutions use the earliest
    retraction year over their retracted papers.  Title-only retractions have
    no dated notice and cannot anchor a split.
    """
    pids = entity_papers(corpus, entity)
    years = []
    for pid in pids:
        if pid in corpus.retracted:
            year = corpus.retraction_year(pid)
            if year is not None:
                years.append(year)
    if entity.kind is EntityKind.PAPER:
        if entity.key not in corpus.retracted:
            raise ImpactError(f"paper {entity.key!r} is not retracted")
        if not years:
            raise ImpactError(
                f"paper {entity.key!r} has no dated retraction notice"
            )
        return years[0]
    if not any(pid in corpus.retracted for pid in pids):
        raise ImpactError(f"{entity} has no retracted papers")
    if not years:
        raise ImpactError(f"{entity} has no dated retraction notice")
    return min(years)


def split_impact(curve: ImpactCurve, yr: int, yr_in_pre: bool = True) -> SplitImpact:
    """Sum the curve into pre and post windows around the retraction year."""
    if not (curve.y0 <= yr <= curve.yn):
        raise ImpactError(
            f"retraction year {yr} outside curve range [{curve.y0}, {curve.yn}]"
        )
    boundary = yr - curve.y0 + (1 if yr_in_pre else 0)
    pre = sum(curve.values[:boundary])
    post = sum(curve.values[boundary:])
    return SplitImpact(yr=yr, pre_impact=pre, post_impact=post)


def write_curves_csv(curves: Iterable[ImpactCurve], path: str | Path) -> str:
    """Write curves as CSV with one column per year of the covered span.

    Header: entity_kind, key, y0, yn, then one column per year.  Cells outside
    a curve's own [y0, yn] range stay empty, distinguishing "out of range"
    from a year with zero citations.
    """
    rows = list(curves)
    if not rows:
        raise ImpactError("no curves to export")
    span_lo = min(c.y0 for c in rows)
    span_hi = max(c.yn for c in rows)
    out = Path(path)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["entity_kind", "key", "y0", "yn"]
            + [str(y) for y in range(span_lo, span_hi + 1)]
        )
        for curve in rows:
            cells: list = [curve.entity.kind.value, curve.entity.key, curve.y0, curve.yn]
            for y in range(span_lo, span_hi + 1):
                cells.append(curve.value_at(y) if curve.y0 <= y <= curve.yn else "")
            writer.writerow(cells)
    return str(out)
