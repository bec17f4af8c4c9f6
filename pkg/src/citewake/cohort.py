"""Treatment-group selection and matched-control pairing.

Six treatment kinds are studied: retracted papers (P_t), their first authors
(A_t), those authors' institutions (I_t), the earliest paper citing each
retracted paper (P_citing), the paper sharing the largest reference-set
Jaccard overlap with each retracted paper (P_coref), and the most frequent
non-retracted co-author of each retracted first author (A_coaut).  Each
treatment entity carries the retraction year that anchors its pre/post split.

Controls are matched in three steps: (1) keep candidates in the same stratum
as the treatment (journal plus publication date for papers; dominant ESI
category plus first cited year for authors and institutions) that are
non-retracted and belong to no treatment group; (2) keep the ten candidates
with the smallest pre-retraction curve distance (L2 over the window from y0
through the retraction year inclusive); (3) of those, keep the two whose
pre-retraction citation totals are closest to the treatment's.  All ties
break deterministically (distance, then pre-impact gap, then key order), so
matching is independent of record order.  A treatment with fewer than two
surviving candidates is excluded and counted.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from . import CitewakeError
from .corpus import Corpus, EntityKey, EntityKind
from .impact import (
    DEFAULT_HORIZON_YEAR,
    ImpactCurve,
    ImpactError,
    SplitImpact,
    entity_retraction_year,
    impact_curve,
    split_impact,
)


class CohortError(CitewakeError):
    module = "cohort"


class TreatmentKind(str, Enum):
    P_T = "P_t"
    A_T = "A_t"
    I_T = "I_t"
    P_CITING = "P_citing"
    P_COREF = "P_coref"
    A_COAUT = "A_coaut"

    @property
    def entity_kind(self) -> EntityKind:
        if self in (TreatmentKind.P_T, TreatmentKind.P_CITING, TreatmentKind.P_COREF):
            return EntityKind.PAPER
        if self in (TreatmentKind.A_T, TreatmentKind.A_COAUT):
            return EntityKind.AUTHOR
        return EntityKind.INSTITUTION


@dataclass(frozen=True, slots=True)
class CohortPair:
    kind: TreatmentKind
    treatment: EntityKey
    controls: tuple[EntityKey, EntityKey]
    yr: int
    pre_dis: tuple[float, float]
    treatment_split: SplitImpact
    control_splits: tuple[SplitImpact, SplitImpact]


@dataclass(frozen=True, slots=True)
class Exclusion:
    treatment: EntityKey
    yr: Optional[int]
    reason: str  # no_curve | yr_out_of_range | too_few_candidates


@dataclass(frozen=True, slots=True)
class CohortBuild:
    kind: TreatmentKind
    pairs: list[CohortPair]
    exclusions: list[Exclusion]


def jaccard(refs_a: Iterable[str], refs_b: Iterable[str]) -> float:
    """Reference-set overlap |A n B| / |A u B|; two empty sets give 0."""
    a, b = set(refs_a), set(refs_b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def pre_dis(treat: ImpactCurve, cand: ImpactCurve, yr: int) -> float:
    """L2 distance between the two curves over the window y0..yr inclusive."""
    if treat.y0 != cand.y0:
        raise CohortError(
            f"curves start in different years: {treat.y0} vs {cand.y0}"
        )
    if not (treat.y0 <= yr <= treat.yn and yr <= cand.yn):
        raise CohortError(f"retraction year {yr} outside both curves")
    span = yr - treat.y0 + 1
    return math.sqrt(
        sum((a - b) ** 2 for a, b in zip(treat.values[:span], cand.values[:span]))
    )


def _pre_total(curve: ImpactCurve, yr: int) -> int:
    return sum(curve.values[: yr - curve.y0 + 1])


# ---------------------------------------------------------------------------
# Treatment selection


def _paper(pid: str) -> EntityKey:
    return EntityKey(EntityKind.PAPER, pid)


def _author(norm: str) -> EntityKey:
    return EntityKey(EntityKind.AUTHOR, norm)


def _institution(norm: str) -> EntityKey:
    return EntityKey(EntityKind.INSTITUTION, norm)


def _dated_retractions(corpus: Corpus) -> list[tuple[str, int]]:
    """Retracted papers with a known retraction year, sorted by paper id."""
    out = []
    for pid in sorted(corpus.retracted):
        year = corpus.retraction_year(pid)
        if year is not None:
            out.append((pid, year))
    return out


def _first_author(corpus: Corpus, pid: str) -> Optional[str]:
    from .corpus import normalize_name

    for raw in corpus.papers[pid].author_names:
        norm = normalize_name(raw)
        if norm:
            return norm
    return None


def _first_institution(corpus: Corpus, pid: str) -> Optional[str]:
    from .corpus import normalize_name

    for raw in corpus.papers[pid].institution_names:
        norm = normalize_name(raw)
        if norm:
            return norm
    return None


def _entity_yr(corpus: Corpus, entity: EntityKey) -> Optional[int]:
    try:
        return entity_retraction_year(corpus, entity)
    except ImpactError:
        return None


def _is_retracted_entity(corpus: Corpus, pids: Iterable[str]) -> bool:
    return any(pid in corpus.retracted for pid in pids)


def _dedupe_keep_earliest(
    found: Iterable[tuple[EntityKey, int]]
) -> list[tuple[EntityKey, int]]:
    best: dict[EntityKey, int] = {}
    for entity, yr in found:
        if entity not in best or yr < best[entity]:
            best[entity] = yr
    return sorted(best.items(), key=lambda kv: (kv[0].key, kv[1]))


def select_treatments(
    corpus: Corpus, kind: TreatmentKind
) -> list[tuple[EntityKey, int]]:
    """Treatment entities of one kind with their anchoring retraction years.

    Title-only retractions carry no retraction year and cannot anchor a
    split, so they are skipped here (they still count in corpus-level rates).
    """
    dated = _dated_retractions(corpus)

    if kind is TreatmentKind.P_T:
        return _dedupe_keep_earliest((_paper(pid), yr) for pid, yr in dated)

    if kind is TreatmentKind.A_T:
        found = []
        for pid, _ in dated:
            name = _first_author(corpus, pid)
            if name is None:
                continue
            yr = _entity_yr(corpus, _author(name))
            if yr is not None:
                found.append((_author(name), yr))
        return _dedupe_keep_earliest(found)

    if kind is TreatmentKind.I_T:
        found = []
        for pid, _ in dated:
            inst = _first_institution(corpus, pid)
            if inst is None:
                continue
            yr = _entity_yr(corpus, _institution(inst))
            if yr is not None:
                found.append((_institution(inst), yr))
        return _dedupe_keep_earliest(found)

    if kind is TreatmentKind.P_CITING:
        found = []
        for pid, yr in dated:
            citers = corpus.cited_by.get(pid, [])
            if not citers:
                continue
            earliest = min(
                citers,
                key=lambda c: (
                    corpus.papers[c].pub_year,
                    corpus.papers[c].pub_month or 13,
                    c,
                ),
            )
            found.append((_paper(earliest), yr))
        return _dedupe_keep_earliest(found)

    if kind is TreatmentKind.P_COREF:
        # Inverted reference index over ALL reference ids, dangling included:
        # two papers can co-refer a work that is itself outside the corpus.
        ref_index: dict[str, list[str]] = {}
        for pid, rec in corpus.papers.items():
            for ref in rec.references:
                ref_index.setdefault(ref, []).append(pid)
        found = []
        for pid, yr in dated:
            best = _best_coref(corpus, pid, ref_index)
            if best is not None:
                found.append((_paper(best), yr))
        return _dedupe_keep_earliest(found)

    if kind is TreatmentKind.A_COAUT:
        found = []
        anchors = select_treatments(corpus, TreatmentKind.A_T)
        for anchor, yr in anchors:
            partner = _best_coauthor(corpus, anchor.key)
            if partner is not None:
                found.append((_author(partner), yr))
        return _dedupe_keep_earliest(found)

    raise CohortError(f"unknown treatment kind {kind!r}")


def _best_coref(
    corpus: Corpus, pid: str, ref_index: dict[str, list[str]]
) -> Optional[str]:
    """Paper with the largest positive reference-set Jaccard against pid."""
    refs = set(corpus.papers[pid].references)
    if not refs:
        return None
    # Only papers sharing at least one reference can score above 0.
    overlap: Counter[str] = Counter()
    for ref in refs:
        for other in ref_index.get(ref, ()):
            if other != pid:
                overlap[other] += 1
    best_id: Optional[str] = None
    best_score = 0.0
    for other in sorted(overlap):
        inter = overlap[other]
        other_refs = corpus.papers[other].references
        score = inter / (len(refs) + len(other_refs) - inter)
        if score > best_score:
            best_id, best_score = other, score
    return best_id


def _best_coauthor(corpus: Corpus, author_norm: str) -> Optional[str]:
    """Most frequent non-retracted co-author over non-retracted joint papers.

    Ties break by total citations of the joint papers, then name order.
    """
    from .corpus import normalize_name

    joint_count: Counter[str] = Counter()
    joint_cites: Counter[str] = Counter()
    for pid in corpus.by_author.get(author_norm, ()):
        if pid in corpus.retracted:
            continue
        cites = corpus.citation_count(pid)
        seen = set()
        for raw in corpus.papers[pid].author_names:
            norm = normalize_name(raw)
            if not norm or norm == author_norm or norm in seen:
                continue
            seen.add(norm)
            joint_count[norm] += 1
            joint_cites[norm] += cites
    candidates = [
        name
        for name in joint_count
        if not _is_retracted_entity(corpus, corpus.by_author[name])
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda n: (-joint_count[n], -joint_cites[n], n))


def all_treatment_entities(corpus: Corpus) -> set[EntityKey]:
    """Union of every treatment group's entities, for control exclusion."""
    out: set[EntityKey] = set()
    for kind in TreatmentKind:
        out.update(entity for entity, _ in select_treatments(corpus, kind))
    return out


# ---------------------------------------------------------------------------
# Control matching


def _dominant_esi(corpus: Corpus, pids: Iterable[str]) -> str:
    counts = Counter(corpus.papers[pid].esi_category for pid in pids)
    return min(counts, key=lambda c: (-counts[c], c))


def _paper_stratum_index(
    corpus: Corpus, excluded: set[EntityKey]
) -> dict[tuple[str, tuple[int, Optional[int]]], list[str]]:
    index: dict[tuple[str, tuple[int, Optional[int]]], list[str]] = {}
    for pid, rec in corpus.papers.items():
        if pid in corpus.retracted or _paper(pid) in excluded:
            continue
        index.setdefault((rec.journal, rec.pub_date), []).append(pid)
    return index


def _entity_pool(
    corpus: Corpus,
    entity_kind: EntityKind,
    excluded: set[EntityKey],
    yn: int,
) -> dict[tuple[str, int], list[tuple[EntityKey, ImpactCurve]]]:
    """Candidate authors or institutions bucketed by (dominant ESI, y0)."""
    index = (
        corpus.by_author if entity_kind is EntityKind.AUTHOR else corpus.by_institution
    )
    pool: dict[tuple[str, int], list[tuple[EntityKey, ImpactCurve]]] = {}
    for norm, pids in index.items():
        entity = EntityKey(entity_kind, norm)
        if entity in excluded or _is_retracted_entity(corpus, pids):
            continue
        try:
            curve = impact_curve(corpus, entity, yn=yn)
        except ImpactError:
            continue
        key = (_dominant_esi(corpus, pids), curve.y0)
        pool.setdefault(key, []).append((entity, curve))
    return pool


@dataclass
class _Matcher:
    """Shared candidate indexes for matching every treatment of one kind."""

    corpus: Corpus
    kind: TreatmentKind
    yn: int
    yr_in_pre: bool
    excluded: set[EntityKey]

    def __post_init__(self) -> None:
        if self.kind.entity_kind is EntityKind.PAPER:
            self._papers = _paper_stratum_index(self.corpus, self.excluded)
        else:
            self._pool = _entity_pool(
                self.corpus, self.kind.entity_kind, self.excluded, self.yn
            )

    def _candidates(
        self, treatment: EntityKey, curve: ImpactCurve
    ) -> list[tuple[EntityKey, ImpactCurve]]:
        if self.kind.entity_kind is EntityKind.PAPER:
            rec = self.corpus.papers[treatment.key]
            out = []
            for pid in self._papers.get((rec.journal, rec.pub_date), ()):
                if pid == treatment.key:
                    continue
                out.append((_paper(pid), impact_curve(self.corpus, _paper(pid), yn=self.yn)))
            return out
        pids = (
            self.corpus.by_author
            if self.kind.entity_kind is EntityKind.AUTHOR
            else self.corpus.by_institution
        )[treatment.key]
        key = (_dominant_esi(self.corpus, pids), curve.y0)
        return [
            (entity, cand)
            for entity, cand in self._pool.get(key, ())
            if entity != treatment
        ]

    def match(self, treatment: EntityKey, yr: int) -> CohortPair | Exclusion:
        try:
            curve = impact_curve(self.corpus, treatment, yn=self.yn)
        except ImpactError:
            return Exclusion(treatment, yr, "no_curve")
        if not (curve.y0 <= yr <= curve.yn):
            return Exclusion(treatment, yr, "yr_out_of_range")

        treat_pre = _pre_total(curve, yr)
        scored = []
        for entity, cand in self._candidates(treatment, curve):
            dis = pre_dis(curve, cand, yr)
            gap = abs(_pre_total(cand, yr) - treat_pre)
            scored.append((dis, gap, entity.key, entity, cand))
        if len(scored) < 2:
            return Exclusion(treatment, yr, "too_few_candidates")

        scored.sort(key=lambda s: s[:3])
        shortlist = scored[:10]
        shortlist.sort(key=lambda s: (s[1], s[2]))
        (d1, _, _, e1, c1), (d2, _, _, e2, c2) = shortlist[:2]
        return CohortPair(
            kind=self.kind,
            treatment=treatment,
            controls=(e1, e2),
            yr=yr,
            pre_dis=(d1, d2),
            treatment_split=split_impact(curve, yr, self.yr_in_pre),
            control_splits=(
                split_impact(c1, yr, self.yr_in_pre),
                split_impact(c2, yr, self.yr_in_pre),
            ),
        )


def match_controls(
    corpus: Corpus,
    treatment: tuple[EntityKey, int],
    kind: TreatmentKind,
    yn: int = DEFAULT_HORIZON_YEAR,
    yr_in_pre: bool = True,
    excluded: Optional[set[EntityKey]] = None,
) -> Optional[CohortPair]:
    """Match one treatment entity; None when no valid pair exists."""
    if excluded is None:
        excluded = all_treatment_entities(corpus)
    matcher = _Matcher(corpus, kind, yn, yr_in_pre, excluded)
    result = matcher.match(*treatment)
    return result if isinstance(result, CohortPair) else None


def build_cohorts(
    corpus: Corpus,
    kind: TreatmentKind,
    yn: int = DEFAULT_HORIZON_YEAR,
    yr_in_pre: bool = True,
) -> CohortBuild:
    """Select all treatments of one kind and match controls for each."""
    treatments = select_treatments(corpus, kind)
    excluded = all_treatment_entities(corpus)
    matcher = _Matcher(corpus, kind, yn, yr_in_pre, excluded)
    pairs: list[CohortPair] = []
    exclusions: list[Exclusion] = []
    for entity, yr in treatments:
        result = matcher.match(entity, yr)
        if isinstance(result, CohortPair):
            pairs.append(result)
        else:
            exclusions.append(result)
    return CohortBuild(kind=kind, pairs=pairs, exclusions=exclusions)
