"""Synthetic citation corpora with planted, measurable ground truth.

Citations follow preferential attachment with age decay: a paper published in
year y cites earlier papers drawn with weight (arrivals+1)^alpha *
exp(-age/tau).  Retractions are injected on a per-year schedule; after an
injected paper's retraction year, each would-be citation to it is kept only
with the probability given by the penalty factor for its retraction reason
(multiplicative thinning).  Attachment weights use the unthinned arrival
counts, so thinning changes what is recorded, not what the rest of the graph
would have done.

When twin planting is on, every retracted paper gets a non-retracted twin in
the same journal and publication month.  The twin receives a mirror of the
retracted paper's unthinned citation stream, cites nothing, and has its own
author, so the pair have identical pre-retraction curves and the twin shows
the counterfactual post-retraction impact.  Twin ids sort before regular
paper ids, which makes matching ties resolve toward the twin.

Topic phrases are embedded in titles at per-topic base rates; an optional
coupling term raises a topic's rate in year y by strength * (that topic's
retracted share in year y-lag), planting a Granger-detectable signal.

The same seed always produces byte-identical output files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import CitewakeError
from .annotation import ReasonCode
from .corpus import Corpus, PaperRecord, RetractionNotice, build_corpus, record_to_obj


class SynthError(CitewakeError):
    module = "synth"


DEFAULT_REASON_MIX = {
    ReasonCode.FALSIFICATION_FABRICATION: 0.3,
    ReasonCode.PLAGIARISM: 0.3,
    ReasonCode.VIOLATION_OF_RULES: 0.1,
    ReasonCode.ERROR: 0.2,
    ReasonCode.OTHER: 0.1,
}

DEFAULT_REQUESTER_MIX = {"editor": 0.5, "author": 0.4, "not_found": 0.1}

_TITLE_PATTERNS = (
    "Observations on {}",
    "A longitudinal study of {}",
    "Methods for measuring {}",
    "On the dynamics of {}",
)
_FALLBACK_SUBJECT = "routine laboratory procedures"


@dataclass
class SynthConfig:
    seed: int = 42
    year_start: int = 1995
    year_end: int = 2014
    papers_per_year: int = 500
    n_authors: int = 2000
    n_institutions: int = 120
    n_journals: int = 12
    n_esi: int = 6
    refs_per_paper: float = 12.0
    attachment_exponent: float = 0.6
    age_decay: float = 4.0
    # Per-year injection rate; a bare float applies to every year.
    retraction_schedule: Union[float, dict[int, float]] = 0.0
    reason_mix: dict[ReasonCode, float] = field(
        default_factory=lambda: dict(DEFAULT_REASON_MIX)
    )
    requester_mix: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_REQUESTER_MIX)
    )
    penalty: dict[ReasonCode, float] = field(default_factory=dict)
    delay_mean: float = 1.5
    topics: dict[str, float] = field(default_factory=dict)
    coupling: Optional[tuple[str, int, float]] = None
    plant_twins: bool = True

    def schedule_rate(self, year: int) -> float:
        if isinstance(self.retraction_schedule, dict):
            return self.retraction_schedule.get(year, 0.0)
        return self.retraction_schedule

    def validate(self) -> None:
        if self.year_end < self.year_start:
            raise SynthError("year_end precedes year_start")
        if self.papers_per_year < 1:
            raise SynthError("papers_per_year must be positive")
        if self.refs_per_paper >= self.papers_per_year:
            raise SynthError(
                f"infeasible config: refs_per_paper {self.refs_per_paper} is not "
                f"smaller than papers_per_year {self.papers_per_year}"
            )
        if self.refs_per_paper < 0:
            raise SynthError("refs_per_paper must be non-negative")
        for year in range(self.year_start, self.year_end + 1):
            rate = self.schedule_rate(year)
            if not 0.0 <= rate <= 1.0:
                raise SynthError(f"retraction rate {rate} for {year} not in [0,1]")
        for reason, factor in self.penalty.items():
            if not 0.0 <= factor <= 1.0:
                raise SynthError(f"penalty {factor} for {reason.value} not in [0,1]")
        for topic, rate in self.topics.items():
            if not 0.0 <= rate <= 1.0:
                raise SynthError(f"topic rate {rate} for {topic!r} not in [0,1]")
        if self.coupling is not None:
            topic, lag, strength = self.coupling
            if topic not in self.topics:
                raise SynthError(f"coupled topic {topic!r} not in the topic set")
            if lag < 1:
                raise SynthError("coupling lag must be at least 1")
        if not self.reason_mix or any(v < 0 for v in self.reason_mix.values()):
            raise SynthError("reason_mix must be a non-empty non-negative distribution")

    def penalty_for(self, reason: ReasonCode) -> float:
        return self.penalty.get(reason, 1.0)


def config_from_obj(obj: dict, seed: Optional[int] = None) -> SynthConfig:
    """Build a config from a plain JSON-style dict (string keys throughout).

    Reason keys become ReasonCode members, schedule years become ints, and a
    coupling list becomes the (topic, lag, strength) tuple.  The seed argument
    wins over any seed in the dict.
    """
    known = {f.name for f in fields(SynthConfig)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise SynthError(f"unknown config fields: {', '.join(unknown)}")
    kwargs = dict(obj)

    def _reason_keyed(name: str) -> None:
        if name not in kwargs:
            return
        try:
            kwargs[name] = {
                ReasonCode(k) if isinstance(k, str) else k: float(v)
                for k, v in kwargs[name].items()
            }
        except ValueError as exc:
            raise SynthError(f"bad {name}: {exc}") from None

    _reason_keyed("reason_mix")
    _reason_keyed("penalty")
    schedule = kwargs.get("retraction_schedule")
    if isinstance(schedule, dict):
        kwargs["retraction_schedule"] = {
            int(y): float(r) for y, r in schedule.items()
        }
    coupling = kwargs.get("coupling")
    if coupling is not None:
        if not (isinstance(coupling, (list, tuple)) and len(coupling) == 3):
            raise SynthError("coupling must be [topic, lag, strength]")
        kwargs["coupling"] = (str(coupling[0]), int(coupling[1]), float(coupling[2]))
    if seed is not None:
        kwargs["seed"] = seed
    try:
        config = SynthConfig(**kwargs)
    except TypeError as exc:
        raise SynthError(f"bad config: {exc}") from None
    config.validate()
    return config


def topic_phrase(topic: str) -> str:
    return topic.replace("_", " ")


def _make_title(rng_idx: int, phrases: list[str]) -> str:
    subject = ", ".join(phrases) if phrases else _FALLBACK_SUBJECT
    return _TITLE_PATTERNS[rng_idx % len(_TITLE_PATTERNS)].format(subject)


def _normalized(mix: dict) -> tuple[list, np.ndarray]:
    keys = sorted(mix, key=lambda k: getattr(k, "value", k))
    weights = np.array([float(mix[k]) for k in keys])
    total = weights.sum()
    if total <= 0:
        raise SynthError("distribution weights sum to zero")
    return keys, weights / total


@dataclass
class GeneratedCorpus:
    records: list[PaperRecord]
    ground_truth: dict


def generate_records(config: SynthConfig) -> GeneratedCorpus:
    """Generate paper records plus the ground-truth sidecar data."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    years = list(range(config.year_start, config.year_end + 1))
    n_years = len(years)
    per_year = config.papers_per_year
    n_real = per_year * n_years
    topic_keys = sorted(config.topics)

    # Per-paper state, filled year by year.
    pub_year = np.zeros(n_real, dtype=np.int64)
    journal_idx = np.zeros(n_real, dtype=np.int64)
    month = np.zeros(n_real, dtype=np.int64)
    is_retracted = np.zeros(n_real, dtype=bool)
    retraction_year = np.zeros(n_real, dtype=np.int64)
    reason_idx = np.full(n_real, -1, dtype=np.int64)
    keep_prob = np.ones(n_real, dtype=float)
    arrivals = np.zeros(n_real, dtype=np.int64)  # unthinned, drives attachment
    # Realized (post-thinning) citations per paper per year offset, and the
    # unthinned arrivals per year (what a planted twin's curve looks like).
    kept_by_year = np.zeros((n_real, n_years), dtype=np.int64)
    arrivals_by_year = np.zeros((n_real, n_years), dtype=np.int64)

    authors: list[tuple[str, ...]] = [()] * n_real
    institutions: list[tuple[str, ...]] = [()] * n_real
    titles: list[str] = [""] * n_real
    paper_topics: list[list[str]] = [[] for _ in range(n_real)]
    refs: list[list[str]] = [[] for _ in range(n_real)]
    requester: dict[int, str] = {}
    twin_of = np.full(n_real, -1, dtype=np.int64)

    reason_keys, reason_w = _normalized(config.reason_mix)
    req_keys, req_w = _normalized(config.requester_mix)
    reason_penalties = np.array([config.penalty_for(r) for r in reason_keys])

    author_pool = [f"Author {i:05d}" for i in range(config.n_authors)]
    inst_pool = [f"Institute {i:04d}" for i in range(config.n_institutions)]
    journal_names = [f"journal_{j:02d}" for j in range(config.n_journals)]
    journal_esi = [f"esi_{j % config.n_esi:02d}" for j in range(config.n_journals)]

    injected_per_year: dict[int, int] = {}
    topic_pub: dict[str, dict[int, int]] = {k: {} for k in topic_keys}
    topic_ret: dict[str, dict[int, int]] = {k: {} for k in topic_keys}
    pub_totals: dict[int, int] = {}

    for yi, year in enumerate(years):
        lo = yi * per_year
        hi = lo + per_year
        idx = np.arange(lo, hi)
        pub_year[idx] = year
        journal_idx[idx] = rng.integers(0, config.n_journals, per_year)
        month[idx] = rng.integers(1, 13, per_year)

        for i in idx:
            k = int(rng.integers(1, 5))
            picks = rng.choice(config.n_authors, size=min(k, config.n_authors), replace=False)
            authors[i] = tuple(author_pool[a] for a in picks)
            k = int(rng.integers(1, 3))
            picks = rng.choice(config.n_institutions, size=min(k, config.n_institutions), replace=False)
            institutions[i] = tuple(inst_pool[a] for a in picks)

        # Topic assignment, with the optional lagged retraction coupling.
        for topic in topic_keys:
            rate = config.topics[topic]
            if config.coupling is not None and config.coupling[0] == topic:
                _, lag, strength = config.coupling
                src_year = year - lag
                total = pub_totals.get(src_year, 0)
                if total > 0:
                    ret_share = topic_ret[topic].get(src_year, 0) / total
                    rate = min(1.0, max(0.0, rate + strength * ret_share))
            mask = rng.random(per_year) < rate
            for off in np.nonzero(mask)[0]:
                paper_topics[lo + off].append(topic)

        # Retraction injection for this publication year.
        rate = config.schedule_rate(year)
        count = int(round(rate * per_year))
        injected_per_year[year] = count
        if count > 0:
            chosen = np.sort(rng.choice(per_year, size=count, replace=False)) + lo
            is_retracted[chosen] = True
            delays = 1 + rng.poisson(config.delay_mean, count)
            retraction_year[chosen] = np.minimum(year + delays, config.year_end)
            picks = rng.choice(len(reason_keys), size=count, p=reason_w)
            reason_idx[chosen] = picks
            keep_prob[chosen] = reason_penalties[picks]
            req_picks = rng.choice(len(req_keys), size=count, p=req_w)
            for i, rq in zip(chosen, req_picks):
                requester[int(i)] = req_keys[int(rq)]
            if config.plant_twins:
                twin_of[chosen] = chosen  # twin id reuses the treatment index

        for i in idx:
            titles[i] = _make_title(int(i), [topic_phrase(t) for t in paper_topics[i]])
            for t in paper_topics[i]:
                topic_pub[t][year] = topic_pub[t].get(year, 0) + 1
                if is_retracted[i]:
                    topic_ret[t][year] = topic_ret[t].get(year, 0) + 1
        pub_totals[year] = per_year + (
            int(count) if config.plant_twins and count > 0 else 0
        )

        # Citations from this year's papers to strictly earlier papers.
        if lo == 0:
            continue
        pool = np.arange(0, lo)
        weights = (arrivals[pool] + 1.0) ** config.attachment_exponent
        weights *= np.exp(-(year - pub_year[pool]) / config.age_decay)
        weights /= weights.sum()
        counts = rng.poisson(config.refs_per_paper, per_year)
        total = int(counts.sum())
        if total == 0:
            continue
        draws = rng.choice(lo, size=total, p=weights)
        citers = np.repeat(idx, counts)
        # Unique (citer, target) pairs, sorted by citer then target.
        combined = citers * np.int64(n_real) + draws
        combined = np.unique(combined)
        u_citers = combined // n_real
        u_targets = combined % n_real
        np.add.at(arrivals, u_targets, 1)
        np.add.at(arrivals_by_year, (u_targets, np.full(len(u_targets), yi)), 1)

        post = is_retracted[u_targets] & (retraction_year[u_targets] < year)
        coin = rng.random(len(u_targets))
        kept = ~post | (coin < keep_prob[u_targets])
        year_off = yi
        for ci, ti, keep in zip(u_citers, u_targets, kept):
            ci, ti = int(ci), int(ti)
            if keep:
                refs[ci].append(f"p{ti:06d}")
                kept_by_year[ti, year_off] += 1
            if twin_of[ti] >= 0:
                refs[ci].append(f"c{ti:06d}")

    # Assemble records: each year's real papers, then that year's twins.
    records: list[PaperRecord] = []
    twins: dict[str, str] = {}
    for yi, year in enumerate(years):
        lo = yi * per_year
        hi = lo + per_year
        for i in range(lo, hi):
            title = titles[i]
            notice = None
            if is_retracted[i]:
                ryear = int(retraction_year[i])
                title = f"{title} (Retracted Article. See notice {ryear})"
                notice = RetractionNotice(
                    retraction_year=ryear,
                    reason=reason_keys[int(reason_idx[i])],
                    requester=requester[i],
                )
            records.append(
                PaperRecord(
                    paper_id=f"p{i:06d}",
                    title=title,
                    pub_year=year,
                    pub_month=int(month[i]),
                    journal=journal_names[int(journal_idx[i])],
                    esi_category=journal_esi[int(journal_idx[i])],
                    author_names=authors[i],
                    institution_names=institutions[i],
                    references=tuple(refs[i]),
                    retraction=notice,
                )
            )
        if config.plant_twins:
            for i in range(lo, hi):
                if not is_retracted[i]:
                    continue
                twins[f"p{i:06d}"] = f"c{i:06d}"
                records.append(
                    PaperRecord(
                        paper_id=f"c{i:06d}",
                        title=f"Replication notes on {_FALLBACK_SUBJECT}",
                        pub_year=year,
                        pub_month=int(month[i]),
                        journal=journal_names[int(journal_idx[i])],
                        esi_category=journal_esi[int(journal_idx[i])],
                        author_names=(f"Twin Author {i:06d}",),
                        institution_names=(f"Twin Institute {i:06d}",),
                        references=(),
                        retraction=None,
                    )
                )

    twin_exact = _twin_exact_set(
        config, years, pub_year, journal_idx, month, is_retracted,
        retraction_year, kept_by_year, arrivals_by_year, twin_of,
    )

    ground_truth = {
        "seed": config.seed,
        "years": [config.year_start, config.year_end],
        "papers_per_year": per_year,
        "injected_per_year": {str(y): int(c) for y, c in injected_per_year.items()},
        "retractions": {
            f"p{i:06d}": {
                "retraction_year": int(retraction_year[i]),
                "reason": reason_keys[int(reason_idx[i])].value,
                "requester": requester[int(i)],
            }
            for i in np.nonzero(is_retracted)[0]
        },
        "penalty": {r.value: config.penalty_for(r) for r in reason_keys},
        "twins": twins,
        "twin_exact": sorted(twin_exact),
        "topic_pub_counts": {
            t: {str(y): c for y, c in sorted(topic_pub[t].items())} for t in topic_keys
        },
        "topic_ret_counts": {
            t: {str(y): c for y, c in sorted(topic_ret[t].items())} for t in topic_keys
        },
        "pub_totals": {str(y): int(c) for y, c in sorted(pub_totals.items())},
        "coupling": (
            {
                "topic": config.coupling[0],
                "lag": config.coupling[1],
                "strength": config.coupling[2],
            }
            if config.coupling
            else None
        ),
    }
    return GeneratedCorpus(records=records, ground_truth=ground_truth)


def _twin_exact_set(
    config: SynthConfig,
    years: list[int],
    pub_year: np.ndarray,
    journal_idx: np.ndarray,
    month: np.ndarray,
    is_retracted: np.ndarray,
    retraction_year: np.ndarray,
    kept_by_year: np.ndarray,
    arrivals_by_year: np.ndarray,
    twin_of: np.ndarray,
) -> list[str]:
    """Treatments whose pre-window citation total is unique in their stratum.

    For these, matching must recover the twin as the first control: the twin
    is the only candidate with a zero impact gap, so the final gap re-rank
    cannot prefer anything else.  Curve-level uniqueness is not enough; a
    candidate with a different shape but the same total ties the gap and can
    then win on id order.  A treatment's pre window holds its realized (kept)
    counts; ordinary candidates are compared on kept counts and other twins
    on the unthinned arrivals their mirror receives.
    """
    if not config.plant_twins:
        return []
    strata: dict[tuple[int, int, int], list[int]] = {}
    for i in range(len(pub_year)):
        key = (int(journal_idx[i]), int(pub_year[i]), int(month[i]))
        strata.setdefault(key, []).append(i)

    exact: list[str] = []
    y_start = years[0]
    for i in np.nonzero(twin_of >= 0)[0]:
        i = int(i)
        key = (int(journal_idx[i]), int(pub_year[i]), int(month[i]))
        members = strata[key]
        yr_off = int(retraction_year[i]) - y_start
        y0_off = int(pub_year[i]) - y_start
        pre = int(kept_by_year[i, y0_off : yr_off + 1].sum())
        competitors = 0
        unique = True
        for j in members:
            if j == i:
                continue
            if is_retracted[j]:
                if twin_of[j] < 0:
                    continue  # retracted papers without twins are never candidates
                pre_j = int(arrivals_by_year[j, y0_off : yr_off + 1].sum())
            else:
                pre_j = int(kept_by_year[j, y0_off : yr_off + 1].sum())
            if pre_j == pre:
                unique = False
            competitors += 1
        # Matching needs the twin plus at least one other candidate.
        if unique and competitors >= 1:
            exact.append(f"p{i:06d}")
    return exact


def generate_corpus(config: SynthConfig) -> tuple[Corpus, dict]:
    """In-memory generation: indexed corpus plus ground truth."""
    gen = generate_records(config)
    corpus = build_corpus(
        gen.records, year_window=(config.year_start, config.year_end)
    )
    return corpus, gen.ground_truth


def write_corpus(
    config: SynthConfig, out_dir: str | Path, corpus_name: str = "corpus.jsonl"
) -> dict[str, str]:
    """Write the corpus file, ground_truth.json, and dictionary.tsv; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gen = generate_records(config)
    corpus_path = out / corpus_name
    with corpus_path.open("w", encoding="utf-8") as fh:
        for rec in gen.records:
            fh.write(json.dumps(record_to_obj(rec), sort_keys=True))
            fh.write("\n")
    truth_path = out / "ground_truth.json"
    truth_path.write_text(
        json.dumps(gen.ground_truth, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    dict_path = out / "dictionary.tsv"
    with dict_path.open("w", encoding="utf-8") as fh:
        for topic in sorted(config.topics):
            fh.write(f"{topic_phrase(topic)}\t{topic}\n")
    return {
        "corpus": str(corpus_path),
        "ground_truth": str(truth_path),
        "dictionary": str(dict_path),
    }
