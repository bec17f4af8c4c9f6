"""Report payloads: JSON-ready tables for every analysis verb.

Payload builders are pure functions over an ingested corpus, so two runs on
the same inputs produce identical payloads.  Every payload embeds a run
manifest (input paths, config hash, seed, module versions, and a timestamp
that can be suppressed for byte-identical reruns).  ``write_report_dir``
serializes a bundle to one report.json plus plot-ready CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy
import scipy

from . import __version__
from .annotation import AnnotationRecord, ReasonCode, fleiss_kappa, reason_distribution, reason_trend
from .cohort import CohortBuild, CohortPair
from .corpus import Corpus, EntityKind, annual_retraction_rate, citation_distribution, esi_retraction_rates, normalize_name, retraction_delay
from .stats import MWResult, compare_cohorts, segment_change_ratio
from .topics import TitleAnnotator, annotate_titles, top_topics, topic_granger_screen, topic_series


# ---------------------------------------------------------------------------
# Manifest


def build_manifest(
    inputs: dict[str, str],
    config: Optional[dict] = None,
    seed: Optional[int] = None,
    timestamp: bool = True,
) -> dict:
    canonical = json.dumps(config or {}, sort_keys=True, default=str)
    manifest = {
        "inputs": dict(sorted(inputs.items())),
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": seed,
        "versions": {
            "citewake": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "timestamp": (
            datetime.now(timezone.utc).isoformat() if timestamp else None
        ),
    }
    return manifest


# ---------------------------------------------------------------------------
# Reason resolution plumbing shared by segment and annotate-stats


def notice_reasons(corpus: Corpus) -> dict[str, ReasonCode]:
    """Reason per retracted paper, read from retraction notices."""
    out: dict[str, ReasonCode] = {}
    for pid in corpus.retracted:
        notice = corpus.papers[pid].retraction
        if notice is not None and notice.reason is not None:
            out[pid] = notice.reason
    return out


def _anchor_paper(corpus: Corpus, pids: Iterable[str]) -> Optional[str]:
    """Earliest dated retracted paper of an entity (ties by paper id)."""
    dated = [
        (corpus.retraction_year(pid), pid)
        for pid in pids
        if pid in corpus.retracted and corpus.retraction_year(pid) is not None
    ]
    if not dated:
        return None
    return min(dated)[1]


def reasons_for_pairs(
    corpus: Corpus,
    pairs: Sequence[CohortPair],
    paper_reasons: dict[str, ReasonCode],
) -> dict[str, ReasonCode]:
    """Resolved reason per treatment key.

    Papers use their own reason; authors and institutions inherit the reason
    of their earliest dated retracted paper.
    """
    out: dict[str, ReasonCode] = {}
    for pair in pairs:
        entity = pair.treatment
        if entity.kind is EntityKind.PAPER:
            reason = paper_reasons.get(entity.key)
        else:
            index = (
                corpus.by_author
                if entity.kind is EntityKind.AUTHOR
                else corpus.by_institution
            )
            anchor = _anchor_paper(corpus, index.get(entity.key, ()))
            reason = paper_reasons.get(anchor) if anchor else None
        if reason is not None:
            out[entity.key] = reason
    return out


def media_keys_for_pairs(
    corpus: Corpus, pairs: Sequence[CohortPair], media_names: Iterable[str]
) -> set[str]:
    """Treatment keys whose retraction drew media coverage.

    The media list names scholars; author treatments match by normalized
    name, paper treatments match through their first author.
    """
    media = {normalize_name(n) for n in media_names if normalize_name(n)}
    if not media:
        return set()
    out: set[str] = set()
    for pair in pairs:
        entity = pair.treatment
        if entity.kind is EntityKind.AUTHOR and entity.key in media:
            out.add(entity.key)
        elif entity.kind is EntityKind.PAPER:
            rec = corpus.papers[entity.key]
            for raw in rec.author_names:
                if normalize_name(raw) in media:
                    out.add(entity.key)
                    break
    return out


# ---------------------------------------------------------------------------
# Payload builders


def describe_payload(corpus: Corpus) -> dict:
    delays = retraction_delay(corpus)
    dist_all = citation_distribution(corpus, "all")
    dist_ret = citation_distribution(corpus, "retracted")
    y_min, y_max = corpus.year_range()
    return {
        "papers": len(corpus.papers),
        "retracted": len(corpus.retracted),
        "year_range": [y_min, y_max],
        "annual_retraction_rate": {
            str(y): r for y, r in annual_retraction_rate(corpus).items()
        },
        "retraction_delay": {
            "median_overall": delays.median_overall,
            "median_by_retraction_year": {
                str(y): m for y, m in delays.median_by_year.items()
            },
        },
        "esi_rates": [
            {
                "esi_category": row.esi_category,
                "retracted": row.retracted,
                "total": row.total,
                "rate": row.rate,
            }
            for row in esi_retraction_rates(corpus)
        ],
        "citations": {
            "all": _distribution_obj(dist_all),
            "retracted": _distribution_obj(dist_ret),
        },
    }


def _distribution_obj(dist) -> dict:
    return {
        "n": len(dist.counts),
        "median": dist.median,
        "histogram": [
            {"lo": lo, "hi": hi, "count": n} for lo, hi, n in dist.histogram
        ],
    }


def annotate_stats_payload(
    corpus: Corpus,
    records: Sequence[AnnotationRecord],
    resolution: str = "majority",
    from_year: int = 2000,
) -> dict:
    kappa_by_axis = {}
    for axis in ("reason", "requester"):
        result = fleiss_kappa(records, category_axis=axis)
        kappa_by_axis[axis] = {
            "kappa": None if result.degenerate else result.kappa,
            "degenerate": result.degenerate,
            "n_subjects": result.n_subjects,
            "n_raters": result.n_raters,
            "excluded_subjects": result.excluded_subjects,
        }
    distribution = reason_distribution(records, resolution)
    trend = reason_trend(corpus, records, from_year=from_year, resolution=resolution)
    return {
        "fleiss_kappa": kappa_by_axis,
        "reason_distribution": {
            code.value: share for code, share in distribution.items()
        },
        "reason_trend": {
            code.value: {str(y): v for y, v in series.items()}
            for code, series in trend.items()
        },
    }


def cohort_payload(build: CohortBuild) -> dict:
    return {
        "kind": build.kind.value,
        "n_pairs": len(build.pairs),
        "n_exclusions": len(build.exclusions),
        "pairs": [
            {
                "treatment": pair.treatment.key,
                "yr": pair.yr,
                "control1": pair.controls[0].key,
                "control2": pair.controls[1].key,
                "predis1": pair.pre_dis[0],
                "predis2": pair.pre_dis[1],
                "treatment_pre": pair.treatment_split.pre_impact,
                "treatment_post": pair.treatment_split.post_impact,
                "control1_pre": pair.control_splits[0].pre_impact,
                "control1_post": pair.control_splits[0].post_impact,
                "control2_pre": pair.control_splits[1].pre_impact,
                "control2_post": pair.control_splits[1].post_impact,
            }
            for pair in build.pairs
        ],
        "exclusions": [
            {"treatment": ex.treatment.key, "yr": ex.yr, "reason": ex.reason}
            for ex in build.exclusions
        ],
    }


def format_mw_row(result: MWResult) -> str:
    """Table row like "0.50 < 1.12**": medians, direction, and stars."""
    if result.median_treatment < result.median_control:
        sign = "<"
    elif result.median_treatment > result.median_control:
        sign = ">"
    else:
        sign = "="
    return (
        f"{result.median_treatment:.2f} {sign} "
        f"{result.median_control:.2f}{result.stars}"
    )


def compare_payload(build: CohortBuild) -> dict:
    rows = []
    for metric in ("post_impact", "change_ratio"):
        comparison = compare_cohorts(build.pairs, metric)
        r = comparison.result
        rows.append(
            {
                "metric": metric,
                "row": format_mw_row(r),
                "median_treatment": r.median_treatment,
                "median_control": r.median_control,
                "u_statistic": r.u_statistic,
                "p_value": r.p_value,
                "stars": r.stars,
                "mode": r.mode,
                "n_pairs": comparison.n_pairs,
                "n_excluded": comparison.n_excluded,
            }
        )
    return {"kind": build.kind.value, "rows": rows}


def segment_payload(
    corpus: Corpus,
    build: CohortBuild,
    paper_reasons: dict[str, ReasonCode],
    media_names: Iterable[str] = (),
) -> dict:
    reasons = reasons_for_pairs(corpus, build.pairs, paper_reasons)
    media_keys = media_keys_for_pairs(corpus, build.pairs, media_names)
    medians = segment_change_ratio(build.pairs, reasons, media_keys)
    return {
        "kind": build.kind.value,
        "segments": {
            name: {
                "median_change_ratio": value,
                "display": "n/a" if value is None else f"{value:.2f}",
            }
            for name, value in medians.items()
        },
    }


def topics_payload(
    corpus: Corpus, annotator: TitleAnnotator, limit: int = 10
) -> dict:
    assignments = annotate_titles(corpus, annotator)
    ranked = top_topics(corpus, assignments, limit)
    series = {}
    for rank in ranked:
        s = topic_series(corpus, assignments, rank.topic)
        series[rank.topic] = {
            "esi_category": s.esi_category,
            "pop": {str(y): v for y, v in s.pop.items()},
            "ret": {str(y): v for y, v in s.ret.items()},
        }
    return {
        "top_topics": [
            {
                "topic": r.topic,
                "frequency": r.frequency,
                "esi_category": r.esi_category,
            }
            for r in ranked
        ],
        "series": series,
    }


def granger_payload(
    corpus: Corpus,
    annotator: TitleAnnotator,
    lags: Sequence[int] = (1, 2, 3),
    limit: int = 10,
) -> dict:
    assignments = annotate_titles(corpus, annotator)
    ranked = top_topics(corpus, assignments, limit)
    cells = topic_granger_screen(
        corpus, assignments, [r.topic for r in ranked], lags
    )
    screen = []
    coefficients = []
    for cell in cells:
        entry = {
            "topic": cell.topic,
            "n_lags": cell.n_lags,
            "status": cell.status,
            "p_value": cell.result.p_value if cell.result else None,
            "f_statistic": cell.result.f_statistic if cell.result else None,
            "significant": cell.significant,
        }
        screen.append(entry)
        if cell.significant and cell.result is not None:
            coefficients.append(
                {
                    "topic": cell.topic,
                    "n_lags": cell.n_lags,
                    "intercept": cell.result.intercept,
                    "a_coeffs": list(cell.result.a_coeffs),
                    "b_coeffs": list(cell.result.b_coeffs),
                    "max_abs_a": cell.max_abs_a,
                    "max_abs_b": cell.max_abs_b,
                }
            )
    return {"screen": screen, "coefficients": coefficients}


# ---------------------------------------------------------------------------
# Bundle and directory writer


def write_report_dir(bundle: dict, out_dir: str | Path) -> list[str]:
    """Write report.json plus CSV tables; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def _csv(name: str, header: list[str], rows: Iterable[Sequence]) -> None:
        path = out / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(str(path))

    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(bundle, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    written.append(str(report_path))

    describe = bundle.get("describe")
    if describe:
        _csv(
            "retraction_rates.csv",
            ["year", "rate"],
            sorted(describe["annual_retraction_rate"].items()),
        )
        _csv(
            "retraction_delays.csv",
            ["retraction_year", "median_delay"],
            sorted(
                describe["retraction_delay"]["median_by_retraction_year"].items()
            ),
        )
        _csv(
            "esi_rates.csv",
            ["esi_category", "retracted", "total", "rate"],
            [
                (r["esi_category"], r["retracted"], r["total"], r["rate"])
                for r in describe["esi_rates"]
            ],
        )
        for subset in ("all", "retracted"):
            _csv(
                f"citation_histogram_{subset}.csv",
                ["lo", "hi", "count"],
                [
                    (h["lo"], h["hi"], h["count"])
                    for h in describe["citations"][subset]["histogram"]
                ],
            )

    for kind, payload in (bundle.get("cohorts") or {}).items():
        rows = [
            (
                kind,
                p["treatment"],
                p["yr"],
                p["control1"],
                p["control2"],
                p["predis1"],
                p["predis2"],
                "",
            )
            for p in payload["pairs"]
        ] + [
            (kind, e["treatment"], e["yr"], "", "", "", "", e["reason"])
            for e in payload["exclusions"]
        ]
        _csv(
            f"cohort_{kind}.csv",
            [
                "kind",
                "treatment_key",
                "yr",
                "control1_key",
                "control2_key",
                "predis1",
                "predis2",
                "exclusion_reason",
            ],
            rows,
        )

    compare = bundle.get("compare") or {}
    if compare:
        rows = []
        for kind in sorted(compare):
            for r in compare[kind]["rows"]:
                rows.append(
                    (
                        kind,
                        r["metric"],
                        r["row"],
                        r["median_treatment"],
                        r["median_control"],
                        r["u_statistic"],
                        r["p_value"],
                        r["n_pairs"],
                        r["n_excluded"],
                    )
                )
        _csv(
            "compare.csv",
            [
                "kind",
                "metric",
                "row",
                "median_treatment",
                "median_control",
                "u_statistic",
                "p_value",
                "n_pairs",
                "n_excluded",
            ],
            rows,
        )

    segment = bundle.get("segment") or {}
    if segment:
        rows = []
        for kind in sorted(segment):
            for name, cell in segment[kind]["segments"].items():
                rows.append((kind, name, cell["median_change_ratio"], cell["display"]))
        _csv(
            "segment.csv",
            ["kind", "segment", "median_change_ratio", "display"],
            rows,
        )

    topics = bundle.get("topics")
    if topics:
        rows = []
        for topic in sorted(topics["series"]):
            s = topics["series"][topic]
            for year in sorted(s["pop"]):
                rows.append((topic, year, s["pop"][year], s["ret"][year]))
        _csv("topic_series.csv", ["topic", "year", "pop", "ret"], rows)

    granger = bundle.get("granger")
    if granger:
        _csv(
            "granger_screen.csv",
            ["topic", "n_lags", "status", "p_value", "f_statistic", "significant"],
            [
                (
                    c["topic"],
                    c["n_lags"],
                    c["status"],
                    c["p_value"],
                    c["f_statistic"],
                    c["significant"],
                )
                for c in granger["screen"]
            ],
        )
    return written
