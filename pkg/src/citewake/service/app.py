"""FastAPI service exposing the analysis pipeline over a loaded corpus.

Corpora are immutable once ingested, so the app keeps a small cache keyed by
(absolute path, mtime, size); re-pointing an endpoint at the same file reuses
the parsed corpus, and touching the file invalidates it.  All endpoints are
read-only except /synth, which writes generated corpus files server-side.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import CitewakeError, __version__
from ..annotation import load_annotations_csv, resolve_reasons
from ..cohort import CohortBuild, TreatmentKind, build_cohorts
from ..corpus import Corpus, ingest_corpus
from ..report import (
    annotate_stats_payload,
    build_manifest,
    cohort_payload,
    compare_payload,
    describe_payload,
    granger_payload,
    notice_reasons,
    segment_payload,
    topics_payload,
)
from ..stats import StatsError
from ..synth import config_from_obj, write_corpus
from ..topics import DictionaryAnnotator
from . import schemas

CACHE_SIZE = 4


class ServiceError(CitewakeError):
    module = "service"


class CorpusCache:
    def __init__(self, limit: int = CACHE_SIZE):
        self._limit = limit
        self._entries: OrderedDict[tuple, Corpus] = OrderedDict()

    def get(self, path: str, format: str) -> Corpus:
        resolved = Path(path).resolve()
        if not resolved.exists():
            raise ServiceError(f"input file not found: {resolved}")
        stat = resolved.stat()
        key = (str(resolved), format, stat.st_mtime_ns, stat.st_size)
        if key in self._entries:
            self._entries.move_to_end(key)
            return self._entries[key]
        corpus = ingest_corpus(resolved, format=format)
        self._entries[key] = corpus
        while len(self._entries) > self._limit:
            self._entries.popitem(last=False)
        return corpus


def _kind(value: str) -> TreatmentKind:
    try:
        return TreatmentKind(value)
    except ValueError:
        valid = ", ".join(k.value for k in TreatmentKind)
        raise ServiceError(f"unknown treatment kind {value!r} (expected one of {valid})") from None


def _read_media_list(path: str | None) -> list[str]:
    if not path:
        return []
    p = Path(path)
    if not p.exists():
        raise ServiceError(f"media list file not found: {p}")
    return [line.strip() for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def _paper_reasons(corpus: Corpus, annotations: str | None, resolution: str) -> dict:
    if annotations:
        records = load_annotations_csv(annotations)
        return resolve_reasons(records, resolution)
    return notice_reasons(corpus)


def create_app() -> FastAPI:
    app = FastAPI(title="citewake", version=__version__)
    cache = CorpusCache()

    @app.exception_handler(CitewakeError)
    async def _domain_error(request, exc: CitewakeError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    def _manifest(req, inputs: dict[str, str], seed=None) -> dict:
        return build_manifest(
            inputs=inputs,
            config=req.model_dump(),
            seed=seed,
            timestamp=getattr(req, "timestamp", True),
        )

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.CorpusRequest):
        corpus = cache.get(req.input, req.format)
        y_min, y_max = corpus.year_range()
        return schemas.IngestResponse(
            manifest=_manifest(req, {"corpus": req.input}),
            papers=len(corpus.papers),
            retracted=len(corpus.retracted),
            year_range=[y_min, y_max],
            journals=len(corpus.by_journal),
            authors=len(corpus.by_author),
            institutions=len(corpus.by_institution),
        )

    @app.post("/describe", response_model=schemas.DescribeResponse)
    def describe(req: schemas.CorpusRequest):
        corpus = cache.get(req.input, req.format)
        payload = describe_payload(corpus)
        return schemas.DescribeResponse(
            manifest=_manifest(req, {"corpus": req.input}), **payload
        )

    @app.post("/annotate-stats", response_model=schemas.AnnotateStatsResponse)
    def annotate_stats(req: schemas.AnnotateStatsRequest):
        corpus = cache.get(req.input, req.format)
        records = load_annotations_csv(req.annotations)
        payload = annotate_stats_payload(
            corpus, records, resolution=req.resolution, from_year=req.from_year
        )
        return schemas.AnnotateStatsResponse(
            manifest=_manifest(
                req, {"corpus": req.input, "annotations": req.annotations}
            ),
            **payload,
        )

    def _build(req: schemas.CohortRequest) -> tuple[Corpus, CohortBuild]:
        corpus = cache.get(req.input, req.format)
        build = build_cohorts(
            corpus, _kind(req.kind), yn=req.horizon_year, yr_in_pre=req.yr_in_pre
        )
        return corpus, build

    @app.post("/cohort", response_model=schemas.CohortResponse)
    def cohort(req: schemas.CohortRequest):
        _, build = _build(req)
        return schemas.CohortResponse(
            manifest=_manifest(req, {"corpus": req.input}), **cohort_payload(build)
        )

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CohortRequest):
        _, build = _build(req)
        return schemas.CompareResponse(
            manifest=_manifest(req, {"corpus": req.input}), **compare_payload(build)
        )

    @app.post("/segment", response_model=schemas.SegmentResponse)
    def segment(req: schemas.SegmentRequest):
        corpus, build = _build(req)
        payload = segment_payload(
            corpus,
            build,
            _paper_reasons(corpus, req.annotations, req.resolution),
            _read_media_list(req.media_list),
        )
        inputs = {"corpus": req.input}
        if req.annotations:
            inputs["annotations"] = req.annotations
        if req.media_list:
            inputs["media_list"] = req.media_list
        return schemas.SegmentResponse(manifest=_manifest(req, inputs), **payload)

    @app.post("/topics", response_model=schemas.TopicsResponse)
    def topics(req: schemas.TopicsRequest):
        corpus = cache.get(req.input, req.format)
        annotator = DictionaryAnnotator.from_file(req.dictionary)
        payload = topics_payload(corpus, annotator, req.limit)
        return schemas.TopicsResponse(
            manifest=_manifest(
                req, {"corpus": req.input, "dictionary": req.dictionary}
            ),
            **payload,
        )

    @app.post("/granger", response_model=schemas.GrangerResponse)
    def granger(req: schemas.GrangerRequest):
        corpus = cache.get(req.input, req.format)
        annotator = DictionaryAnnotator.from_file(req.dictionary)
        payload = granger_payload(corpus, annotator, req.lags, req.limit)
        return schemas.GrangerResponse(
            manifest=_manifest(
                req, {"corpus": req.input, "dictionary": req.dictionary}
            ),
            **payload,
        )

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        config = config_from_obj(req.config, seed=req.seed)
        paths = write_corpus(config, req.out_dir, corpus_name=req.corpus_name)
        digests = {
            name: hashlib.sha256(Path(p).read_bytes()).hexdigest()
            for name, p in paths.items()
        }
        return schemas.SynthResponse(
            manifest=_manifest(req, {"out_dir": req.out_dir}, seed=req.seed),
            paths=paths,
            sha256=digests,
        )

    @app.post("/report", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest):
        corpus = cache.get(req.input, req.format)
        inputs = {"corpus": req.input}
        bundle: dict = {"describe": describe_payload(corpus)}

        if req.annotations:
            inputs["annotations"] = req.annotations
            records = load_annotations_csv(req.annotations)
            bundle["annotate_stats"] = annotate_stats_payload(
                corpus, records, resolution=req.resolution
            )
        paper_reasons = _paper_reasons(corpus, req.annotations, req.resolution)
        media_names = _read_media_list(req.media_list)
        if req.media_list:
            inputs["media_list"] = req.media_list

        cohorts: dict[str, dict] = {}
        compare: dict[str, dict] = {}
        segments: dict[str, dict] = {}
        for kind_name in req.kinds:
            kind = _kind(kind_name)
            build = build_cohorts(
                corpus, kind, yn=req.horizon_year, yr_in_pre=req.yr_in_pre
            )
            cohorts[kind.value] = cohort_payload(build)
            try:
                compare[kind.value] = compare_payload(build)
            except StatsError as exc:
                compare[kind.value] = {"kind": kind.value, "rows": [], "error": str(exc)}
            if kind in (TreatmentKind.P_T, TreatmentKind.A_T):
                segments[kind.value] = segment_payload(
                    corpus, build, paper_reasons, media_names
                )
        bundle["cohorts"] = cohorts
        bundle["compare"] = compare
        bundle["segment"] = segments

        if req.dictionary:
            inputs["dictionary"] = req.dictionary
            annotator = DictionaryAnnotator.from_file(req.dictionary)
            bundle["topics"] = topics_payload(corpus, annotator, req.limit)
            bundle["granger"] = granger_payload(corpus, annotator, req.lags, req.limit)

        return schemas.ReportResponse(manifest=_manifest(req, inputs), **bundle)

    return app
