"""Request and response models for the analysis service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class CorpusRequest(BaseModel):
    input: str = Field(description="Server-local path to the corpus file")
    format: str = "jsonl"
    timestamp: bool = True


class IngestResponse(BaseModel):
    manifest: dict
    papers: int
    retracted: int
    year_range: list[int]
    journals: int
    authors: int
    institutions: int


class DescribeResponse(BaseModel):
    manifest: dict
    papers: int
    retracted: int
    year_range: list[int]
    annual_retraction_rate: dict[str, float]
    retraction_delay: dict
    esi_rates: list[dict]
    citations: dict


class AnnotateStatsRequest(CorpusRequest):
    annotations: str
    resolution: str = "majority"
    from_year: int = 2000


class AnnotateStatsResponse(BaseModel):
    manifest: dict
    fleiss_kappa: dict
    reason_distribution: dict[str, float]
    reason_trend: dict


class CohortRequest(CorpusRequest):
    kind: str = "P_t"
    horizon_year: int = 2014
    yr_in_pre: bool = True


class CohortResponse(BaseModel):
    manifest: dict
    kind: str
    n_pairs: int
    n_exclusions: int
    pairs: list[dict]
    exclusions: list[dict]


class CompareRow(BaseModel):
    metric: str
    row: str
    median_treatment: float
    median_control: float
    u_statistic: float
    p_value: float
    stars: str
    mode: str
    n_pairs: int
    n_excluded: int


class CompareResponse(BaseModel):
    manifest: dict
    kind: str
    rows: list[CompareRow]


class SegmentRequest(CohortRequest):
    annotations: Optional[str] = None
    media_list: Optional[str] = None
    resolution: str = "majority"


class SegmentCell(BaseModel):
    median_change_ratio: Optional[float]
    display: str


class SegmentResponse(BaseModel):
    manifest: dict
    kind: str
    segments: dict[str, SegmentCell]


class TopicsRequest(CorpusRequest):
    dictionary: str
    limit: int = 10


class TopicsResponse(BaseModel):
    manifest: dict
    top_topics: list[dict]
    series: dict


class GrangerRequest(TopicsRequest):
    lags: list[int] = Field(default_factory=lambda: [1, 2, 3])


class GrangerResponse(BaseModel):
    manifest: dict
    screen: list[dict]
    coefficients: list[dict]


class SynthRequest(BaseModel):
    out_dir: str
    seed: int = 42
    config: dict = Field(default_factory=dict)
    corpus_name: str = "corpus.jsonl"
    timestamp: bool = True


class SynthResponse(BaseModel):
    manifest: dict
    paths: dict[str, str]
    sha256: dict[str, str]


class ReportRequest(CorpusRequest):
    kinds: list[str] = Field(default_factory=lambda: ["P_t"])
    dictionary: Optional[str] = None
    annotations: Optional[str] = None
    media_list: Optional[str] = None
    resolution: str = "majority"
    horizon_year: int = 2014
    yr_in_pre: bool = True
    limit: int = 10
    lags: list[int] = Field(default_factory=lambda: [1, 2, 3])


class ReportResponse(BaseModel):
    manifest: dict
    describe: dict
    annotate_stats: Optional[dict] = None
    cohorts: dict[str, dict]
    compare: dict[str, dict]
    segment: dict[str, dict]
    topics: Optional[dict] = None
    granger: Optional[dict] = None
