"""Statistical kernels: Mann-Whitney U, OLS, and Granger-causality F-tests.

Mann-Whitney U
    U is computed from rank sums with midranks assigned to ties.  For small
    tie-free samples (both groups at most 8 values) the p-value is exact: the
    full distribution of U under the null is enumerated with the standard
    count recurrence f(n1, n2, u) = f(n1-1, n2, u-n2) + f(n1, n2-1, u).  The
    two-sided exact p sums the probability of every U at least as far from
    the mean n1*n2/2 as the observed one.  Larger or tied samples use the
    normal approximation with tie-corrected variance

        sigma^2 = n1*n2/12 * ((N+1) - sum(t^3 - t) / (N*(N-1)))

    and a 0.5 continuity correction.  When every pooled value is identical
    the statistic carries no information and p is 1 by convention.

Granger causality
    A restricted autoregression of Y on its own n lags plus an intercept is
    compared against an unrestricted model that adds n lags of X.  With
    T_eff usable rows after lagging,

        F = ((RSS_r - RSS_u) / n) / (RSS_u / (T_eff - 2n - 1))

    and the p-value is the upper tail of the F(n, T_eff - 2n - 1)
    distribution, evaluated through the regularized incomplete beta
    function.  A degenerate X series (lag columns linearly dependent on the
    restricted design, e.g. a constant) provides no information and is
    reported as non-causal with zero X coefficients rather than an error.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, TYPE_CHECKING

import numpy as np
from scipy.special import betainc

from . import CitewakeError

if TYPE_CHECKING:  # pragma: no cover
    from .cohort import CohortPair

EXACT_MAX_GROUP = 8

ALTERNATIVES = ("two_sided", "less", "greater")


class StatsError(CitewakeError):
    module = "stats"


def significance_stars(p: float) -> str:
    """Star markers: ** below 0.01, * below 0.05, none otherwise."""
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# Mann-Whitney U


@dataclass(frozen=True, slots=True)
class MWResult:
    u_statistic: float
    p_value: float
    median_treatment: float
    median_control: float
    n_treatment: int
    n_control: int
    mode: str  # exact | normal_approx

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Average of positional ranks i+1 .. j+1 shared by the tie run.
        mid = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _u_counts(n1: int, n2: int) -> tuple[int, ...]:
    """counts[u] = number of tie-free rank interleavings with statistic u."""
    if n1 == 0 or n2 == 0:
        return (1,)
    shifted = _u_counts(n1 - 1, n2)
    kept = _u_counts(n1, n2 - 1)
    out = [0] * (n1 * n2 + 1)
    for u, c in enumerate(shifted):
        out[u + n2] += c
    for u, c in enumerate(kept):
        out[u] += c
    return tuple(out)


def _exact_p(u: float, n1: int, n2: int, alternative: str) -> float:
    counts = _u_counts(n1, n2)
    total = sum(counts)
    u_int = round(u)
    if alternative == "less":
        tail = sum(counts[: u_int + 1])
    elif alternative == "greater":
        tail = sum(counts[u_int:])
    else:
        # |U - mu| comparisons doubled to stay in integer arithmetic.
        dev = abs(2 * u_int - n1 * n2)
        tail = sum(c for v, c in enumerate(counts) if abs(2 * v - n1 * n2) >= dev)
    return tail / total


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _normal_p(u: float, n1: int, n2: int, tie_sizes: list[int], alternative: str) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2.0
    tie_term = sum(t**3 - t for t in tie_sizes) / (n * (n - 1))
    sigma2 = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if sigma2 <= 0.0:
        return 1.0
    sigma = math.sqrt(sigma2)
    if alternative == "less":
        z = (u - mu + 0.5) / sigma
        p = 1.0 - _norm_sf(z)
    elif alternative == "greater":
        z = (u - mu - 0.5) / sigma
        p = _norm_sf(z)
    else:
        z = max(0.0, abs(u - mu) - 0.5) / sigma
        p = 2.0 * _norm_sf(z)
    return min(1.0, max(0.0, p))


def mann_whitney_u(
    group_a: Sequence[float],
    group_b: Sequence[float],
    alternative: str = "two_sided",
) -> MWResult:
    """Rank-sum test of location difference between two independent samples.

    The reported U is group_a's statistic: U = R_a - n_a(n_a+1)/2 with R_a
    the midrank sum of group_a in the pooled ranking.
    """
    if alternative not in ALTERNATIVES:
        raise StatsError(f"unknown alternative {alternative!r}")
    if not group_a or not group_b:
        raise StatsError("mann_whitney_u requires two non-empty groups")
    n1, n2 = len(group_a), len(group_b)
    pooled = list(group_a) + list(group_b)
    ranks = _midranks(pooled)
    r1 = sum(ranks[:n1])
    u = r1 - n1 * (n1 + 1) / 2.0

    median_a = float(statistics.median(group_a))
    median_b = float(statistics.median(group_b))

    distinct = len(set(pooled))
    if distinct == 1:
        return MWResult(u, 1.0, median_a, median_b, n1, n2, "normal_approx")
    has_ties = distinct != len(pooled)
    if not has_ties and n1 <= EXACT_MAX_GROUP and n2 <= EXACT_MAX_GROUP:
        p = _exact_p(u, n1, n2, alternative)
        return MWResult(u, p, median_a, median_b, n1, n2, "exact")

    counts: dict[float, int] = {}
    for v in pooled:
        counts[v] = counts.get(v, 0) + 1
    tie_sizes = [c for c in counts.values() if c > 1]
    p = _normal_p(u, n1, n2, tie_sizes, alternative)
    return MWResult(u, p, median_a, median_b, n1, n2, "normal_approx")


# ---------------------------------------------------------------------------
# Cohort comparisons


@dataclass(frozen=True, slots=True)
class CohortComparison:
    result: MWResult
    metric: str
    n_pairs: int
    n_excluded: int


def compare_cohorts(
    pairs: Sequence["CohortPair"],
    metric: str = "change_ratio",
    alternative: str = "two_sided",
) -> CohortComparison:
    """Treatment values against the per-pair mean of the two controls.

    For the change_ratio metric, a pair is dropped when the treatment or
    either control has an undefined ratio (empty pre window); the drop count
    is reported alongside the test.
    """
    if metric not in ("post_impact", "change_ratio"):
        raise StatsError(f"unknown metric {metric!r}")
    treat_vals: list[float] = []
    control_vals: list[float] = []
    excluded = 0
    for pair in pairs:
        if metric == "post_impact":
            t = float(pair.treatment_split.post_impact)
            c1 = float(pair.control_splits[0].post_impact)
            c2 = float(pair.control_splits[1].post_impact)
        else:
            ratios = (
                pair.treatment_split.change_ratio,
                pair.control_splits[0].change_ratio,
                pair.control_splits[1].change_ratio,
            )
            if any(r is None for r in ratios):
                excluded += 1
                continue
            t, c1, c2 = (float(r) for r in ratios)  # type: ignore[arg-type]
        treat_vals.append(t)
        control_vals.append((c1 + c2) / 2.0)
    if len(treat_vals) < 2:
        raise StatsError(
            f"need at least 2 usable pairs for {metric}, got {len(treat_vals)} "
            f"({excluded} excluded)"
        )
    result = mann_whitney_u(treat_vals, control_vals, alternative)
    return CohortComparison(
        result=result, metric=metric, n_pairs=len(treat_vals), n_excluded=excluded
    )


def segment_change_ratio(
    pairs: Sequence["CohortPair"],
    reasons: dict,
    media_keys: set[str],
) -> dict[str, Optional[float]]:
    """Median treatment change ratio per retraction-reason segment.

    ``reasons`` maps treatment entity key to its resolved ReasonCode;
    ``media_keys`` lists treatment keys with media-covered retractions.
    Segments with no usable ratios report None.
    """
    from .annotation import MISCONDUCT_REASONS, ReasonCode

    buckets: dict[str, list[float]] = {
        "overall": [],
        "media_misconduct": [],
        ReasonCode.FALSIFICATION_FABRICATION.value: [],
        ReasonCode.PLAGIARISM.value: [],
        ReasonCode.VIOLATION_OF_RULES.value: [],
        ReasonCode.ERROR.value: [],
    }
    for pair in pairs:
        ratio = pair.treatment_split.change_ratio
        if ratio is None:
            continue
        buckets["overall"].append(ratio)
        reason = reasons.get(pair.treatment.key)
        if reason is None:
            continue
        if reason.value in buckets:
            buckets[reason.value].append(ratio)
        if reason in MISCONDUCT_REASONS and pair.treatment.key in media_keys:
            buckets["media_misconduct"].append(ratio)
    return {
        name: (float(statistics.median(vals)) if vals else None)
        for name, vals in buckets.items()
    }


# ---------------------------------------------------------------------------
# Least squares and Granger causality


@dataclass(frozen=True, slots=True)
class OLSFit:
    coefficients: tuple[float, ...]
    rss: float


def ols_fit(design: Sequence[Sequence[float]], y: Sequence[float]) -> OLSFit:
    """Least squares via QR; raises naming the first dependent column."""
    x = np.asarray(design, dtype=float)
    if x.ndim != 2:
        raise StatsError("design must be a 2-D matrix")
    rows, cols = x.shape
    yv = np.asarray(y, dtype=float)
    if yv.shape != (rows,):
        raise StatsError(f"response length {yv.shape} does not match {rows} rows")
    if rows < cols + 1:
        raise StatsError(f"need at least {cols + 1} rows for {cols} columns, got {rows}")
    _check_full_rank(x)
    beta, *_ = np.linalg.lstsq(x, yv, rcond=None)
    resid = yv - x @ beta
    return OLSFit(coefficients=tuple(float(b) for b in beta), rss=float(resid @ resid))


def _dependent_columns(x: np.ndarray) -> list[int]:
    r = np.linalg.qr(x, mode="r")
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    return [int(i) for i in np.where(diag <= tol)[0]]


def _check_full_rank(x: np.ndarray) -> None:
    bad = _dependent_columns(x)
    if bad:
        raise StatsError(f"design column {bad[0]} is linearly dependent")


@dataclass(frozen=True, slots=True)
class GrangerResult:
    n_lags: int
    f_statistic: float
    p_value: float
    a_coeffs: tuple[float, ...]  # lags of the response series
    b_coeffs: tuple[float, ...]  # lags of the candidate cause
    intercept: float
    residual_variance: float
    n_obs: int


def _lag_matrix(series: np.ndarray, n: int) -> np.ndarray:
    # Column j holds the series lagged by j+1 years, aligned to rows n..T-1.
    t = len(series)
    return np.column_stack([series[n - 1 - j : t - 1 - j] for j in range(n)])


def f_sf(f: float, d1: int, d2: int) -> float:
    """Upper tail of the F(d1, d2) distribution."""
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def granger_test(
    x: Sequence[float], y: Sequence[float], n: int = 1
) -> GrangerResult:
    """Does lagged X improve prediction of Y beyond Y's own lags?"""
    if n < 1:
        raise StatsError("lag order must be at least 1")
    if len(x) != len(y):
        raise StatsError(f"series lengths differ: {len(x)} vs {len(y)}")
    t = len(y)
    t_eff = t - n
    min_len = 3 * n + 2
    if t < min_len:
        raise StatsError(
            f"series too short for {n} lags: need at least {min_len} points, got {t}"
        )
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    target = ys[n:]
    ones = np.ones((t_eff, 1))
    y_lags = _lag_matrix(ys, n)
    x_lags = _lag_matrix(xs, n)

    restricted = ols_fit(np.hstack([ones, y_lags]), target)
    dof = t_eff - 2 * n - 1

    full_design = np.hstack([ones, y_lags, x_lags])
    bad = _dependent_columns(full_design)
    if bad:
        # X lags carry no independent information: non-causal by construction.
        resid_var = restricted.rss / dof if dof > 0 else 0.0
        return GrangerResult(
            n_lags=n,
            f_statistic=0.0,
            p_value=1.0,
            a_coeffs=restricted.coefficients[1:],
            b_coeffs=(0.0,) * n,
            intercept=restricted.coefficients[0],
            residual_variance=resid_var,
            n_obs=t_eff,
        )

    unrestricted = ols_fit(full_design, target)
    diff = max(0.0, restricted.rss - unrestricted.rss)
    if unrestricted.rss <= 0.0:
        f = 0.0 if diff <= 0.0 else math.inf
    else:
        f = (diff / n) / (unrestricted.rss / dof)
    p = f_sf(f, n, dof)
    coeffs = unrestricted.coefficients
    return GrangerResult(
        n_lags=n,
        f_statistic=f,
        p_value=p,
        a_coeffs=coeffs[1 : n + 1],
        b_coeffs=coeffs[n + 1 :],
        intercept=coeffs[0],
        residual_variance=unrestricted.rss / dof,
        n_obs=t_eff,
    )
