import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from citewake.annotation import ReasonCode
from citewake.cohort import CohortPair, TreatmentKind
from citewake.corpus import EntityKey, EntityKind
from citewake.impact import SplitImpact
from citewake.stats import (
    GrangerResult,
    StatsError,
    _lag_matrix,
    compare_cohorts,
    f_sf,
    granger_test,
    mann_whitney_u,
    ols_fit,
    segment_change_ratio,
    significance_stars,
)

import oracles

groups = st.lists(st.integers(0, 6), min_size=1, max_size=12)


class TestMannWhitneyU:
    @given(groups, groups)
    @settings(max_examples=150, deadline=None)
    def test_u_matches_pairwise_oracle(self, a, b):
        result = mann_whitney_u(a, b)
        assert result.u_statistic == oracles.mw_u(a, b)

    @given(groups, groups)
    @settings(max_examples=100, deadline=None)
    def test_u_of_both_groups_sums_to_product(self, a, b):
        forward = mann_whitney_u(a, b)
        backward = mann_whitney_u(b, a)
        assert forward.u_statistic + backward.u_statistic == len(a) * len(b)

    def test_textbook_example(self):
        result = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
        assert result.u_statistic == 0.0
        assert result.p_value == pytest.approx(2 / 6)
        assert result.mode == "exact"
        assert result.median_treatment == 1.5
        assert result.median_control == 3.5

    def test_all_identical_values(self):
        result = mann_whitney_u([5.0, 5.0], [5.0, 5.0, 5.0])
        assert result.p_value == 1.0
        assert result.mode == "normal_approx"

    @pytest.mark.parametrize("n1,n2", [(2, 3), (3, 4), (5, 5), (2, 8), (8, 8)])
    @pytest.mark.parametrize("alternative", ["two_sided", "less", "greater"])
    def test_exact_tail_matches_enumeration(self, n1, n2, alternative):
        rng = np.random.default_rng(n1 * 100 + n2)
        values = rng.permutation(np.arange(1, n1 + n2 + 1)).astype(float)
        a, b = list(values[:n1]), list(values[n1:])
        result = mann_whitney_u(a, b, alternative)
        assert result.mode == "exact"
        expected = oracles.mw_exact_p(n1, n2, oracles.mw_u(a, b), alternative)
        assert result.p_value == pytest.approx(float(expected), abs=1e-15)

    @pytest.mark.parametrize("alternative,scipy_alt", [
        ("two_sided", "two-sided"),
        ("less", "less"),
        ("greater", "greater"),
    ])
    def test_tie_corrected_normal_matches_scipy(self, alternative, scipy_alt):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = list(rng.integers(0, 5, size=int(rng.integers(4, 20))).astype(float))
            b = list(rng.integers(0, 5, size=int(rng.integers(4, 20))).astype(float))
            if len(set(a + b)) == 1 or len(set(a + b)) == len(a) + len(b):
                continue
            result = mann_whitney_u(a, b, alternative)
            assert result.mode == "normal_approx"
            ref = scipy.stats.mannwhitneyu(
                a, b, alternative=scipy_alt, method="asymptotic", use_continuity=True
            )
            assert result.u_statistic == ref.statistic
            assert result.p_value == pytest.approx(ref.pvalue, abs=1e-12)

    @given(groups, groups, st.integers(1, 9), st.integers(-20, 20))
    @settings(max_examples=100, deadline=None)
    def test_increasing_transform_leaves_test_alone(self, a, b, scale, shift):
        base = mann_whitney_u(a, b)
        moved = mann_whitney_u(
            [scale * v + shift for v in a], [scale * v + shift for v in b]
        )
        assert moved.u_statistic == base.u_statistic
        assert moved.p_value == pytest.approx(base.p_value, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(StatsError, match="non-empty"):
            mann_whitney_u([], [1.0])
        with pytest.raises(StatsError, match="unknown alternative"):
            mann_whitney_u([1.0], [2.0], "sideways")

    def test_stars(self):
        assert significance_stars(0.005) == "**"
        assert significance_stars(0.03) == "*"
        assert significance_stars(0.2) == ""


def make_pair(key, t, c1, c2, yr=2005):
    """Build a CohortPair from (pre, post) tuples for treatment and controls."""
    return CohortPair(
        kind=TreatmentKind.P_T,
        treatment=EntityKey(EntityKind.PAPER, key),
        controls=(
            EntityKey(EntityKind.PAPER, f"{key}_c1"),
            EntityKey(EntityKind.PAPER, f"{key}_c2"),
        ),
        yr=yr,
        pre_dis=(0.0, 0.0),
        treatment_split=SplitImpact(yr, *t),
        control_splits=(SplitImpact(yr, *c1), SplitImpact(yr, *c2)),
    )


class TestCompareCohorts:
    def test_post_impact_metric(self):
        pairs = [
            make_pair("a", (10, 1), (10, 6), (10, 8)),
            make_pair("b", (10, 2), (10, 5), (10, 9)),
            make_pair("c", (10, 3), (10, 7), (10, 7)),
        ]
        comparison = compare_cohorts(pairs, metric="post_impact")
        direct = mann_whitney_u([1.0, 2.0, 3.0], [7.0, 7.0, 7.0])
        assert comparison.result.u_statistic == direct.u_statistic
        assert comparison.result.p_value == direct.p_value
        assert comparison.n_pairs == 3
        assert comparison.n_excluded == 0

    def test_change_ratio_drops_undefined_pairs(self):
        pairs = [
            make_pair("a", (10, 1), (10, 6), (10, 8)),
            make_pair("b", (10, 2), (0, 5), (10, 9)),
            make_pair("c", (10, 3), (10, 7), (10, 7)),
        ]
        comparison = compare_cohorts(pairs, metric="change_ratio")
        assert comparison.n_pairs == 2
        assert comparison.n_excluded == 1
        direct = mann_whitney_u([0.1, 0.3], [0.7, 0.7])
        assert comparison.result.p_value == direct.p_value

    def test_too_few_usable_pairs(self):
        pairs = [
            make_pair("a", (10, 1), (10, 6), (10, 8)),
            make_pair("b", (0, 2), (10, 5), (10, 9)),
        ]
        with pytest.raises(StatsError, match="at least 2 usable pairs"):
            compare_cohorts(pairs, metric="change_ratio")

    def test_unknown_metric(self):
        with pytest.raises(StatsError, match="unknown metric"):
            compare_cohorts([], metric="h_index")


class TestSegmentChangeRatio:
    def test_buckets(self):
        pairs = [
            make_pair("fal", (10, 2), (10, 10), (10, 10)),
            make_pair("pla", (10, 6), (10, 10), (10, 10)),
            make_pair("err", (10, 8), (10, 10), (10, 10)),
            make_pair("none", (10, 4), (10, 10), (10, 10)),
            make_pair("zero", (0, 4), (10, 10), (10, 10)),
        ]
        reasons = {
            "fal": ReasonCode.FALSIFICATION_FABRICATION,
            "pla": ReasonCode.PLAGIARISM,
            "err": ReasonCode.ERROR,
            "zero": ReasonCode.ERROR,
        }
        segments = segment_change_ratio(pairs, reasons, media_keys={"fal", "err"})
        assert segments["overall"] == pytest.approx(0.5)
        assert segments["falsification_fabrication"] == pytest.approx(0.2)
        assert segments["plagiarism"] == pytest.approx(0.6)
        assert segments["error"] == pytest.approx(0.8)
        # Media coverage only counts for misconduct reasons; err is not one.
        assert segments["media_misconduct"] == pytest.approx(0.2)
        assert segments["violation_of_rules"] is None


class TestOlsFit:
    def test_matches_normal_equations(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            rows = int(rng.integers(6, 30))
            cols = int(rng.integers(1, 5))
            design = np.column_stack(
                [np.ones(rows)] + [rng.normal(size=rows) for _ in range(cols)]
            )
            y = rng.normal(size=rows)
            fit = ols_fit(design, y)
            beta, rss = oracles.ols_normal_equations(design, y)
            assert np.allclose(fit.coefficients, beta, atol=1e-8)
            assert fit.rss == pytest.approx(rss, abs=1e-8)

    def test_dependent_column_named(self):
        x = np.column_stack([np.ones(6), np.arange(6.0), np.arange(6.0)])
        with pytest.raises(StatsError, match="column 2 is linearly dependent"):
            ols_fit(x, np.zeros(6))

    def test_shape_validation(self):
        with pytest.raises(StatsError, match="2-D"):
            ols_fit([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(StatsError, match="does not match"):
            ols_fit([[1.0], [2.0]], [1.0, 2.0, 3.0])
        with pytest.raises(StatsError, match="need at least 3 rows"):
            ols_fit([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0])


class TestFTail:
    def test_matches_incomplete_beta_oracle(self):
        for f in (0.3, 0.5, 1.0, 2.5, 4.0, 10.0, 50.0):
            for d1 in (1, 2, 3, 5):
                for d2 in (3, 7, 12, 40):
                    assert f_sf(f, d1, d2) == pytest.approx(
                        oracles.f_tail(f, d1, d2), abs=1e-10
                    )

    def test_edge_cases(self):
        assert f_sf(0.0, 2, 10) == 1.0
        assert f_sf(-1.0, 2, 10) == 1.0
        assert f_sf(math.inf, 2, 10) == 0.0


class TestGranger:
    def test_lag_matrix_alignment(self):
        lagged = _lag_matrix(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 2)
        assert lagged.tolist() == [[2.0, 1.0], [3.0, 2.0], [4.0, 3.0]]

    def test_matches_reference_regression(self):
        rng = np.random.default_rng(17)
        for n in (1, 2, 3):
            for _ in range(8):
                t = int(rng.integers(3 * n + 4, 45))
                x = rng.normal(size=t)
                y = rng.normal(size=t)
                result = granger_test(x, y, n)
                f_ref, p_ref = oracles.granger_reference(x, y, n)
                assert result.f_statistic == pytest.approx(f_ref, abs=1e-9, rel=1e-9)
                assert result.p_value == pytest.approx(p_ref, abs=1e-9)
                assert result.n_obs == t - n

    def test_perfect_linear_driver_recovered(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=30)
        y = np.zeros(30)
        for t in range(1, 30):
            y[t] = 0.5 * y[t - 1] + 2.0 * x[t - 1]
        result = granger_test(x, y, 1)
        assert result.p_value < 1e-10
        assert result.a_coeffs[0] == pytest.approx(0.5, abs=1e-6)
        assert result.b_coeffs[0] == pytest.approx(2.0, abs=1e-6)

    def test_constant_cause_is_degenerate(self):
        rng = np.random.default_rng(29)
        y = list(rng.normal(size=20))
        x = [3.0] * 20
        result = granger_test(x, y, 2)
        assert isinstance(result, GrangerResult)
        assert result.f_statistic == 0.0
        assert result.p_value == 1.0
        assert result.b_coeffs == (0.0, 0.0)
        restricted = ols_fit(
            np.hstack([np.ones((18, 1)), _lag_matrix(np.asarray(y), 2)]),
            np.asarray(y)[2:],
        )
        assert result.a_coeffs == restricted.coefficients[1:]
        assert result.intercept == restricted.coefficients[0]

    def test_length_checks(self):
        with pytest.raises(StatsError, match="lengths differ"):
            granger_test([1.0, 2.0], [1.0, 2.0, 3.0], 1)
        with pytest.raises(StatsError, match="need at least 8 points"):
            granger_test([1.0] * 7, [1.0] * 7, 2)
        with pytest.raises(StatsError, match="lag order"):
            granger_test([1.0] * 9, [1.0] * 9, 0)
