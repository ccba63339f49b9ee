import math

import numpy as np
import pytest

import oracles
from imufresh.calculators import (
    GRID_FEATURES_PER_KIND,
    compute_feature,
    default_settings,
)
from imufresh.errors import BadParameters, UnknownCalculator


class TestDistribution:
    def test_minimum(self):
        assert compute_feature([3.0, -1.0, 2.0], "minimum") == -1.0

    def test_maximum_mean_median(self):
        x = [1.0, 2.0, 3.0, 10.0]
        assert compute_feature(x, "maximum") == 10.0
        assert compute_feature(x, "mean") == 4.0
        assert compute_feature(x, "median") == 2.5

    def test_population_variance_and_std(self):
        x = [1.0, 3.0]
        assert compute_feature(x, "variance") == 1.0  # population, not sample
        assert compute_feature(x, "standard_deviation") == 1.0

    def test_skewness_known_value(self):
        # n=3 with values [0, 0, 1]: bias-adjusted G1 is exactly sqrt(3)
        assert compute_feature([0.0, 0.0, 1.0], "skewness") == pytest.approx(
            math.sqrt(3.0), abs=1e-12
        )

    def test_skewness_undefined(self):
        assert math.isnan(compute_feature([1.0, 2.0], "skewness"))  # n < 3
        assert math.isnan(compute_feature([2.0, 2.0, 2.0], "skewness"))  # zero variance

    def test_kurtosis_known_value(self):
        # n=4 with values [0, 0, 0, 1]: bias-adjusted excess kurtosis is exactly 4
        assert compute_feature([0.0, 0.0, 0.0, 1.0], "kurtosis") == pytest.approx(4.0, abs=1e-12)

    def test_kurtosis_undefined(self):
        assert math.isnan(compute_feature([1.0, 2.0, 3.0], "kurtosis"))  # n < 4
        assert math.isnan(compute_feature([5.0] * 6, "kurtosis"))  # zero variance

    def test_quantile_linear_interpolation(self):
        # position (n-1)*q = 0.75 between 0 and 1
        assert compute_feature([0.0, 1.0, 2.0, 3.0], "quantile", {"q": 0.25}) == 0.75

    def test_quantile_endpoints(self):
        x = [5.0, -2.0, 7.0]
        assert compute_feature(x, "quantile", {"q": 0.0}) == -2.0
        assert compute_feature(x, "quantile", {"q": 1.0}) == 7.0

    def test_abs_energy_and_rms(self):
        assert compute_feature([1.0, 2.0, 3.0], "abs_energy") == 14.0
        assert compute_feature([3.0, 4.0], "root_mean_square") == pytest.approx(
            math.sqrt(12.5), abs=1e-12
        )


class TestChange:
    def test_mean_abs_change(self):
        assert compute_feature([1.0, 4.0, 2.0], "mean_abs_change") == 2.5

    def test_mean_change_is_endpoint_slope(self):
        assert compute_feature([1.0, 9.0, 5.0], "mean_change") == 2.0

    def test_change_quantiles_full_corridor(self):
        got = compute_feature(
            [0.0, 1.0, 2.0, 0.0, 2.0],
            "change_quantiles",
            {"ql": 0.0, "qh": 1.0, "isabs": True, "f_agg": "mean"},
        )
        assert got == 1.5  # mean(|1|, |1|, |-2|, |2|)

    def test_change_quantiles_constant_series(self):
        got = compute_feature(
            [5.0] * 8,
            "change_quantiles",
            {"ql": 0.2, "qh": 0.8, "isabs": False, "f_agg": "var"},
        )
        assert got == 0.0

    def test_change_quantiles_empty_corridor(self):
        # corridor [q0.0, q0.2] of 0..9 is [0, 1.8]: only the 0->1 step stays
        got = compute_feature(
            list(map(float, range(10))),
            "change_quantiles",
            {"ql": 0.0, "qh": 0.2, "isabs": False, "f_agg": "mean"},
        )
        assert got == 1.0

    def test_change_quantiles_rejects_inverted_corridor(self):
        with pytest.raises(BadParameters):
            compute_feature(
                [1.0, 2.0], "change_quantiles",
                {"ql": 0.8, "qh": 0.2, "isabs": False, "f_agg": "mean"},
            )


class TestTrend:
    def test_exact_line(self):
        x = [3.0, 5.0, 7.0, 9.0]
        assert compute_feature(x, "linear_trend", {"attr": "slope"}) == 2.0
        assert compute_feature(x, "linear_trend", {"attr": "intercept"}) == 3.0
        assert compute_feature(x, "linear_trend", {"attr": "stderr"}) == 0.0
        assert compute_feature(x, "linear_trend", {"attr": "rvalue"}) == 1.0

    def test_rvalue_sign_and_constant(self):
        assert compute_feature([4.0, 2.0, 0.0], "linear_trend", {"attr": "rvalue"}) == -1.0
        assert compute_feature([1.0, 1.0, 1.0], "linear_trend", {"attr": "rvalue"}) == 0.0

    def test_two_point_stderr_is_zero(self):
        assert compute_feature([1.0, 42.0], "linear_trend", {"attr": "stderr"}) == 0.0

    def test_agg_linear_trend_exact_chunk_means(self):
        x = list(map(float, range(1, 16)))  # chunk means 3, 8, 13: a perfect line
        got = compute_feature(
            x, "agg_linear_trend", {"f_agg": "mean", "chunk_len": 5, "attr": "stderr"}
        )
        assert got == 0.0
        slope = compute_feature(
            x, "agg_linear_trend", {"f_agg": "mean", "chunk_len": 5, "attr": "slope"}
        )
        assert slope == 5.0

    def test_agg_linear_trend_needs_two_chunks(self):
        got = compute_feature(
            [1.0] * 7, "agg_linear_trend", {"f_agg": "mean", "chunk_len": 5, "attr": "slope"}
        )
        assert math.isnan(got)


class TestCorrelationEntropy:
    def test_autocorrelation_lag1(self):
        assert compute_feature([1.0, 2.0, 3.0, 4.0], "autocorrelation", {"lag": 1}) == (
            pytest.approx(1.0 / 3.0, abs=1e-12)
        )

    def test_autocorrelation_undefined(self):
        assert math.isnan(compute_feature([2.0, 2.0, 2.0], "autocorrelation", {"lag": 1}))
        assert math.isnan(compute_feature([1.0, 2.0], "autocorrelation", {"lag": 5}))

    def test_stationarity_gap(self):
        got = compute_feature([0.0, 0.0, 1.0, 1.0], "partial_stationarity_gap")
        assert got == pytest.approx(1.0 / (0.5 + 1e-12), rel=1e-9)

    def test_binned_entropy_two_even_bins(self):
        got = compute_feature([0.0, 0.0, 1.0, 1.0], "binned_entropy", {"bins": 2})
        assert got == pytest.approx(math.log(2.0), abs=1e-12)

    def test_binned_entropy_constant(self):
        assert compute_feature([3.0, 3.0, 3.0], "binned_entropy", {"bins": 5}) == 0.0


class TestNonlinear:
    def test_c3_hand_computed(self):
        assert compute_feature([1.0, 2.0, 3.0, 4.0], "c3", {"lag": 1}) == 15.0

    def test_c3_too_short(self):
        assert math.isnan(compute_feature([1.0, 2.0, 3.0, 4.0], "c3", {"lag": 2}))

    def test_time_reversal_hand_computed(self):
        got = compute_feature(
            [1.0, 2.0, 3.0, 4.0], "time_reversal_asymmetry_statistic", {"lag": 1}
        )
        assert got == 26.0

    def test_time_reversal_too_short(self):
        got = compute_feature([1.0, 2.0], "time_reversal_asymmetry_statistic", {"lag": 1})
        assert math.isnan(got)


class TestValidation:
    def test_unknown_calculator(self):
        with pytest.raises(UnknownCalculator):
            compute_feature([1.0, 2.0], "nosuchcalc")

    def test_too_short_input(self):
        with pytest.raises(BadParameters):
            compute_feature([1.0], "minimum")

    def test_bad_choice_param(self):
        with pytest.raises(BadParameters):
            compute_feature([1.0, 2.0], "linear_trend", {"attr": "curvature"})

    def test_bad_int_param(self):
        with pytest.raises(BadParameters):
            compute_feature([1.0, 2.0], "autocorrelation", {"lag": 0})

    def test_bool_not_accepted_as_int(self):
        with pytest.raises(BadParameters):
            compute_feature([1.0, 2.0], "autocorrelation", {"lag": True})


class TestDefaultGrid:
    def test_documented_size_per_kind(self):
        assert len(default_settings(["a"])) == GRID_FEATURES_PER_KIND

    def test_multiplicative_over_kinds(self):
        assert len(default_settings(["a", "b", "c"])) == 3 * GRID_FEATURES_PER_KIND

    def test_empty_kinds_rejected(self):
        with pytest.raises(BadParameters):
            default_settings([])

    def test_change_quantiles_combinations(self):
        settings = default_settings(["a"])
        cq = [f for f in settings.feature_names() if f.calculator == "change_quantiles"]
        assert len(cq) == 60  # 15 (ql, qh) pairs x 2 isabs x 2 f_agg
        for f in cq:
            p = f.param_dict()
            assert p["ql"] < p["qh"]

    def test_agg_linear_trend_combinations(self):
        settings = default_settings(["a"])
        alt = [f for f in settings.feature_names() if f.calculator == "agg_linear_trend"]
        assert len(alt) == 36  # 3 chunk lengths x 3 aggregates x 4 attributes


class TestOracleEquivalence:
    """Library numerics vs. the plain-Python reference implementations."""

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_change_quantiles_random_series(self, seed):
        rng = np.random.default_rng(seed)
        grid = [
            (ql, qh, isabs, f_agg)
            for ql in (0.0, 0.2, 0.4, 0.6, 0.8)
            for qh in (0.2, 0.4, 0.6, 0.8, 1.0)
            if ql < qh
            for isabs in (False, True)
            for f_agg in ("mean", "var")
        ]
        for _ in range(25):
            x = rng.standard_normal(int(rng.integers(5, 51)))
            for ql, qh, isabs, f_agg in grid:
                got = compute_feature(
                    x, "change_quantiles",
                    {"ql": ql, "qh": qh, "isabs": isabs, "f_agg": f_agg},
                )
                want = oracles.change_quantiles(list(x), ql, qh, isabs, f_agg)
                assert got == pytest.approx(want, abs=1e-9)

    @pytest.mark.parametrize("seed", [10, 11])
    def test_agg_linear_trend_random_series(self, seed):
        rng = np.random.default_rng(seed)
        grid = [
            (f_agg, chunk_len, attr)
            for f_agg in ("max", "min", "mean")
            for chunk_len in (5, 10, 50)
            for attr in ("slope", "intercept", "stderr", "rvalue")
        ]
        for _ in range(25):
            x = rng.standard_normal(int(rng.integers(5, 80)))
            for f_agg, chunk_len, attr in grid:
                got = compute_feature(
                    x, "agg_linear_trend",
                    {"f_agg": f_agg, "chunk_len": chunk_len, "attr": attr},
                )
                want = oracles.agg_linear_trend(list(x), f_agg, chunk_len, attr)
                if math.isnan(want):
                    assert math.isnan(got)
                else:
                    assert got == pytest.approx(want, abs=1e-9)


class TestShiftScaleProperties:
    def test_minimum_shift_covariant(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            x = rng.standard_normal(30)
            c = float(rng.uniform(-5, 5))
            assert compute_feature(x + c, "minimum") == pytest.approx(
                compute_feature(x, "minimum") + c, abs=1e-12
            )

    def test_variance_scale_covariant(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            x = rng.standard_normal(30)
            c = float(rng.uniform(0.1, 4.0))
            assert compute_feature(c * x, "variance") == pytest.approx(
                c * c * compute_feature(x, "variance"), rel=1e-10
            )

    def test_autocorrelation_affine_invariant(self):
        rng = np.random.default_rng(9)
        for lag in (1, 2, 3):
            x = rng.standard_normal(40)
            a, b = 2.5, -7.0
            assert compute_feature(a * x + b, "autocorrelation", {"lag": lag}) == (
                pytest.approx(compute_feature(x, "autocorrelation", {"lag": lag}), abs=1e-9)
            )


def test_nan_only_in_documented_cases():
    """Scan the whole default grid over random series: NaN cells must be
    exactly the documented undefined combinations."""
    rng = np.random.default_rng(77)
    settings = default_settings(["k"])
    for n in (5, 9, 20, 50):
        x = rng.standard_normal(n)
        for f in settings.feature_names():
            got = compute_feature(x, f.calculator, f.param_dict())
            p = f.param_dict()
            if f.calculator == "agg_linear_trend":
                expect_nan = n // p["chunk_len"] < 2
            elif f.calculator == "autocorrelation":
                expect_nan = p["lag"] >= n  # random series never has zero variance
            elif f.calculator in ("c3", "time_reversal_asymmetry_statistic"):
                expect_nan = n <= 2 * p["lag"]
            else:
                expect_nan = False  # skewness/kurtosis need n >= 3/4; all n here qualify
            assert math.isnan(got) == expect_nan, (f.canonical(), n)
