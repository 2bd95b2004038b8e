"""Accuracy-series metrics against hand values and loop oracles."""

import math

import numpy as np
import pytest

from hqcnet.diagnostics import (
    METRIC_FIELDS,
    MetricReport,
    compute_metrics,
    early_slope,
    epoch_at_threshold,
    fluctuation,
    generalization_gap,
    overfitting_drop,
    stability_ratio,
)
from hqcnet.training import AccuracySeries


def series(train, val):
    train = np.asarray(train, dtype=float)
    return AccuracySeries(np.arange(1, len(train) + 1), train, val)


def zigzag(center, step, n):
    """Curve whose consecutive steps all have magnitude `step`."""
    return [center + (step / 2 if t % 2 else -step / 2) for t in range(n)]


def random_series(rng, n):
    return series(rng.uniform(0.2, 1.0, n), rng.uniform(0.2, 1.0, n))


class TestGeneralizationGap:
    def test_final_gap_hand_value(self):
        s = series([0.5, 0.7, 0.9121], [0.5, 0.68, 0.8955])
        final, _ = generalization_gap(s)
        assert final == pytest.approx(0.0166, abs=1e-15)

    def test_mean_gap_loop_oracle(self):
        rng = np.random.default_rng(0)
        s = random_series(rng, 12)
        _, mean = generalization_gap(s)
        expected = sum(abs(a - b) for a, b in zip(s.train, s.val)) / 12
        assert mean == pytest.approx(expected, abs=1e-15)

    def test_symmetric_in_curves(self):
        s = series([0.4, 0.8], [0.9, 0.3])
        swapped = series([0.9, 0.3], [0.4, 0.8])
        assert generalization_gap(s) == generalization_gap(swapped)

    def test_identical_curves_give_zero(self):
        s = series([0.5, 0.6, 0.7], [0.5, 0.6, 0.7])
        assert generalization_gap(s) == (0.0, 0.0)


class TestEarlySlope:
    def test_reference_window(self):
        s = series([0.5] * 5, [0.3, 0.35, 0.4, 0.35, 0.3468])
        assert early_slope(s, 5) == pytest.approx(0.0117, abs=1e-15)

    def test_uses_only_endpoint_epochs(self):
        s = series([0.5] * 5, [0.1, 0.9, 0.2, 0.8, 0.5])
        assert early_slope(s, 5) == pytest.approx((0.5 - 0.1) / 4, abs=1e-15)

    def test_window_larger_than_series_rejected(self):
        with pytest.raises(ValueError):
            early_slope(series([0.5] * 3, [0.5] * 3), 5)

    def test_degenerate_window_rejected(self):
        with pytest.raises(ValueError):
            early_slope(series([0.5] * 5, [0.5] * 5), 1)


class TestOverfittingDrop:
    def test_hand_value(self):
        s = series([0.9] * 4, [0.5, 0.9179, 0.93 - 0.0121, 0.9111])
        assert overfitting_drop(s) == pytest.approx(0.0068, abs=1e-15)

    def test_monotone_rise_has_zero_drop(self):
        s = series([0.5] * 4, [0.2, 0.4, 0.6, 0.8])
        assert overfitting_drop(s) == 0.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(1)
        s = random_series(rng, 20)
        assert overfitting_drop(s) == pytest.approx(
            max(s.val) - s.val[-1], abs=1e-15
        )


class TestFluctuation:
    def test_spike_series(self):
        # |diffs| of [0, 1, 0] are (1, 1): mean one, zero spread.
        s = series([0.0, 1.0, 0.0], [0.0, 1.0, 0.0])
        mu, sigma = fluctuation(s, "val")
        assert mu == 1.0
        assert sigma == 0.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(2)
        s = random_series(rng, 15)
        for which, curve in (("train", s.train), ("val", s.val)):
            mu, sigma = fluctuation(s, which)
            steps = [abs(curve[t + 1] - curve[t]) for t in range(len(curve) - 1)]
            mu_hand = sum(steps) / len(steps)
            sigma_hand = math.sqrt(sum((d - mu_hand) ** 2 for d in steps) / len(steps))
            assert mu == pytest.approx(mu_hand, abs=1e-15)
            assert sigma == pytest.approx(sigma_hand, abs=1e-15)

    def test_scaling_steps_scales_both_moments(self):
        rng = np.random.default_rng(3)
        base = rng.uniform(0.3, 0.7, 10)
        scaled = base[0] + 3.0 * np.cumsum(np.concatenate([[0.0], np.diff(base)]))
        mu1, sig1 = fluctuation(series(base, base), "train")
        mu3, sig3 = fluctuation(series(scaled, scaled), "train")
        assert mu3 == pytest.approx(3.0 * mu1, rel=1e-12)
        assert sig3 == pytest.approx(3.0 * sig1, rel=1e-12)

    def test_unknown_curve_rejected(self):
        with pytest.raises(ValueError):
            fluctuation(series([0.5, 0.6], [0.5, 0.6]), "test")

    def test_single_epoch_rejected(self):
        with pytest.raises(ValueError):
            fluctuation(series([0.5], [0.5]), "val")


class TestStabilityRatio:
    def test_reference_step_sizes(self):
        # Constant step magnitudes 0.0105 (train) and 0.0088 (val).
        s = series(zigzag(0.5, 0.0105, 40), zigzag(0.5, 0.0088, 40))
        assert stability_ratio(s) == pytest.approx(0.8335, abs=0.01)

    def test_flat_train_curve_is_undefined(self):
        s = series([0.5] * 6, zigzag(0.5, 0.02, 6))
        assert stability_ratio(s) is None

    def test_common_scale_cancels(self):
        rng = np.random.default_rng(4)
        s = random_series(rng, 12)
        train5 = s.train[0] + 5.0 * np.cumsum(np.concatenate([[0.0], np.diff(s.train)]))
        val5 = s.val[0] + 5.0 * np.cumsum(np.concatenate([[0.0], np.diff(s.val)]))
        assert stability_ratio(series(train5, val5)) == pytest.approx(
            stability_ratio(s), rel=1e-12
        )

    def test_equal_step_sizes_give_one(self):
        s = series(zigzag(0.4, 0.03, 9), zigzag(0.8, 0.03, 9))
        assert stability_ratio(s) == pytest.approx(1.0, rel=1e-12)


class TestEpochAtThreshold:
    def test_first_crossing_wins(self):
        s = series([0.5] * 6, [0.5, 0.7, 0.91, 0.85, 0.95, 0.92])
        assert epoch_at_threshold(s) == 3

    def test_exact_touch_counts(self):
        s = series([0.5] * 3, [0.1, 0.9, 0.2])
        assert epoch_at_threshold(s, 0.9) == 2

    def test_never_crossing_is_absent(self):
        s = series([0.5] * 4, [0.5, 0.6, 0.7, 0.89])
        assert epoch_at_threshold(s) is None

    def test_custom_threshold(self):
        s = series([0.5] * 3, [0.2, 0.55, 0.6])
        assert epoch_at_threshold(s, 0.5) == 2


class TestMetricReport:
    def build(self):
        rng = np.random.default_rng(5)
        return compute_metrics(random_series(rng, 25))

    def test_fields_match_individual_metrics(self):
        rng = np.random.default_rng(6)
        s = random_series(rng, 30)
        report = compute_metrics(s)
        final, mean = generalization_gap(s)
        assert report.final_train == s.train[-1]
        assert report.final_val == s.val[-1]
        assert report.final_gap == final
        assert report.mean_gap == mean
        assert report.early_slope == early_slope(s, 5)
        assert report.overfitting_drop == overfitting_drop(s)
        assert report.epoch_at_threshold == epoch_at_threshold(s)
        assert report.stability_ratio == stability_ratio(s)
        assert (report.train_mu_delta, report.train_sigma_delta) == fluctuation(s, "train")
        assert (report.val_mu_delta, report.val_sigma_delta) == fluctuation(s, "val")

    def test_to_dict_has_every_field(self):
        report = self.build()
        assert tuple(report.to_dict()) == METRIC_FIELDS
        assert len(METRIC_FIELDS) == 12

    def test_csv_row_round_trips(self):
        report = self.build()
        row = report.csv_row()
        assert len(row) == len(METRIC_FIELDS)
        for name, cell in zip(METRIC_FIELDS, row):
            value = getattr(report, name)
            if value is None:
                assert cell == ""
            else:
                assert float(cell) == pytest.approx(value, abs=0)

    def test_absent_metrics_serialize_empty(self):
        s = series([0.5] * 6, [0.1, 0.2, 0.3, 0.2, 0.1, 0.2])
        report = compute_metrics(s)
        assert report.stability_ratio is None
        assert report.epoch_at_threshold is None
        row = dict(zip(METRIC_FIELDS, report.csv_row()))
        assert row["stability_ratio"] == ""
        assert row["epoch_at_threshold"] == ""

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics(series([0.5] * 4, [0.5] * 4))
