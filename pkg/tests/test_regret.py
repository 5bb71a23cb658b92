import unittest
from unittest import TestCase

import numpy as np

from channel_bandits.estimator import expected_series
from channel_bandits.exception import StabilizabilityError
from channel_bandits.model import steady_state
from channel_bandits.regret import (
    RegretAccumulator,
    RunRecord,
    ScalingClass,
    channel_usage,
    classical_regret,
    count_suboptimal,
    estimation_regret,
    oracle_trace_series,
    scaling_fit,
)
from tests.utils import bank, scalar_model


def _random_record(rng: np.random.Generator, M: int, T: int) -> RunRecord:
    selections = rng.integers(M, size=T)
    gammas = rng.integers(0, 2, size=T)
    traces = 0.7 + rng.exponential(1.0, size=T)
    return RunRecord(selections=selections, gammas=gammas, traces=traces, diverged=False)


class TestBookkeeping(TestCase):
    def test_count_suboptimal(self):
        np.testing.assert_array_equal(count_suboptimal([0, 1, 0, 2], 0), [0, 1, 1, 2])

    def test_classical_regret(self):
        channels = bank(0.9, 0.8)

        np.testing.assert_allclose(classical_regret([0, 1, 1], channels), [0.0, 0.1, 0.2])

    def test_classical_regret_is_bounded_by_suboptimal_pulls(self):
        # Arrange
        channels = bank(0.9, 0.8, 0.55, 0.3)
        rng = np.random.default_rng(0)
        gap_min = channels.theta_star - channels.theta_second
        gap_max = channels.theta_star - channels.theta_w

        for _ in range(100):
            selections = rng.integers(4, size=200)

            # Act
            regret = classical_regret(selections, channels)
            n_sub = count_suboptimal(selections, channels.m_star)

            # Assert
            self.assertTrue(np.all(regret >= gap_min * n_sub - 1e-12))
            self.assertTrue(np.all(regret <= gap_max * n_sub + 1e-12))

    def test_run_record_lengths_must_agree(self):
        with self.assertRaises(ValueError):
            RunRecord(selections=np.zeros(3), gammas=np.zeros(2), traces=np.zeros(3))

    def test_channel_usage(self):
        records = [
            RunRecord(np.array([0, 1, 1]), np.ones(3), np.ones(3)),
            RunRecord(np.array([0, 0, 1]), np.ones(3), np.ones(3)),
        ]

        usage = channel_usage(records, 2)

        np.testing.assert_allclose(usage, [[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
        np.testing.assert_allclose(usage.sum(axis=0), np.ones(3))
        with self.assertRaises(ValueError):
            channel_usage([], 2)


class TestOracleSeries(TestCase):
    def setUp(self):
        self.model = scalar_model()
        self.steady = steady_state(self.model)

    def test_perfect_channel_stays_at_pbar(self):
        oracle = oracle_trace_series(self.model, 1.0, 20, steady=self.steady)

        np.testing.assert_allclose(oracle, np.full(20, self.steady.trace))

    def test_converges_to_fixed_point(self):
        oracle = oracle_trace_series(self.model, 0.8, 500, steady=self.steady)

        self.assertAlmostEqual(oracle[-1], 1.3314, delta=1e-3)

    def test_unstabilizable_best_channel(self):
        with self.assertRaises(StabilizabilityError):
            oracle_trace_series(self.model, 0.5, 20, steady=self.steady)


class TestFixedChannelRegret(TestCase):
    def test_suboptimal_channel_regret_is_linear(self):
        # Arrange
        model = scalar_model()
        steady = steady_state(model)
        T = 1000
        oracle = oracle_trace_series(model, 0.9, T, steady=steady)

        # Act
        fixed = expected_series(model, 0.8, T, steady=steady)
        cum_regret = np.cumsum(fixed.traces - oracle)

        # Assert
        best = expected_series(model, 0.9, 1, steady=steady)
        gap = fixed.fixed_point_trace - best.fixed_point_trace
        self.assertGreater(gap, 0.0)
        self.assertAlmostEqual(float(cum_regret[-1] - cum_regret[-2]), gap, places=8)
        fit = scaling_fit(cum_regret)
        self.assertEqual(fit.classification, ScalingClass.linear)
        self.assertAlmostEqual(fit.linear_coeffs[0], gap, places=6)


class TestRegretAccumulator(TestCase):
    def setUp(self):
        self.channels = bank(0.8, 0.6, 0.5)
        self.oracle = np.full(40, 0.9)
        rng = np.random.default_rng(4)
        self.records = [_random_record(rng, 3, 40) for _ in range(60)]

    def test_increments_equal_mean_minus_oracle(self):
        # Act
        report = estimation_regret(self.records, self.oracle, self.channels)

        # Assert
        mean = np.mean([r.traces for r in self.records], axis=0)
        np.testing.assert_allclose(report.mean_trace, mean)
        np.testing.assert_allclose(np.diff(report.cum_regret), (mean - self.oracle)[1:])
        self.assertAlmostEqual(report.cum_regret[0], mean[0] - self.oracle[0])
        self.assertEqual(report.runs, 60)

    def test_stderr_matches_sample_statistics(self):
        report = estimation_regret(self.records, self.oracle, self.channels)

        gaps = np.array([np.cumsum(r.traces - self.oracle) for r in self.records])
        expected = gaps.std(axis=0, ddof=1) / np.sqrt(len(self.records))
        np.testing.assert_allclose(report.stderr_regret, expected, rtol=1e-9)

    def test_single_run_has_zero_stderr(self):
        report = estimation_regret(self.records[:1], self.oracle, self.channels)

        np.testing.assert_array_equal(report.stderr_regret, np.zeros(40))

    def test_merge_matches_sequential_add(self):
        # Arrange
        whole = estimation_regret(self.records, self.oracle, self.channels)
        first = RegretAccumulator(self.oracle, self.channels)
        second = RegretAccumulator(self.oracle, self.channels)

        # Act
        for record in self.records[:25]:
            first.add(record)
        for record in self.records[25:]:
            second.add(record)
        merged = first.merge(second).report()

        # Assert
        np.testing.assert_allclose(merged.cum_regret, whole.cum_regret, rtol=1e-12)
        np.testing.assert_allclose(merged.n_sub, whole.n_sub)
        np.testing.assert_allclose(merged.usage, whole.usage)
        self.assertEqual(merged.reception_rate, whole.reception_rate)

    def test_report_aggregates(self):
        # Act
        report = estimation_regret(self.records, self.oracle, self.channels)

        # Assert
        expected_n_sub = np.mean(
            [count_suboptimal(r.selections, self.channels.m_star) for r in self.records], axis=0
        )
        np.testing.assert_allclose(report.n_sub, expected_n_sub)
        late = np.concatenate([r.gammas[20:] for r in self.records])
        self.assertAlmostEqual(report.reception_rate, float(late.mean()))
        np.testing.assert_allclose(report.usage.sum(axis=0), np.ones(40))
        self.assertEqual(report.diverged_fraction, 0.0)

    def test_prefix(self):
        report = estimation_regret(self.records, self.oracle, self.channels)

        head = report.prefix(10)

        self.assertEqual(head.horizon, 10)
        self.assertEqual(head.regret_T, float(report.cum_regret[9]))
        self.assertEqual(head.usage.shape, (3, 10))

    def test_rejects_mismatched_horizons(self):
        accumulator = RegretAccumulator(self.oracle, self.channels)

        with self.assertRaises(ValueError):
            accumulator.add(_random_record(np.random.default_rng(0), 3, 39))
        with self.assertRaises(ValueError):
            accumulator.merge(RegretAccumulator(self.oracle[:10], self.channels))
        with self.assertRaises(ValueError):
            accumulator.report()

    def test_counts_diverged_runs(self):
        records = [
            RunRecord(np.zeros(40, dtype=int), np.zeros(40), np.full(40, 1e12), diverged=True),
            *self.records[:3],
        ]

        report = estimation_regret(records, self.oracle, self.channels)

        self.assertEqual(report.diverged_runs, 1)
        self.assertAlmostEqual(report.diverged_fraction, 0.25)


class TestScalingFit(TestCase):
    T = np.arange(1, 1001, dtype=float)

    def test_logarithmic_series(self):
        fit = scaling_fit(50.0 * np.log(self.T))

        self.assertEqual(fit.classification, ScalingClass.logarithmic)
        self.assertAlmostEqual(fit.log_coeffs[0], 50.0, places=6)
        self.assertEqual(fit.burn_in, 100)

    def test_linear_series(self):
        fit = scaling_fit(0.3 * self.T + 5.0)

        self.assertEqual(fit.classification, ScalingClass.linear)
        self.assertAlmostEqual(fit.linear_coeffs[0], 0.3, places=6)
        self.assertAlmostEqual(fit.linear_coeffs[1], 5.0, places=4)

    def test_constant_series_is_indeterminate(self):
        fit = scaling_fit(np.full(1000, 3.0))

        self.assertEqual(fit.classification, ScalingClass.indeterminate)

    def test_regret_within_noise_is_indeterminate(self):
        fit = scaling_fit(50.0 * np.log(self.T), stderr=np.full(1000, 1e3))

        self.assertEqual(fit.classification, ScalingClass.indeterminate)

    def test_series_too_short(self):
        with self.assertRaises(ValueError):
            scaling_fit([1.0, 2.0, 3.0, 4.0, 5.0], burn_in=1)


if __name__ == '__main__':
    unittest.main()
