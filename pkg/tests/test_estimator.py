import unittest
from unittest import TestCase

import numpy as np

from channel_bandits.estimator import (
    CovarianceLadder,
    RemoteCovariance,
    epsilon_greedy_asymptotic_theta,
    epsilon_stability_bound,
    expected_recursion_converges,
    expected_series,
    expected_step,
    remote_step,
)
from channel_bandits.exception import StabilizabilityError
from channel_bandits.model import h_operator, steady_state
from channel_bandits.regret import oracle_trace_series
from tests.utils import bank, coupled_model, fast_model, scalar_model

SCALAR_PBAR = 0.7144


class TestRemoteStep(TestCase):
    def setUp(self):
        self.model = scalar_model()
        self.steady = steady_state(self.model)

    def test_scalar_steady_state(self):
        self.assertAlmostEqual(float(self.steady.Pbar[0, 0]), SCALAR_PBAR, delta=1e-3)

    def test_reception_resets_to_pbar(self):
        # Arrange
        once = h_operator(self.steady.Pbar, self.model.A, self.model.Q)
        P = h_operator(once, self.model.A, self.model.Q)

        # Act
        reset = remote_step(P, 1, self.steady.Pbar, self.model.A, self.model.Q)

        # Assert
        np.testing.assert_array_equal(reset, self.steady.Pbar)

    def test_losses_apply_h(self):
        # Act
        once = remote_step(self.steady.Pbar, 0, self.steady.Pbar, self.model.A, self.model.Q)
        twice = remote_step(once, 0, self.steady.Pbar, self.model.A, self.model.Q)

        # Assert
        self.assertAlmostEqual(float(once[0, 0]), 2.5020, delta=1e-3)
        self.assertAlmostEqual(float(twice[0, 0]), 6.2605, delta=1e-3)

    def test_rejects_bad_inputs(self):
        with self.assertRaises(ValueError):
            remote_step(self.steady.Pbar, 2, self.steady.Pbar, self.model.A, self.model.Q)
        with self.assertRaises(ValueError, msg='P below Pbar is not reachable'):
            remote_step(self.steady.Pbar / 2, 0, self.steady.Pbar, self.model.A, self.model.Q)

    def test_monotone_coupling(self):
        # Arrange
        model = fast_model()
        steady = steady_state(model)
        rng = np.random.default_rng(9)
        gammas = rng.integers(0, 2, size=200)
        P, P_upper = steady.Pbar, steady.Pbar + np.eye(2)

        for gamma in gammas:
            # Act
            P = remote_step(P, int(gamma), steady.Pbar, model.A, model.Q)
            P_upper = remote_step(P_upper, int(gamma), steady.Pbar, model.A, model.Q)

            # Assert
            self.assertGreaterEqual(float(np.min(np.linalg.eigvalsh(P_upper - P))), -1e-9)


class TestRemoteCovariance(TestCase):
    def test_advance_and_divergence_flag(self):
        # Arrange
        model = scalar_model()
        steady = steady_state(model)
        state = RemoteCovariance.initial(steady)

        # Act
        lost = state.advance(0, steady, model)
        received = lost.advance(1, steady, model)
        capped = state
        for _ in range(10):
            capped = capped.advance(0, steady, model, cap=100.0)

        # Assert
        self.assertEqual((state.k, lost.k, received.k), (0, 1, 2))
        self.assertAlmostEqual(lost.trace, 2.5020, delta=1e-3)
        self.assertAlmostEqual(received.trace, steady.trace)
        self.assertFalse(received.diverged)
        self.assertTrue(capped.diverged, 'ten straight losses should pass a cap of 100')
        self.assertTrue(capped.advance(1, steady, model, cap=100.0).diverged, 'the flag is sticky')


class TestExpectedStep(TestCase):
    def test_full_and_no_reception(self):
        model = coupled_model()
        steady = steady_state(model)
        EP = steady.Pbar + np.eye(2)

        np.testing.assert_allclose(
            expected_step(EP, 1.0, steady.Pbar, model.A, model.Q), steady.Pbar
        )
        np.testing.assert_allclose(
            expected_step(EP, 0.0, steady.Pbar, model.A, model.Q), h_operator(EP, model.A, model.Q)
        )

    def test_theta_out_of_range(self):
        model = scalar_model()
        steady = steady_state(model)

        with self.assertRaises(ValueError):
            expected_step(steady.Pbar, 1.5, steady.Pbar, model.A, model.Q)


class TestExpectedSeries(TestCase):
    def setUp(self):
        self.model = scalar_model()
        self.steady = steady_state(self.model)

    def test_stable_channel_converges(self):
        # Act
        series = expected_series(self.model, 0.6, 1000, steady=self.steady)

        # Assert
        self.assertTrue(series.converged)
        self.assertFalse(series.saturated)
        self.assertLess(float(np.max(np.abs(np.diff(series.traces[-11:])))), 1e-8)
        self.assertTrue(np.all(np.diff(series.traces) >= -1e-12), 'series should be monotone')
        self.assertAlmostEqual(series.traces[-1], series.fixed_point_trace, places=8)

    def test_fixed_point_matches_closed_form(self):
        # Arrange
        theta, a2, Pbar = 0.8, 1.45**2, float(self.steady.Pbar[0, 0])
        closed_form = (theta * Pbar + (1 - theta)) / (1 - (1 - theta) * a2)

        # Act
        series = expected_series(self.model, theta, 50, steady=self.steady)

        # Assert
        self.assertAlmostEqual(series.fixed_point_trace, closed_form, places=8)

    def test_unstable_channel_diverges(self):
        # Act
        series = expected_series(self.model, 0.5, 1000, steady=self.steady)

        # Assert
        self.assertFalse(series.converged)
        self.assertIsNone(series.fixed_point_trace)
        self.assertTrue(series.saturated)
        self.assertGreater(series.traces[-1], 1e9)

    def test_growth_criterion(self):
        self.assertTrue(expected_recursion_converges(0.6, 1.45))
        self.assertFalse(expected_recursion_converges(0.5, 1.45))

    def test_stable_plant_converges_without_receptions(self):
        # Arrange
        model = scalar_model(0.5)

        # Act
        series = expected_series(model, 0.0, 200)

        # Assert
        self.assertEqual(steady_state(model).theta_c, 0.0)
        self.assertTrue(series.converged)
        self.assertAlmostEqual(series.fixed_point_trace, 1.0 / (1.0 - 0.25), places=8)

    def test_best_channel_series_is_the_oracle(self):
        series = expected_series(self.model, 0.8, 100, steady=self.steady)

        oracle = oracle_trace_series(self.model, 0.8, 100, steady=self.steady)

        np.testing.assert_array_equal(series.traces, oracle)

    def test_argument_checks(self):
        with self.assertRaises(ValueError):
            expected_series(self.model, 0.8, 0)
        with self.assertRaises(ValueError):
            expected_series(self.model, 0.8, 10, cap=self.steady.trace / 2)


class TestCovarianceLadder(TestCase):
    def test_matches_realized_recursion(self):
        # Arrange
        model = fast_model()
        steady = steady_state(model)
        ladder = CovarianceLadder(model, steady, 300, 1e12)
        rng = np.random.default_rng(1)
        P, age = steady.Pbar, 0

        for gamma in rng.random(300) < 0.7:
            # Act
            P = remote_step(P, int(gamma), steady.Pbar, model.A, model.Q)
            age = 0 if gamma else age + 1

            # Assert
            self.assertAlmostEqual(ladder.trace(age), float(np.trace(P)), places=6)

    def test_saturation(self):
        # Arrange
        model = scalar_model()
        steady = steady_state(model)

        # Act
        ladder = CovarianceLadder(model, steady, 50, cap=100.0)

        # Assert
        self.assertIsNotNone(ladder.saturation_age)
        self.assertGreater(ladder.trace(ladder.saturation_age - 1), 0.0)
        self.assertLessEqual(ladder.trace(ladder.saturation_age - 1), 100.0)
        self.assertEqual(ladder.trace(50), 100.0)
        self.assertTrue(ladder.is_saturated(ladder.saturation_age))
        self.assertFalse(ladder.is_saturated(0))


class TestEpsilonGreedyStability(TestCase):
    def test_asymptotic_theta(self):
        channels = bank(0.6, 0.3, 0.3000001, 0.2999999)

        self.assertAlmostEqual(epsilon_greedy_asymptotic_theta(channels, 0.0), 0.6)
        self.assertAlmostEqual(epsilon_greedy_asymptotic_theta(channels, 1.0), 0.375, places=6)
        self.assertAlmostEqual(epsilon_greedy_asymptotic_theta(channels, 0.5), 0.4875, places=6)
        self.assertAlmostEqual(epsilon_greedy_asymptotic_theta(channels, 0.1), 0.5775, places=6)

    def test_stability_bound(self):
        self.assertAlmostEqual(epsilon_stability_bound(bank(0.8, 0.75, 0.55, 0.5), 0.524), 1.84)
        self.assertAlmostEqual(
            epsilon_stability_bound(bank(0.6, 0.3, 0.3000001, 0.2999999), 0.524), 0.338, places=3
        )
        self.assertLess(epsilon_stability_bound(bank(0.6, 0.3), 0.6 - 1e-9), 1e-8)

    def test_bound_requires_stabilizable_bank(self):
        with self.assertRaises(StabilizabilityError):
            epsilon_stability_bound(bank(0.5, 0.4), 0.524)

    def test_bound_separates_stable_exploration_rates(self):
        # Arrange
        rng = np.random.default_rng(12)

        for _ in range(500):
            thetas = rng.uniform(0.05, 0.95, size=rng.integers(2, 6))
            channels = bank(*thetas)
            theta_c = rng.uniform(0.0, channels.theta_star - 1e-3)
            eps = rng.uniform(0.0, 1.0)

            # Act
            bound = epsilon_stability_bound(channels, theta_c)
            stable = epsilon_greedy_asymptotic_theta(channels, eps) > theta_c

            # Assert
            self.assertEqual(stable, eps < bound, f'thetas={thetas}, theta_c={theta_c}, eps={eps}')


if __name__ == '__main__':
    unittest.main()
