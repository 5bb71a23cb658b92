import unittest
from unittest import TestCase

import numpy as np
import scipy.linalg

from channel_bandits.exception import ConvergenceFailure, DimensionError, InvalidModelError
from channel_bandits.model import (
    SystemModel,
    critical_probability,
    h_operator,
    simulate_process,
    spectral_radius,
    steady_state,
    steady_state_gain,
    steady_state_kalman,
)
from tests.utils import coupled_model, fast_model, random_model, scalar_model


class TestCriticalProbability(TestCase):
    def test_published_plants(self):
        # Arrange
        expected = {'scalar': 0.524, 'coupled': 0.408, 'fast': 0.603}
        plants = {'scalar': scalar_model(), 'coupled': coupled_model(), 'fast': fast_model()}

        for name, model in plants.items():
            # Act
            theta_c = critical_probability(model.A)

            # Assert
            self.assertAlmostEqual(
                theta_c, expected[name], delta=1e-3, msg=f'theta_c of the {name} plant'
            )

    def test_stable_plant_has_zero_critical_probability(self):
        self.assertEqual(critical_probability([[0.5]]), 0.0)

    def test_spectral_radius_matches_numpy(self):
        # Arrange
        matrices = [
            [[0.0, -2.0], [2.0, 0.0]],
            [[1.5, 0.2], [0.3, 0.9]],
            [[-3.0, 0.0], [0.0, 1.0]],
            np.diag([0.5, -3.0, 1.0]),
        ]

        for A in matrices:
            # Act
            rho = spectral_radius(A)

            # Assert
            self.assertAlmostEqual(rho, float(np.max(np.abs(np.linalg.eigvals(A)))), places=12)


class TestSystemModel(TestCase):
    def test_scalars_and_flat_lists_are_promoted(self):
        model = SystemModel(A=1.45, C=[1.0], Q=1.0, R=1.0)

        self.assertEqual(model.A.shape, (1, 1))
        self.assertEqual(model.C.shape, (1, 1))
        self.assertEqual((model.n, model.p), (1, 1))

    def test_matrices_are_read_only(self):
        model = scalar_model()

        with self.assertRaises(ValueError):
            model.A[0, 0] = 2.0

    def test_invalid_models_are_rejected(self):
        cases = [
            (DimensionError, dict(A=[[1.0, 0.0]], C=[[1.0]], Q=[[1.0]], R=[[1.0]])),
            (DimensionError, dict(A=[[1.2]], C=[[1.0, 1.0]], Q=[[1.0]], R=[[1.0]])),
            (InvalidModelError, dict(A=np.eye(2), C=[[1.0, 1.0]], Q=[[1.0, 0.5], [0.0, 1.0]], R=1)),
            (InvalidModelError, dict(A=[[1.2]], C=[[1.0]], Q=[[-1.0]], R=[[1.0]])),
            (InvalidModelError, dict(A=[[1.2]], C=[[1.0]], Q=[[1.0]], R=[[0.0]])),
            # second state never reaches the output
            (InvalidModelError, dict(A=np.diag([2.0, 3.0]), C=[[1.0, 0.0]], Q=np.eye(2), R=1)),
            # second state is never excited by noise
            (
                InvalidModelError,
                dict(A=np.diag([2.0, 3.0]), C=[[1.0, 1.0]], Q=np.diag([1.0, 0.0]), R=1),
            ),
        ]
        for error, kwargs in cases:
            with self.assertRaises(error, msg=f'{kwargs} should be rejected'):
                SystemModel(**kwargs)

    def test_to_dict_round_trip(self):
        model = fast_model()

        rebuilt = SystemModel(**model.to_dict())

        for name in ('A', 'C', 'Q', 'R'):
            np.testing.assert_array_equal(getattr(rebuilt, name), getattr(model, name))


class TestSteadyState(TestCase):
    def _posterior_from_dare(self, model: SystemModel) -> np.ndarray:
        A, C, Q, R = model.A, model.C, model.Q, model.R
        prior = scipy.linalg.solve_discrete_are(A.T, C.T, Q, R)
        gain = prior @ C.T @ np.linalg.inv(C @ prior @ C.T + R)
        return prior - gain @ C @ prior

    def test_riccati_iteration_matches_scipy(self):
        for model in (scalar_model(), coupled_model(), fast_model()):
            # Act
            Pbar = steady_state_kalman(model)

            # Assert
            np.testing.assert_allclose(
                Pbar, self._posterior_from_dare(model), rtol=1e-8, atol=1e-10
            )

    def test_steady_state_fields(self):
        # Arrange
        model = fast_model()

        # Act
        steady = steady_state(model)

        # Assert
        self.assertAlmostEqual(steady.theta_c, critical_probability(model.A))
        self.assertAlmostEqual(steady.rho, spectral_radius(model.A))
        self.assertAlmostEqual(steady.trace, float(np.trace(steady.Pbar)))
        self.assertFalse(steady.Pbar.flags.writeable, 'Pbar should be read-only')
        np.testing.assert_allclose(steady.Pbar, steady.Pbar.T)

    def test_gain_reproduces_pbar(self):
        for model in (scalar_model(), coupled_model(), fast_model()):
            # Arrange
            Pbar = steady_state(model).Pbar
            prior = model.A @ Pbar @ model.A.T + model.Q

            # Act
            K = steady_state_gain(model, Pbar)

            # Assert
            np.testing.assert_allclose((np.eye(model.n) - K @ model.C) @ prior, Pbar, atol=1e-9)

    def test_convergence_failure_carries_residual(self):
        with self.assertRaises(ConvergenceFailure) as ctx:
            steady_state_kalman(fast_model(), max_iter=1)

        self.assertEqual(ctx.exception.iterations, 1)
        self.assertGreater(ctx.exception.residual, 0.0)

    def test_non_positive_tolerance(self):
        with self.assertRaises(ValueError):
            steady_state_kalman(scalar_model(), tol=0.0)


class TestHOperator(TestCase):
    def test_scalar_value(self):
        self.assertAlmostEqual(float(h_operator([[2.0]], [[1.45]], [[1.0]])[0, 0]), 1.45**2 * 2 + 1)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            h_operator(np.eye(2), [[1.45]], [[1.0]])

    def test_lemma_properties_on_random_models(self):
        # Arrange
        rng = np.random.default_rng(2024)

        for trial in range(200):
            model = random_model(rng, n=1 + trial % 3)
            Pbar = steady_state_kalman(model)
            B = rng.normal(size=(model.n, model.n))
            X = Pbar
            Y = Pbar + B @ B.T

            # Act
            hX = h_operator(X, model.A, model.Q)
            hY = h_operator(Y, model.A, model.Q)

            # Assert
            self.assertGreaterEqual(
                float(np.min(np.linalg.eigvalsh(hY - hX))), -1e-9, 'h must be monotone'
            )
            self.assertGreaterEqual(
                float(np.min(np.linalg.eigvalsh(hX - Pbar))), -1e-9, 'h(Pbar) must dominate Pbar'
            )
            self.assertGreater(float(np.trace(hX)), float(np.trace(Pbar)))


class TestSimulateProcess(TestCase):
    def test_noise_free_state_follows_powers_of_a(self):
        # Arrange
        model = fast_model()
        steady = steady_state(model)
        x0 = np.array([1.0, -2.0])

        # Act
        trajectory = simulate_process(
            model, steady.Pbar, 10, np.random.default_rng(0), inject_noise=False, x0=x0
        )

        # Assert
        for k in range(11):
            np.testing.assert_allclose(
                trajectory.x[0, k], np.linalg.matrix_power(model.A, k) @ x0, rtol=1e-12
            )

    def test_local_error_covariance_stays_at_pbar(self):
        # Arrange
        model = scalar_model()
        steady = steady_state(model)

        # Act
        trajectory = simulate_process(model, steady.Pbar, 20, np.random.default_rng(5), batch=20000)

        # Assert
        error_variance = float(np.var(trajectory.errors[:, -1, 0]))
        self.assertAlmostEqual(error_variance, float(steady.Pbar[0, 0]), delta=0.05 * steady.trace)

    def test_shapes_and_argument_checks(self):
        model = coupled_model()
        steady = steady_state(model)

        trajectory = simulate_process(model, steady.Pbar, 5, np.random.default_rng(1), batch=3)

        self.assertEqual(trajectory.x.shape, (3, 6, 2))
        self.assertEqual(trajectory.y.shape, (3, 6, 1))
        with self.assertRaises(ValueError):
            simulate_process(model, steady.Pbar, 0, np.random.default_rng(1))


if __name__ == '__main__':
    unittest.main()
