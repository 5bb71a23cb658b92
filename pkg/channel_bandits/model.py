"""
Gauss-Markov plant, steady-state local Kalman filter, and the open-loop covariance map.

    x_{k+1} = A x_k + w_k,    w_k ~ N(0, Q)
    y_k     = C x_k + v_k,    v_k ~ N(0, R)

The sensor runs a Kalman filter whose error covariance has converged to P̄; the remote
estimator's covariance grows through h(X) = A X Aᵀ + Q between receptions.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from channel_bandits.exception import ConvergenceFailure, DimensionError, InvalidModelError

logger = logging.getLogger(__name__)

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 100_000
SYMMETRY_RTOL = 1e-12
PSD_ATOL = 1e-12


def as_matrix(value, name: str = 'matrix') -> np.ndarray:
    """Promote a scalar or (nested) sequence to a finite 2-D float array."""
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim > 2:
        raise DimensionError(f'{name} must be at most 2-D, got shape {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f'{name} has non-finite entries')
    return arr


def symmetrize(X: np.ndarray) -> np.ndarray:
    return (X + X.T) / 2.0


def _require_square(X: np.ndarray, name: str) -> None:
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionError(f'{name} must be square, got shape {X.shape}')


def _is_symmetric(X: np.ndarray) -> bool:
    scale = max(np.max(np.abs(X)), 1.0)
    return bool(np.max(np.abs(X - X.T)) <= SYMMETRY_RTOL * scale)


def _numerical_rank(M: np.ndarray) -> int:
    singular_values = scipy.linalg.svdvals(M)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    threshold = max(M.shape) * np.finfo(float).eps * singular_values[0]
    return int(np.sum(singular_values > threshold))


def psd_sqrt(X: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, tiny negative eigenvalues clipped to zero."""
    eigvals, eigvecs = scipy.linalg.eigh(symmetrize(X))
    return (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T


def observability_matrix(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


@dataclass(frozen=True, eq=False)
class SystemModel:
    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ('A', 'C', 'Q', 'R'):
            arr = as_matrix(getattr(self, name), name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self._validate()

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def _validate(self) -> None:
        A, C, Q, R = self.A, self.C, self.Q, self.R
        _require_square(A, 'A')
        n = A.shape[0]
        if C.shape[1] != n:
            raise DimensionError(f'C must have {n} columns, got shape {C.shape}')
        if Q.shape != (n, n):
            raise DimensionError(f'Q must be {n}x{n}, got shape {Q.shape}')
        p = C.shape[0]
        if R.shape != (p, p):
            raise DimensionError(f'R must be {p}x{p}, got shape {R.shape}')

        if not _is_symmetric(Q):
            raise InvalidModelError('Q is not symmetric')
        if not _is_symmetric(R):
            raise InvalidModelError('R is not symmetric')
        if np.min(np.linalg.eigvalsh(symmetrize(Q))) < -PSD_ATOL:
            raise InvalidModelError('Q is not positive semi-definite')
        if np.min(np.linalg.eigvalsh(symmetrize(R))) <= 0.0:
            raise InvalidModelError('R is not positive definite')

        if _numerical_rank(observability_matrix(A, C)) < n:
            raise InvalidModelError('(A, C) is not observable')
        if _numerical_rank(controllability_matrix(A, psd_sqrt(Q))) < n:
            raise InvalidModelError('(A, Q^1/2) is not controllable')

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in ('A', 'C', 'Q', 'R')}


@dataclass(frozen=True, eq=False)
class SteadyState:
    Pbar: np.ndarray
    rho: float
    theta_c: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.Pbar))


def spectral_radius(A) -> float:
    A = as_matrix(A, 'A')
    _require_square(A, 'A')
    n = A.shape[0]
    if n == 1:
        return abs(float(A[0, 0]))
    if n == 2:
        tr = float(A[0, 0] + A[1, 1])
        det = float(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            # complex-conjugate pair, |λ|² = det
            return math.sqrt(det)
        root = math.sqrt(disc)
        return max(abs(tr + root), abs(tr - root)) / 2.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def critical_probability(A) -> float:
    rho = spectral_radius(A)
    if rho <= 1.0:
        return 0.0
    return 1.0 - 1.0 / rho**2


def _posterior_riccati(P: np.ndarray, model: SystemModel) -> np.ndarray:
    A, C, Q, R = model.A, model.C, model.Q, model.R
    Sigma = A @ P @ A.T + Q
    S = C @ Sigma @ C.T + R
    gain = np.linalg.solve(S, C @ Sigma).T
    return symmetrize(Sigma - gain @ C @ Sigma)


def steady_state_kalman(
    model: SystemModel, tol: float = RICCATI_TOL, max_iter: int = RICCATI_MAX_ITER
) -> np.ndarray:
    if tol <= 0:
        raise ValueError('tol must be positive')

    P = np.zeros((model.n, model.n))
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        P_next = _posterior_riccati(P, model)
        residual = float(np.max(np.abs(P_next - P)))
        P = P_next
        if residual < tol:
            logger.debug(f'Riccati iteration converged after {iteration} steps')
            return P

    raise ConvergenceFailure('Riccati fixed-point iteration did not converge', residual, max_iter)


def steady_state_gain(model: SystemModel, Pbar: np.ndarray) -> np.ndarray:
    Sigma = model.A @ Pbar @ model.A.T + model.Q
    S = model.C @ Sigma @ model.C.T + model.R
    return np.linalg.solve(S, model.C @ Sigma).T


def steady_state(model: SystemModel, tol: float = RICCATI_TOL) -> SteadyState:
    Pbar = steady_state_kalman(model, tol=tol)
    Pbar.setflags(write=False)
    return SteadyState(
        Pbar=Pbar,
        rho=spectral_radius(model.A),
        theta_c=critical_probability(model.A),
    )


def h_operator(X, A, Q) -> np.ndarray:
    X, A, Q = np.asarray(X, dtype=float), np.asarray(A, dtype=float), np.asarray(Q, dtype=float)
    if X.ndim != 2 or X.shape != A.shape or X.shape != Q.shape:
        raise DimensionError(
            f'h(X) needs matching square X, A, Q; got {X.shape}, {A.shape}, {Q.shape}'
        )
    return symmetrize(A @ X @ A.T + Q)


@dataclass(frozen=True, eq=False)
class ProcessTrajectory:
    """Arrays of shape (batch, horizon + 1, dim); index 0 along the time axis is k = 0."""

    x: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        return self.x - self.x_hat


def simulate_process(
    model: SystemModel,
    Pbar: np.ndarray,
    horizon: int,
    rng: np.random.Generator,
    batch: int = 1,
    inject_noise: bool = True,
    x0: Optional[np.ndarray] = None,
) -> ProcessTrajectory:
    """
    Simulate the plant and the sensor's steady-state Kalman filter.

    x_0 ~ N(0, P̄) and x̂_0 = 0, so the local error covariance starts (and stays) at P̄.
    With inject_noise=False no process or measurement noise is drawn, which gives
    x_k = A^k x_0 exactly.
    """
    if horizon < 1:
        raise ValueError('horizon must be at least 1')
    if batch < 1:
        raise ValueError('batch must be at least 1')

    A, C = model.A, model.C
    n, p = model.n, model.p
    K = steady_state_gain(model, Pbar)

    x = np.zeros((batch, horizon + 1, n))
    y = np.zeros((batch, horizon + 1, p))
    x_hat = np.zeros((batch, horizon + 1, n))

    if x0 is not None:
        x[:, 0, :] = np.broadcast_to(np.asarray(x0, dtype=float).reshape(-1), (batch, n))
    else:
        x[:, 0, :] = rng.multivariate_normal(np.zeros(n), Pbar, size=batch)

    Q_sqrt = psd_sqrt(model.Q)
    R_sqrt = psd_sqrt(model.R)

    for k in range(1, horizon + 1):
        x[:, k, :] = x[:, k - 1, :] @ A.T
        if inject_noise:
            x[:, k, :] += rng.standard_normal((batch, n)) @ Q_sqrt.T
        y[:, k, :] = x[:, k, :] @ C.T
        if inject_noise:
            y[:, k, :] += rng.standard_normal((batch, p)) @ R_sqrt.T
        prior = x_hat[:, k - 1, :] @ A.T
        x_hat[:, k, :] = prior + (y[:, k, :] - prior @ C.T) @ K.T

    return ProcessTrajectory(x=x, y=y, x_hat=x_hat)
