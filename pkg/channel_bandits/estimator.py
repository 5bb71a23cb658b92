"""
Remote estimator covariance: the realized recursion

    P_k = P̄          if γ_k = 1
    P_k = h(P_{k-1})  if γ_k = 0,          P_0 = P̄,

the expected-covariance recursion E[P_{k+1}] = θ P̄ + (1 - θ) h(E[P_k]) for a channel
used with reception probability θ, and the ε-greedy stability quantities built on them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from channel_bandits import DEFAULT_TRACE_CAP
from channel_bandits.channels import ChannelBank
from channel_bandits.exception import DimensionError, StabilizabilityError
from channel_bandits.model import SteadyState, SystemModel, h_operator, steady_state

logger = logging.getLogger(__name__)

PSD_ORDER_TOL = -1e-9
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 1_000_000


def _check_dominates(P: np.ndarray, Pbar: np.ndarray, name: str) -> None:
    if P.shape != Pbar.shape:
        raise DimensionError(f'{name} has shape {P.shape}, expected {Pbar.shape}')
    diff = P - Pbar
    if np.min(np.linalg.eigvalsh((diff + diff.T) / 2.0)) < PSD_ORDER_TOL * max(
        1.0, float(np.max(np.abs(P)))
    ):
        raise ValueError(f'{name} must dominate P̄ in the PSD order')


@dataclass(frozen=True, eq=False)
class RemoteCovariance:
    P: np.ndarray
    k: int = 0
    diverged: bool = False

    @classmethod
    def initial(cls, steady: SteadyState) -> 'RemoteCovariance':
        return cls(P=steady.Pbar, k=0, diverged=False)

    @property
    def trace(self) -> float:
        return float(np.trace(self.P))

    def advance(
        self, gamma: int, steady: SteadyState, model: SystemModel, cap: float = DEFAULT_TRACE_CAP
    ) -> 'RemoteCovariance':
        P = remote_step(self.P, gamma, steady.Pbar, model.A, model.Q)
        diverged = self.diverged or float(np.trace(P)) > cap
        return RemoteCovariance(P=P, k=self.k + 1, diverged=diverged)


def remote_step(P, gamma: int, Pbar, A, Q) -> np.ndarray:
    P, Pbar = np.asarray(P, dtype=float), np.asarray(Pbar, dtype=float)
    _check_dominates(P, Pbar, 'P')
    if gamma == 1:
        return Pbar.copy()
    if gamma != 0:
        raise ValueError(f'gamma must be 0 or 1, got {gamma}')
    return h_operator(P, A, Q)


def expected_step(EP, theta: float, Pbar, A, Q) -> np.ndarray:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f'theta must lie in [0, 1], got {theta}')
    EP, Pbar = np.asarray(EP, dtype=float), np.asarray(Pbar, dtype=float)
    if EP.shape != Pbar.shape:
        raise DimensionError(f'E[P] has shape {EP.shape}, expected {Pbar.shape}')
    return theta * Pbar + (1.0 - theta) * h_operator(EP, A, Q)


def expected_recursion_converges(theta: float, rho: float) -> bool:
    """
    Scalarized criterion (1 - θ) ρ(A)² < 1, equivalent to θ > θ_c for unstable A.
    A stable plant converges for every θ in [0, 1], θ = 0 included.
    """
    return (1.0 - theta) * rho**2 < 1.0


@dataclass(frozen=True, eq=False)
class ExpectedCovarianceSeries:
    """tr E[P_k] for k = 1..T."""

    traces: np.ndarray
    converged: bool
    fixed_point_trace: Optional[float]
    # the numeric series crossed the cap and was held there
    saturated: bool = False


def _fixed_point_trace(EP: np.ndarray, theta: float, steady: SteadyState, model: SystemModel):
    for _ in range(FIXED_POINT_MAX_ITER):
        EP_next = expected_step(EP, theta, steady.Pbar, model.A, model.Q)
        if np.max(np.abs(EP_next - EP)) < FIXED_POINT_TOL:
            return float(np.trace(EP_next))
        EP = EP_next
    logger.warning(f'Expected-covariance fixed point for theta={theta} did not settle')
    return float(np.trace(EP))


def expected_series(
    model: SystemModel,
    theta: float,
    T: int,
    cap: float = DEFAULT_TRACE_CAP,
    steady: Optional[SteadyState] = None,
) -> ExpectedCovarianceSeries:
    if T < 1:
        raise ValueError('T must be at least 1')
    steady = steady or steady_state(model)
    if cap <= steady.trace:
        raise ValueError(f'cap {cap} must exceed tr(P̄) = {steady.trace}')

    traces = np.empty(T)
    EP = steady.Pbar
    saturated = False
    for k in range(T):
        if saturated:
            traces[k] = cap
            continue
        EP = expected_step(EP, theta, steady.Pbar, model.A, model.Q)
        trace = float(np.trace(EP))
        if trace > cap:
            saturated = True
            trace = cap
        traces[k] = trace
    traces.setflags(write=False)

    converged = expected_recursion_converges(theta, steady.rho)
    fixed_point = _fixed_point_trace(EP, theta, steady, model) if converged else None
    return ExpectedCovarianceSeries(
        traces=traces, converged=converged, fixed_point_trace=fixed_point, saturated=saturated
    )


class CovarianceLadder:
    """
    tr(h^j(P̄)) for j = 0..T, held at the cap once it is exceeded.

    Under the realized recursion P_k = h^j(P̄) where j counts the losses since the last
    reception (or since k = 0, because P_0 = P̄), so a closed-loop run only needs this
    table and a loss counter.
    """

    def __init__(self, model: SystemModel, steady: SteadyState, T: int, cap: float):
        self.cap = cap
        self.traces = np.full(T + 1, cap)
        # first loss-streak length whose trace exceeds the cap, if any within T
        self.saturation_age: Optional[int] = None

        X = steady.Pbar
        for j in range(T + 1):
            trace = float(np.trace(X))
            if trace > cap or not math.isfinite(trace):
                self.saturation_age = j
                break
            self.traces[j] = trace
            X = h_operator(X, model.A, model.Q)
        self.traces.setflags(write=False)

    def trace(self, age: int) -> float:
        return float(self.traces[age])

    def is_saturated(self, age: int) -> bool:
        return self.saturation_age is not None and age >= self.saturation_age


def epsilon_greedy_asymptotic_theta(bank: ChannelBank, epsilon: float) -> float:
    """θ̃ = (1 - ε) θ* + (ε / M) Σ θ_m, the long-run reception rate of ε-greedy."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f'epsilon must lie in [0, 1], got {epsilon}')
    return (1.0 - epsilon) * bank.theta_star + epsilon * bank.mean_theta


def epsilon_stability_bound(bank: ChannelBank, theta_c: float) -> float:
    """
    Largest stabilizing exploration rate: ε-greedy keeps E[P_k] bounded iff
    0 < ε < (θ* - θ_c) / (θ* - mean θ). Values above 1 mean every ε in (0, 1) works.
    """
    if not bank.theta_star > theta_c:
        raise StabilizabilityError(
            f'best channel theta*={bank.theta_star} does not exceed theta_c={theta_c}'
        )
    return (bank.theta_star - theta_c) / (bank.theta_star - bank.mean_theta)
