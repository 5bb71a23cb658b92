"""
Channel-selection policies over a shared Beta posterior.

All four learning policies start from Beta(1, 1) on every channel and update only the
channel they used: α += γ, β += 1 - γ. They differ in how a channel score is formed:

    ε-greedy  posterior mean, with uniform exploration at rate ε
    TS        one Beta sample per channel
    OBS       max(sample, posterior mean)
    SBS       OBS score where the posterior mean exceeds θ̂_c, raw sample elsewhere
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from channel_bandits.channels import ChannelBank
from channel_bandits.exception import ChannelIndexError, PolicyConfigurationError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PosteriorState:
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def fresh(cls, M: int) -> 'PosteriorState':
        return cls(alpha=np.ones(M), beta=np.ones(M))

    @property
    def M(self) -> int:
        return int(self.alpha.size)

    @property
    def means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)

    @property
    def pulls(self) -> np.ndarray:
        return self.alpha + self.beta - 2.0

    @property
    def successes(self) -> np.ndarray:
        return self.alpha - 1.0

    def copy(self) -> 'PosteriorState':
        return PosteriorState(alpha=self.alpha.copy(), beta=self.beta.copy())

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """One Beta(α_m, β_m) draw per channel."""
        return rng.beta(self.alpha, self.beta)

    def update(self, m: int, gamma: int) -> 'PosteriorState':
        """Record outcome γ of a transmission on channel m, in place."""
        if not 0 <= m < self.M:
            raise ChannelIndexError(f'channel index {m} out of range for {self.M} channels')
        if gamma not in (0, 1):
            raise ValueError(f'gamma must be 0 or 1, got {gamma}')
        self.alpha[m] += gamma
        self.beta[m] += 1 - gamma
        return self


def posterior_mean(state: PosteriorState, m: int) -> float:
    return float(state.alpha[m] / (state.alpha[m] + state.beta[m]))


def sample_beta(alpha: float, beta: float, rng: np.random.Generator) -> float:
    # numpy draws Beta through two Gamma variates
    return float(rng.beta(alpha, beta))


def select_epsilon_greedy(state: PosteriorState, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(state.M))
    means = state.means
    maximizers = np.flatnonzero(means == means.max())
    if maximizers.size == 1:
        return int(maximizers[0])
    return int(rng.choice(maximizers))


def select_ts(state: PosteriorState, rng: np.random.Generator) -> Tuple[int, np.ndarray]:
    samples = state.sample(rng)
    return int(np.argmax(samples)), samples


def obs_scores(state: PosteriorState, samples: np.ndarray) -> np.ndarray:
    return np.maximum(samples, state.means)


def sbs_scores(state: PosteriorState, samples: np.ndarray, theta_c_hat: float) -> np.ndarray:
    means = state.means
    return np.where(means > theta_c_hat, np.maximum(samples, means), samples)


def select_obs(
    state: PosteriorState, rng: np.random.Generator, samples: Optional[np.ndarray] = None
) -> int:
    if samples is None:
        samples = state.sample(rng)
    return int(np.argmax(obs_scores(state, samples)))


def select_sbs(
    state: PosteriorState,
    theta_c_hat: float,
    rng: np.random.Generator,
    samples: Optional[np.ndarray] = None,
) -> int:
    if samples is None:
        samples = state.sample(rng)
    return int(np.argmax(sbs_scores(state, samples, theta_c_hat)))


class PolicyKind(Enum):
    epsilon_greedy = 'epsilon_greedy'
    ts = 'ts'
    obs = 'obs'
    sbs = 'sbs'
    oracle = 'oracle'
    fixed = 'fixed'

    @property
    def is_learning(self) -> bool:
        return self not in (PolicyKind.oracle, PolicyKind.fixed)


LEARNING_KINDS = tuple(kind for kind in PolicyKind if kind.is_learning)


def normalize_kind(name: str) -> str:
    """EpsilonGreedy, epsilon-greedy and epsilon_greedy all name the same kind."""
    name = re.sub(r'([a-z0-9])([A-Z])', r'\1_\2', name.strip())
    return re.sub(r'[\s-]+', '_', name).lower()


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    epsilon: Optional[float] = None
    theta_c_hat: Optional[float] = None
    fixed_channel: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            try:
                object.__setattr__(self, 'kind', PolicyKind(normalize_kind(self.kind)))
            except ValueError:
                valid = ', '.join(k.value for k in PolicyKind)
                raise PolicyConfigurationError(
                    f'unknown policy kind "{self.kind}"; expected one of {valid}'
                )

        if self.kind == PolicyKind.epsilon_greedy:
            if self.epsilon is None or not 0.0 < self.epsilon < 1.0:
                raise PolicyConfigurationError('epsilon_greedy needs epsilon in (0, 1)')
        elif self.epsilon is not None:
            raise PolicyConfigurationError('epsilon is only valid for epsilon_greedy')

        if self.kind != PolicyKind.sbs and self.theta_c_hat is not None:
            raise PolicyConfigurationError('theta_c_hat is only valid for sbs')
        if self.theta_c_hat is not None and not 0.0 <= self.theta_c_hat < 1.0:
            raise PolicyConfigurationError('theta_c_hat must lie in [0, 1)')

        if self.kind == PolicyKind.fixed:
            if self.fixed_channel is None or self.fixed_channel < 0:
                raise PolicyConfigurationError('fixed needs a non-negative fixed_channel')
        elif self.fixed_channel is not None:
            raise PolicyConfigurationError('fixed_channel is only valid for fixed')

    @property
    def label(self) -> str:
        if self.kind == PolicyKind.epsilon_greedy:
            return f'epsilon_greedy_{self.epsilon:g}'
        if self.kind == PolicyKind.sbs and self.theta_c_hat is not None:
            return f'sbs_{self.theta_c_hat:g}'
        if self.kind == PolicyKind.fixed:
            return f'fixed_{self.fixed_channel}'
        return self.kind.value

    def with_theta_c_hat(self, theta_c: float) -> 'PolicySpec':
        """SBS without an explicit θ̂_c believes the true θ_c of the plant."""
        if self.kind == PolicyKind.sbs and self.theta_c_hat is None:
            return PolicySpec(kind=self.kind, theta_c_hat=theta_c)
        return self

    def to_dict(self) -> dict:
        doc = {'kind': self.kind.value}
        for key in ('epsilon', 'theta_c_hat', 'fixed_channel'):
            if (value := getattr(self, key)) is not None:
                doc[key] = value
        return doc


class ChannelSelector:
    """A PolicySpec bound to what it needs at run time (the bank, for Oracle and Fixed)."""

    def __init__(self, spec: PolicySpec, bank: Optional[ChannelBank] = None):
        if spec.kind == PolicyKind.oracle and bank is None:
            raise PolicyConfigurationError('the oracle policy needs the channel bank')
        if spec.kind == PolicyKind.sbs and spec.theta_c_hat is None:
            raise PolicyConfigurationError('sbs needs theta_c_hat (see with_theta_c_hat)')
        if spec.kind == PolicyKind.fixed and bank is not None and spec.fixed_channel >= bank.M:
            raise PolicyConfigurationError(
                f'fixed_channel {spec.fixed_channel} out of range for {bank.M} channels'
            )
        self.spec = spec
        self.bank = bank

    def select(self, state: PosteriorState, rng: np.random.Generator) -> int:
        kind = self.spec.kind
        if kind == PolicyKind.ts:
            return select_ts(state, rng)[0]
        if kind == PolicyKind.obs:
            return select_obs(state, rng)
        if kind == PolicyKind.sbs:
            return select_sbs(state, self.spec.theta_c_hat, rng)
        if kind == PolicyKind.epsilon_greedy:
            return select_epsilon_greedy(state, self.spec.epsilon, rng)
        if kind == PolicyKind.oracle:
            return self.bank.m_star
        return self.spec.fixed_channel


def select(
    policy: PolicySpec,
    state: PosteriorState,
    rng: np.random.Generator,
    bank: Optional[ChannelBank] = None,
) -> int:
    return ChannelSelector(policy, bank).select(state, rng)
