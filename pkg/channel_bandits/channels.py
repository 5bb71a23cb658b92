import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from channel_bandits.exception import ChannelIndexError, InvalidChannelBankError

logger = logging.getLogger(__name__)

DISTINCTNESS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ChannelBank:
    """M i.i.d. Bernoulli packet-loss channels with reception probabilities θ_m."""

    thetas: np.ndarray
    m_star: int = field(init=False)
    theta_star: float = field(init=False)
    theta_w: float = field(init=False)

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=float).reshape(-1)
        if thetas.size < 2:
            raise InvalidChannelBankError(f'need at least 2 channels, got {thetas.size}')
        if not np.all(np.isfinite(thetas)) or np.any(thetas < 0.0) or np.any(thetas > 1.0):
            raise InvalidChannelBankError(f'reception probabilities must lie in [0, 1]: {thetas}')
        gaps = np.abs(thetas[:, None] - thetas[None, :])
        np.fill_diagonal(gaps, np.inf)
        if np.min(gaps) < DISTINCTNESS_TOL:
            raise InvalidChannelBankError(
                f'reception probabilities must be pairwise distinct: {thetas}'
            )
        thetas.setflags(write=False)

        m_star = int(np.argmax(thetas))
        object.__setattr__(self, 'thetas', thetas)
        object.__setattr__(self, 'm_star', m_star)
        object.__setattr__(self, 'theta_star', float(thetas[m_star]))
        object.__setattr__(self, 'theta_w', float(np.min(thetas)))

    @classmethod
    def from_thetas(cls, thetas: Sequence[float]) -> 'ChannelBank':
        return cls(thetas=np.asarray(thetas, dtype=float))

    @property
    def M(self) -> int:
        return int(self.thetas.size)

    @property
    def mean_theta(self) -> float:
        return float(np.mean(self.thetas))

    @property
    def theta_second(self) -> float:
        """θ°, the second-largest reception probability."""
        return float(np.sort(self.thetas)[-2])

    def theta(self, m: int) -> float:
        self._check_index(m)
        return float(self.thetas[m])

    def stabilizing_channels(self, theta_c: float) -> np.ndarray:
        return np.flatnonzero(self.thetas > theta_c)

    def _check_index(self, m: int) -> None:
        if not 0 <= m < self.M:
            raise ChannelIndexError(f'channel index {m} out of range for {self.M} channels')

    def to_list(self) -> list:
        return self.thetas.tolist()


def draw(bank: ChannelBank, m: int, rng: np.random.Generator) -> int:
    """One Bernoulli(θ_m) reception outcome; γ = 1 iff uniform(0,1) < θ_m."""
    bank._check_index(m)
    return int(rng.random() < bank.thetas[m])


def is_stabilizable(bank: ChannelBank, theta_c: float) -> bool:
    return bank.theta_star > theta_c
