import json
import os

import numpy as np

from channel_bandits.channels import ChannelBank
from channel_bandits.model import SystemModel

TEST_DATA_PATH = os.path.join(os.path.dirname(__file__), 'test_data')

# the minutes-long statistical checks only run when this is set
ACCEPTANCE = bool(os.getenv('CHANNEL_BANDITS_ACCEPTANCE'))
ACCEPTANCE_REASON = 'set CHANNEL_BANDITS_ACCEPTANCE=1 to run acceptance-scale experiments'


def scalar_model(a: float = 1.45) -> SystemModel:
    return SystemModel(A=[[a]], C=[[1.0]], Q=[[1.0]], R=[[1.0]])


def coupled_model() -> SystemModel:
    return SystemModel(A=[[1.2, 0.1], [0.2, 1.1]], C=[[1.0, 1.0]], Q=np.eye(2), R=[[1.0]])


def fast_model() -> SystemModel:
    return SystemModel(A=[[1.5, 0.2], [0.3, 0.9]], C=[[1.0, 1.0]], Q=np.eye(2), R=[[1.0]])


def random_model(rng: np.random.Generator, n: int) -> SystemModel:
    """A random plant with full-rank C and Q = I, so it is observable and controllable."""
    A = rng.normal(scale=0.8, size=(n, n))
    C = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
    return SystemModel(A=A, C=C, Q=np.eye(n), R=np.eye(n))


def bank(*thetas: float) -> ChannelBank:
    return ChannelBank.from_thetas(thetas)


def data_path(name: str) -> str:
    return os.path.join(TEST_DATA_PATH, name)


def get_test_config(name: str) -> dict:
    with open(data_path(name), 'r') as f:
        return json.load(f)
