import numpy as np
import pytest

from netspectra import ConnectivityMatrix, NetworkSystem, NodeDynamics


@pytest.fixture
def scalar_node():
    return NodeDynamics.scalar_pole(-1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_system(weights, pole=-1.0, eigenpair=None) -> NetworkSystem:
    node = NodeDynamics.scalar_pole(pole)
    return NetworkSystem(node, ConnectivityMatrix(np.asarray(weights, float), eigenpair=eigenpair))
