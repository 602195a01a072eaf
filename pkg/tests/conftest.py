import math

import numpy as np
import pytest

from fairbeam.scenario import NetworkConfig


@pytest.fixture
def cfg():
    """Default network: N=10, M=3, 3x3 beam sets (|Q| = 729)."""
    return NetworkConfig()


@pytest.fixture
def tiny_cfg():
    """Single-AP network with 2x2 beam sets (|Q| = 4)."""
    return NetworkConfig(
        n_ues=3,
        n_aps=1,
        beamwidth_set=(math.radians(30.0), math.radians(45.0)),
        direction_set=(math.radians(80.0), math.radians(90.0)),
    )


@pytest.fixture
def small_cfg():
    """Two-AP network used for assignment and oracle cross-checks."""
    return NetworkConfig(n_ues=3, n_aps=2)


def random_channel(rng, n_aps, n_ues, lo=1e-12, hi=1e-7):
    """Log-uniform positive gain matrix resembling the simulated link budget."""
    return np.exp(rng.uniform(np.log(lo), np.log(hi), (n_aps, n_ues)))
