import numpy as np
import pytest

from cran_d2d.net_model import ChannelRealization


def random_channel(rng, K=3, N=2, M=2, noise=1.0, cran_scale=1.0, d2d_scale=1.0):
    """Unit-scale complex Gaussian channels; handy for solver tests."""
    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    return ChannelRealization(cran_scale * cn(K, N * M), d2d_scale * cn(K, K), noise, M)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_channel():
    return random_channel
