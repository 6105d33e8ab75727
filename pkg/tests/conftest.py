import numpy as np
import pytest

from beamsim import SystemDims, default_lobe_layout, generate_channel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ref_dims():
    return SystemDims(n_t=64, n_r=32, n_rf_t=16, n_rf_r=8, n_s=8)


@pytest.fixture
def ref_channel(ref_dims):
    return generate_channel(ref_dims, default_lobe_layout(4, 2), np.random.default_rng(5), seed=5)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
