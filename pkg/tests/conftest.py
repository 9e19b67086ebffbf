import numpy as np
import pytest

from shoestring.model import ModelConfig, quantize_weights, random_model

TINY = ModelConfig(n_a=32, n_b=16, d_a=0.25, d_b=0.5, quantized=False, embed_dim=16, cond_dim=24, name="tiny")


@pytest.fixture(scope="session")
def tiny_float():
    return random_model(TINY, seed=5)


@pytest.fixture(scope="session")
def tiny_quant(tiny_float):
    return quantize_weights(tiny_float)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
