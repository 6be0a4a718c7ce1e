"""Shared fixtures: small synthetic populations and heads, all seeded."""

import hypothesis
import numpy as np
import pytest

from mklab.embeddings import (
    SyntheticModelConfig,
    gen_master_face_set,
    gen_synthetic_universe,
)
from mklab.head import init_params

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=50, print_blob=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def small_store():
    """8 identities x 6 samples in 16 dimensions."""
    return gen_synthetic_universe(
        SyntheticModelConfig(8, 6, dimension=16, intra_class_sigma=0.08, seed=11)
    )


@pytest.fixture
def small_mf():
    return gen_master_face_set(16, 0.08, k_train=4, k_test=2, seed=12)


@pytest.fixture
def tiny_head():
    """d=6, h=5 head used by the gradient oracle tests."""
    return init_params(6, 5, seed=21)


@pytest.fixture
def make_rng():
    def _make(seed=0):
        return np.random.default_rng(seed)

    return _make
