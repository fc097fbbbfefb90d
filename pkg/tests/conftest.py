"""Shared fixtures.

The expensive artifact is the desk-scale trained model (about 3 minutes on
one core); it is trained once per session and shared by the acceptance
suite. ``quick_model`` is the cheap stand-in for tests that only exercise
shapes and plumbing.
"""

import time

import numpy as np
import pytest

from wavefuse.network import TrainConfig, init_weights, train
from wavefuse.synthdata import write_training_set

DESK_SEED = 100  # texture seed for the 32-image training corpus
DESK_SIZE = 64
DESK_STEPS = 200


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """32 smooth textures at 64x64, the small-dataset training corpus."""
    root = tmp_path_factory.mktemp("desk_train")
    paths = write_training_set(root, 32, size=DESK_SIZE, seed=DESK_SEED)
    return root, paths


@pytest.fixture(scope="session")
def desk_model(desk_dataset):
    """(weights, history, wall seconds) for 200 steps, batch 8, lr 1e-4."""
    root, _ = desk_dataset
    config = TrainConfig(
        dataset_dir=root,
        learning_rate=1e-4,
        batch_size=8,
        epochs=1000,
        lambda_ssim=1000.0,
        seed=0,
        image_size=DESK_SIZE,
        max_steps=DESK_STEPS,
    )
    start = time.monotonic()
    weights, history = train(config)
    return weights, history, time.monotonic() - start


@pytest.fixture(scope="session")
def quick_model():
    """Untrained (seeded) weights for pipeline tests that only need shapes."""
    return init_weights(seed=11)
