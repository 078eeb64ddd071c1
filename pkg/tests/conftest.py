import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import numpy as np
import pytest

from src.classifier.emotion import GroupedEmotionExtractor
from src.classifier.models import LinearClassifier
from src.classifier.training import train_classifier
from src.motion.skeleton import SkeletonMotion
from src.motion.synthetic import generate_synthetic_dataset
from src.motion.topology import chain_topology


def random_motion(rng, topology, frames, low=0.2, high=0.8, label=None, name=None):
    positions = rng.uniform(low, high, size=(frames, topology.joint_count, 3))
    return SkeletonMotion(topology, positions, label=label, name=name)


def perturbed(motion, rng, scale=0.05):
    positions = np.clip(motion.positions + rng.normal(0.0, scale, size=motion.shape), 0.0, 1.0)
    return motion.with_positions(positions)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def chain5():
    return chain_topology(5)


@pytest.fixture(scope="session")
def toy_dataset():
    """3 classes x 20 motions, 8 frames, 5-joint chain, 5 test motions per class."""
    return generate_synthetic_dataset(
        seed=3, class_count=3, samples_per_class=20, frames=8, topology=chain_topology(5), test_fraction=0.25
    )


@pytest.fixture(scope="session")
def toy_mlp(toy_dataset):
    model, _ = train_classifier(toy_dataset, architecture="mlp", seed=0, epochs=150, lr=1e-2, hidden=(16,))
    return model


@pytest.fixture(scope="session")
def toy_extractor():
    return GroupedEmotionExtractor.seeded(8, 5, seed=11, activation="tanh")


@pytest.fixture
def linear_oracle():
    """
    Two-class linear victim with weight rows (w, -w) on a 2-frame, 2-joint chain,
    and a motion at margin w.x = 0.1 on the class-0 side. ||w|| = 1, so the
    smallest flipping perturbation has l2 norm 0.1.
    """
    topology = chain_topology(2)
    signs = np.array([1.0, -1.0] * 6)
    w = signs / np.sqrt(12.0)
    model = LinearClassifier(np.stack([w, -w]), np.zeros(2), frames=2, joints=2)
    positions = (0.5 + 0.1 * w).reshape(2, 2, 3)
    motion = SkeletonMotion(topology, positions, label=0, name="oracle")
    return model, motion, w
