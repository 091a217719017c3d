import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from planarpush.geometry import Pose2D, box, disk
from planarpush.world import BodyState, Bounds, WorldState, ROLE_EE, ROLE_OBSTACLE, ROLE_PUSHEE


@pytest.fixture
def simple_world():
    """Unit workspace, box pushee, disk EE behind it, one obstacle box."""
    pushee = BodyState(Pose2D(0.4, 0.5, 0.0), box(0.025, 0.025), ROLE_PUSHEE)
    ee = BodyState(Pose2D(0.33, 0.5, 0.0), disk(0.01), ROLE_EE)
    obstacle = BodyState(Pose2D(0.7, 0.5, 0.0), box(0.03, 0.08), ROLE_OBSTACLE)
    return WorldState(bodies=[pushee, ee, obstacle], bounds=Bounds(0, 0, 1, 1),
                      goal=Pose2D(0.9, 0.5, 0.0))


@pytest.fixture
def empty_world():
    pushee = BodyState(Pose2D(0.5, 0.5, 0.0), disk(0.025), ROLE_PUSHEE)
    ee = BodyState(Pose2D(0.42, 0.5, 0.0), disk(0.01), ROLE_EE)
    return WorldState(bodies=[pushee, ee], bounds=Bounds(0, 0, 1, 1),
                      goal=Pose2D(0.8, 0.5, 0.0))


def random_grid(rng: np.random.Generator, size: int, density: float) -> np.ndarray:
    return rng.random((size, size)) < density
