import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tenet.data import generate_dataset
from tenet.envs import TaskSpec, Trajectory, Transition, switchworld10_registry


@pytest.fixture(scope="session")
def sw10_tasks():
    return switchworld10_registry()


@pytest.fixture(scope="session")
def sw10_dataset(sw10_tasks):
    """Small shared dataset; the expert gate is exercised by its own tests."""
    return generate_dataset(sw10_tasks, k=4, m=3, seed=0, skip_gate=True)


def synthetic_task(task_id="synthetic-0", params=(0.5, -0.5)):
    return TaskSpec(task_id=task_id, family="pointgoal", behavior="reach",
                    params=params, horizon=60)


def synthetic_trajectory(task, length, rng, seed=0):
    """Random (not dynamics-consistent) trajectory for loss-level tests."""
    transitions = []
    state = rng.normal(size=task.state_dim)
    for _ in range(length):
        action = rng.uniform(-1.0, 1.0, size=task.action_dim)
        nxt = rng.normal(size=task.state_dim)
        transitions.append(Transition(state, action, float(rng.normal()), nxt))
        state = nxt
    return Trajectory(task.task_id, transitions, seed=seed)
