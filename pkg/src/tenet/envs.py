"""Synthetic language-augmented control tasks with analytic dynamics.

Three families:

* ``pointgoal``  -- 2-d point mass with velocity-limited acceleration control;
  the task is to reach a goal position.  State (x, y, vx, vy), action
  (ax, ay) in [-1, 1]^2, horizon 60.
* ``veltrack``   -- 1-d velocity tracking under linear drag; the physically
  reachable top speed is 3.0.  State (v,), action (a,) in [-1, 1], horizon 100.
* ``switchworld`` -- same point-mass physics as pointgoal but with a closed
  registry of behaviors (compass-waypoint reach, hold-origin, oscillate-x)
  that all start from the same initial-state distribution, so the task id is
  the only thing that disambiguates them.

Dynamics are deterministic; episodes always run to the horizon.  Every
constant that a success predicate or expert depends on lives in
``ENV_CONSTANTS`` so datasets can record the exact physics they were
generated under.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigError, InputError, NumericError

FAMILIES = ("pointgoal", "veltrack", "switchworld")

POINTGOAL_HORIZON = 60
VELTRACK_HORIZON = 100

ENV_CONSTANTS = {
    "point_accel": 0.1,        # velocity gain per unit action
    "point_vmax": 1.0,         # per-axis speed clamp
    "point_pos_step": 0.1,     # position gain per unit velocity
    "reset_pos_halfwidth": 0.1,
    "vel_drag": 0.96,
    "vel_gain": 0.12,          # top speed = gain / (1 - drag) = 3.0
    "reach_radius": 0.1,
    "reach_window": 10,
    "hold_radius": 0.15,
    "hold_window": 20,
    "oscillate_min_swings": 3,
    "oscillate_min_amplitude": 0.4,
    "vel_band": 0.15,
    "vel_window": 20,
}

# Module-level step counter so tests can assert that offline training never
# touches the simulator.
_ENV_STEP_COUNT = 0


def env_step_count() -> int:
    return _ENV_STEP_COUNT


@dataclass(frozen=True)
class TaskSpec:
    """One task: a dynamics family, a behavior, and its parameters."""

    task_id: str
    family: str
    behavior: str          # reach | hold | oscillate | velocity
    params: tuple[float, ...]
    horizon: int
    descriptor_seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.family == "veltrack":
            (target,) = self.params
            if not 0.0 < target <= 4.0:
                raise ConfigError(f"velocity target {target} outside (0, 4]")
        elif self.behavior == "reach":
            x, y = self.params
            if not (-1.0 <= x <= 1.0 and -1.0 <= y <= 1.0):
                raise ConfigError(f"goal ({x}, {y}) outside [-1, 1]^2")
        elif self.behavior not in ("hold", "oscillate"):
            raise ConfigError(f"unknown behavior {self.behavior!r}")

    @property
    def state_dim(self) -> int:
        return 1 if self.family == "veltrack" else 4

    @property
    def action_dim(self) -> int:
        return 1 if self.family == "veltrack" else 2

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "family": self.family,
            "behavior": self.behavior,
            "params": list(self.params),
            "horizon": self.horizon,
            "descriptor_seed": self.descriptor_seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TaskSpec":
        return cls(
            task_id=data["task_id"],
            family=data["family"],
            behavior=data["behavior"],
            params=tuple(float(p) for p in data["params"]),
            horizon=int(data["horizon"]),
            descriptor_seed=int(data["descriptor_seed"]),
        )


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


@dataclass
class Trajectory:
    task_id: str
    transitions: list[Transition]
    seed: int = 0

    def __len__(self):
        return len(self.transitions)

    def states(self) -> np.ndarray:
        """All visited states, initial state first: (len+1, state_dim)."""
        rows = [self.transitions[0].state] + [t.next_state for t in self.transitions]
        return np.asarray(rows, dtype=np.float64)

    def actions(self) -> np.ndarray:
        return np.asarray([t.action for t in self.transitions], dtype=np.float64)

    def rewards(self) -> np.ndarray:
        return np.asarray([t.reward for t in self.transitions], dtype=np.float64)

    @property
    def episodic_return(self) -> float:
        return float(self.rewards().sum())


def reset_state(task: TaskSpec, seed: int) -> np.ndarray:
    """Draw an initial state. veltrack always starts at rest."""
    if task.family == "veltrack":
        return np.zeros(1, dtype=np.float64)
    rng = np.random.default_rng(seed)
    hw = ENV_CONSTANTS["reset_pos_halfwidth"]
    pos = rng.uniform(-hw, hw, size=2)
    return np.array([pos[0], pos[1], 0.0, 0.0], dtype=np.float64)


def _point_reward(task: TaskSpec, next_state: np.ndarray) -> float:
    pos = next_state[:2]
    if task.behavior == "reach":
        return -float(np.linalg.norm(pos - np.asarray(task.params)))
    if task.behavior == "hold":
        return -float(np.linalg.norm(pos))
    # oscillate: reward lateral speed, penalize drifting out of the band
    x, vx = next_state[0], next_state[2]
    return float(abs(vx) - 2.0 * max(0.0, abs(x) - 0.6))


def transition(task: TaskSpec, state: np.ndarray, action: np.ndarray,
               ) -> tuple[np.ndarray, float, bool]:
    """One deterministic dynamics step: (next_state, reward, clamped)."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise NumericError("non-finite state")
    clamped = bool(np.any(action < -1.0) or np.any(action > 1.0))
    a = np.clip(action, -1.0, 1.0)
    if task.family == "veltrack":
        v = ENV_CONSTANTS["vel_drag"] * state[0] + ENV_CONSTANTS["vel_gain"] * a[0]
        nxt = np.array([v], dtype=np.float64)
        reward = -abs(v - task.params[0])
        return nxt, float(reward), clamped
    vel = np.clip(state[2:] + ENV_CONSTANTS["point_accel"] * a,
                  -ENV_CONSTANTS["point_vmax"], ENV_CONSTANTS["point_vmax"])
    pos = state[:2] + ENV_CONSTANTS["point_pos_step"] * vel
    nxt = np.concatenate([pos, vel])
    return nxt, _point_reward(task, nxt), clamped


class Env:
    """Episode wrapper around the pure dynamics with a horizon counter."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self._state: np.ndarray | None = None
        self._t = 0

    def reset(self, seed: int) -> np.ndarray:
        self._state = reset_state(self.task, seed)
        self._t = 0
        return self._state.copy()

    def step(self, action) -> tuple[np.ndarray, float, bool, dict]:
        global _ENV_STEP_COUNT
        if self._state is None:
            raise InputError("call reset() before step()")
        if self._t >= self.task.horizon:
            raise InputError("episode already finished")
        _ENV_STEP_COUNT += 1
        nxt, reward, clamped = transition(self.task, self._state, action)
        self._state = nxt
        self._t += 1
        done = self._t >= self.task.horizon
        return nxt.copy(), reward, done, {"clamped": clamped}


def _sign_changes(xs: np.ndarray) -> int:
    signs = np.sign(xs)
    nz = signs[signs != 0]
    if nz.size < 2:
        return 0
    return int(np.sum(nz[1:] != nz[:-1]))


def success(task: TaskSpec, traj: Trajectory) -> bool:
    """Behavior-specific success predicate over one complete episode."""
    if len(traj) != task.horizon:
        raise InputError(
            f"success needs a complete trajectory of length {task.horizon}, got {len(traj)}"
        )
    states = traj.states()
    if task.family == "veltrack":
        v_bar = states[-ENV_CONSTANTS["vel_window"]:, 0].mean()
        return bool(abs(v_bar - task.params[0]) < ENV_CONSTANTS["vel_band"])
    pos = states[:, :2]
    if task.behavior == "reach":
        tail = pos[-ENV_CONSTANTS["reach_window"]:]
        dist = np.linalg.norm(tail - np.asarray(task.params), axis=1)
        return bool(np.any(dist < ENV_CONSTANTS["reach_radius"]))
    if task.behavior == "hold":
        tail = pos[-ENV_CONSTANTS["hold_window"]:]
        return bool(np.all(np.linalg.norm(tail, axis=1) < ENV_CONSTANTS["hold_radius"]))
    xs = states[:, 0]
    return bool(
        _sign_changes(xs) >= ENV_CONSTANTS["oscillate_min_swings"]
        and np.max(np.abs(xs)) >= ENV_CONSTANTS["oscillate_min_amplitude"]
    )


def _descriptor_seed(family: str, index: int, seed: int) -> int:
    import zlib

    tag = zlib.crc32(family.encode())  # stable across processes, unlike hash()
    return int(np.random.SeedSequence((tag, index, seed)).generate_state(1)[0] % (2 ** 31))


def _quantize(x: float) -> float:
    """Snap to 3 decimals so parameters round-trip through descriptions."""
    return float(f"{x:.3f}") + 0.0  # "+ 0.0" normalizes -0.0


def veltrack_registry() -> list[TaskSpec]:
    """Velocity targets on the fixed grid 0.075..3.0 (step 0.075, 40 tasks)."""
    tasks = []
    for k in range(1, 41):
        target = _quantize(k * 0.075)
        tasks.append(TaskSpec(
            task_id=f"veltrack-{k:02d}", family="veltrack", behavior="velocity",
            params=(target,), horizon=VELTRACK_HORIZON,
            descriptor_seed=_descriptor_seed("veltrack", k, 0),
        ))
    return tasks


VELTRACK_HELDOUT_TARGETS = (0.225, 0.6, 1.2, 1.8, 2.025)
VELTRACK_OOD_TARGET = 3.5


def veltrack_task(target: float) -> TaskSpec:
    """Ad-hoc velocity task (used for out-of-distribution instructions)."""
    target = _quantize(target)
    return TaskSpec(
        task_id=f"veltrack-adhoc-{target:.3f}", family="veltrack", behavior="velocity",
        params=(target,), horizon=VELTRACK_HORIZON,
    )


def _switchworld_extras(seed: int) -> list[TaskSpec]:
    return [
        TaskSpec("switchworld-hold", "switchworld", "hold", (),
                 POINTGOAL_HORIZON, _descriptor_seed("switchworld", 1000, seed)),
        TaskSpec("switchworld-oscillate", "switchworld", "oscillate", (),
                 POINTGOAL_HORIZON, _descriptor_seed("switchworld", 1001, seed)),
    ]


def switchworld10_registry(seed: int = 0) -> list[TaskSpec]:
    """8 compass waypoints at radius 0.8 plus hold-origin and oscillate-x."""
    tasks = []
    for k in range(8):
        angle = k * np.pi / 4.0
        goal = (_quantize(0.8 * np.cos(angle)), _quantize(0.8 * np.sin(angle)))
        tasks.append(TaskSpec(
            task_id=f"switchworld-reach-{k}", family="switchworld", behavior="reach",
            params=goal, horizon=POINTGOAL_HORIZON,
            descriptor_seed=_descriptor_seed("switchworld", k, seed),
        ))
    return tasks + _switchworld_extras(seed)


def switchworld50_registry(seed: int = 0) -> list[TaskSpec]:
    """48 grid waypoints (7x7 minus the origin) plus hold and oscillate."""
    tasks = []
    axis = [_quantize(-0.9 + 0.3 * i) for i in range(7)]
    k = 0
    for x in axis:
        for y in axis:
            if x == 0.0 and y == 0.0:
                continue
            tasks.append(TaskSpec(
                task_id=f"switchworld-reach-{k:02d}", family="switchworld",
                behavior="reach", params=(x, y), horizon=POINTGOAL_HORIZON,
                descriptor_seed=_descriptor_seed("switchworld", k, seed),
            ))
            k += 1
    return tasks + _switchworld_extras(seed)


def pointgoal_registry(count: int, seed: int = 0) -> list[TaskSpec]:
    """``count`` goal positions low-discrepancy sampled in [-0.9, 0.9]^2."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    pts = sampler.random(count) * 1.8 - 0.9
    tasks = []
    for i, (x, y) in enumerate(pts):
        tasks.append(TaskSpec(
            task_id=f"pointgoal-{i:03d}", family="pointgoal", behavior="reach",
            params=(_quantize(x), _quantize(y)), horizon=POINTGOAL_HORIZON,
            descriptor_seed=_descriptor_seed("pointgoal", i, seed),
        ))
    return tasks


def task_registry(family: str, count: int | None = None, seed: int = 0) -> list[TaskSpec]:
    """Build the task set for a family.

    veltrack and switchworld variants have fixed sizes; pointgoal takes
    ``count``.  ``family`` accepts 'switchworld10'/'switchworld50' aliases.
    """
    if family == "veltrack":
        return veltrack_registry()
    if family in ("switchworld", "switchworld10"):
        return switchworld10_registry(seed)
    if family == "switchworld50":
        return switchworld50_registry(seed)
    if family == "pointgoal":
        if count is None:
            raise ConfigError("pointgoal registry needs a task count")
        return pointgoal_registry(count, seed)
    raise ConfigError(f"unknown family {family!r}")


def registry_fingerprint(tasks: Iterable[TaskSpec]) -> str:
    import hashlib
    import json

    payload = json.dumps([t.to_json() for t in tasks], sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
