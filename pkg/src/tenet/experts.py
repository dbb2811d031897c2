"""Scripted near-optimal experts for every task family.

Reach and hold behaviors use a saturated PD law; velocity tracking uses a
saturated proportional law.  The oscillate behavior is an anticipatory
relay controller: it reverses thrust when the braking distance predicts the
peak position would exceed the target amplitude, which fits three-plus zero
crossings inside the 60-step horizon (a naive relay on a fixed position
threshold cannot).  The reversal ramps over a small margin band instead of
switching discontinuously; cloned policies track a continuous law far more
faithfully, and the demonstrations stay near-optimal.
"""

from __future__ import annotations

import numpy as np

from .envs import Env, TaskSpec, Trajectory, Transition

EXPERT_VERSION = "1"

EXPERT_GAINS = {
    "reach_kp": 4.0,
    "reach_kd": 2.0,
    "velocity_kp": 8.0,
    "oscillate_amplitude": 0.46,
    "oscillate_rest_speed": 0.05,
    "oscillate_ramp_band": 0.10,
}


def _stop_distance(speed: float) -> float:
    # distance covered while braking at full action from |v|, under
    # v' = clamp(v - 0.1), pos' = pos + 0.1 v'
    return 0.5 * speed * speed - 0.05 * speed


def expert_action(task: TaskSpec, state: np.ndarray) -> np.ndarray:
    """Deterministic scripted action for one state."""
    state = np.asarray(state, dtype=np.float64)
    if task.family == "veltrack":
        err = task.params[0] - state[0]
        return np.clip([EXPERT_GAINS["velocity_kp"] * err], -1.0, 1.0)

    pos, vel = state[:2], state[2:]
    if task.behavior in ("reach", "hold"):
        goal = np.asarray(task.params) if task.behavior == "reach" else np.zeros(2)
        raw = EXPERT_GAINS["reach_kp"] * (goal - pos) - EXPERT_GAINS["reach_kd"] * vel
        return np.clip(raw, -1.0, 1.0)

    # oscillate along x, PD-hold y at zero
    x, vx = state[0], state[2]
    amp = EXPERT_GAINS["oscillate_amplitude"]
    if abs(vx) > EXPERT_GAINS["oscillate_rest_speed"]:
        direction = np.sign(vx)
    else:
        direction = -np.sign(x) if x != 0.0 else 1.0
    margin = amp - (direction * x + _stop_distance(abs(vx)))
    ax = direction * np.clip(margin / EXPERT_GAINS["oscillate_ramp_band"], -1.0, 1.0)
    ay = np.clip(-4.0 * state[1] - 2.0 * state[3], -1.0, 1.0)
    return np.array([ax, ay], dtype=np.float64)


def expert_policy(task: TaskSpec):
    """Close the expert law over a task, yielding a state -> action callable."""
    return lambda state: expert_action(task, state)


def run_episode(task: TaskSpec, policy, seed: int) -> tuple[Trajectory, bool]:
    """Roll one full episode; returns (trajectory, non_finite_flag).

    A non-finite action aborts the episode early and flags it; the truncated
    trajectory keeps whatever transitions were collected.
    """
    env = Env(task)
    state = env.reset(seed)
    transitions: list[Transition] = []
    flagged = False
    for _ in range(task.horizon):
        action = np.asarray(policy(state), dtype=np.float64)
        if not np.all(np.isfinite(action)):
            flagged = True
            break
        next_state, reward, _, _ = env.step(action)
        transitions.append(Transition(state, action, reward, next_state))
        state = next_state
    return Trajectory(task.task_id, transitions, seed=seed), flagged


def expert_success_rate(task: TaskSpec, n_rollouts: int = 50, seed: int = 0) -> float:
    from .envs import success
    from .seeding import episode_seed

    wins = 0
    policy = expert_policy(task)
    for k in range(n_rollouts):
        traj, flagged = run_episode(task, policy, episode_seed(seed, task.task_id, k))
        if not flagged and success(task, traj):
            wins += 1
    return wins / n_rollouts
