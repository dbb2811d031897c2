import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tenet.envs import (ENV_CONSTANTS, Env, TaskSpec, Trajectory, Transition,
                        VELTRACK_HELDOUT_TARGETS, env_step_count, pointgoal_registry,
                        registry_fingerprint, reset_state, success, switchworld10_registry,
                        switchworld50_registry, task_registry, transition, veltrack_registry,
                        veltrack_task)
from tenet.errors import ConfigError, NumericError


def test_veltrack_reset_is_zero_velocity():
    task = veltrack_task(1.2)
    for seed in (0, 1, 99):
        assert np.array_equal(reset_state(task, seed), [0.0])


def test_pointgoal_reset_deterministic_and_in_support():
    task = pointgoal_registry(1, seed=0)[0]
    assert np.array_equal(reset_state(task, 0), reset_state(task, 0))
    for seed in range(1000):
        s = reset_state(task, seed)
        assert np.all(np.abs(s[:2]) <= 0.1)
        assert np.array_equal(s[2:], [0.0, 0.0])


def test_veltrack_exact_tracking_reward_is_zero():
    # pick action so that the next velocity equals the target exactly
    task = veltrack_task(1.2)
    v = 1.2
    a = (1.2 - ENV_CONSTANTS["vel_drag"] * v) / ENV_CONSTANTS["vel_gain"]
    nxt, reward, _ = transition(task, np.array([v]), np.array([a]))
    assert nxt[0] == pytest.approx(1.2)
    assert reward == pytest.approx(0.0)


def test_veltrack_reward_is_negative_absolute_error():
    task = veltrack_task(3.5)
    nxt, reward, _ = transition(task, np.array([0.0]), np.array([0.0]))
    assert nxt[0] == 0.0
    assert reward == pytest.approx(-3.5)


def test_veltrack_full_throttle_converges_to_top_speed():
    task = veltrack_task(3.0)
    state = np.array([0.0])
    for _ in range(400):
        state, _, _ = transition(task, state, np.array([1.0]))
    # closed-form fixed point: gain / (1 - drag)
    top = ENV_CONSTANTS["vel_gain"] / (1.0 - ENV_CONSTANTS["vel_drag"])
    assert top == pytest.approx(3.0)
    assert state[0] == pytest.approx(3.0, abs=0.01)


def test_point_dynamics_and_action_clamp_flag():
    task = switchworld10_registry()[0]
    state = np.array([0.0, 0.0, 0.5, -0.5])
    nxt, _, clamped = transition(task, state, np.array([2.0, 0.0]))
    assert clamped
    # velocity clamps at +-1, position integrates the new velocity
    assert nxt[2] == pytest.approx(0.6)
    assert nxt[0] == pytest.approx(0.06)
    _, _, ok = transition(task, state, np.array([1.0, 0.0]))
    assert not ok


def test_transition_rejects_non_finite_state():
    task = veltrack_task(1.0)
    with pytest.raises(NumericError):
        transition(task, np.array([np.nan]), np.array([0.0]))


def test_episode_runs_exactly_horizon_steps():
    task = veltrack_task(0.6)
    env = Env(task)
    env.reset(0)
    dones = [env.step([0.1])[2] for _ in range(task.horizon)]
    assert dones[:-1] == [False] * (task.horizon - 1) and dones[-1]


def test_env_step_counter_increments():
    task = veltrack_task(0.6)
    env = Env(task)
    env.reset(0)
    before = env_step_count()
    env.step([0.0])
    assert env_step_count() == before + 1


def _const_policy_trajectory(task, action, seed=0):
    env = Env(task)
    state = env.reset(seed)
    transitions = []
    for _ in range(task.horizon):
        nxt, reward, _, _ = env.step(action)
        transitions.append(Transition(state, np.asarray(action, dtype=float), reward, nxt))
        state = nxt
    return Trajectory(task.task_id, transitions, seed)


def test_success_reach_requires_proximity():
    task = TaskSpec("t", "pointgoal", "reach", (0.8, 0.8), 60)
    idle = _const_policy_trajectory(task, [0.0, 0.0])
    assert not success(task, idle)
    # hand-build a trajectory that sits on the goal for the last 10 steps
    goal_state = np.array([0.8, 0.8, 0.0, 0.0])
    transitions = idle.transitions[:-10] + [
        Transition(goal_state, np.zeros(2), 0.0, goal_state) for _ in range(10)
    ]
    assert success(task, Trajectory("t", transitions))


def test_success_hold_origin():
    task = TaskSpec("h", "switchworld", "hold", (), 60)
    assert success(task, _const_policy_trajectory(task, [0.0, 0.0]))
    assert not success(task, _const_policy_trajectory(task, [1.0, 0.0]))


def test_success_veltrack_band():
    task = veltrack_task(0.6)
    # proportional tracking reaches the band; zero action never moves
    from tenet.experts import expert_action
    env = Env(task)
    state = env.reset(0)
    transitions = []
    for _ in range(task.horizon):
        a = expert_action(task, state)
        nxt, r, _, _ = env.step(a)
        transitions.append(Transition(state, a, r, nxt))
        state = nxt
    assert success(task, Trajectory(task.task_id, transitions))
    assert not success(task, _const_policy_trajectory(task, [0.0]))


def test_success_requires_complete_trajectory():
    task = veltrack_task(0.6)
    traj = _const_policy_trajectory(task, [0.0])
    traj.transitions.pop()
    from tenet.errors import InputError
    with pytest.raises(InputError):
        success(task, traj)


def test_veltrack_registry_grid():
    tasks = veltrack_registry()
    targets = [t.params[0] for t in tasks]
    assert len(tasks) == 40
    assert min(targets) == pytest.approx(0.075)
    assert max(targets) == pytest.approx(3.0)
    diffs = np.diff(sorted(targets))
    assert np.allclose(diffs, 0.075, atol=1e-9)
    assert set(VELTRACK_HELDOUT_TARGETS) <= set(targets)


def test_switchworld10_has_ten_distinct_behaviors():
    tasks = switchworld10_registry()
    assert len(tasks) == 10
    assert len({t.task_id for t in tasks}) == 10
    behaviors = [t.behavior for t in tasks]
    assert behaviors.count("reach") == 8
    assert behaviors.count("hold") == 1
    assert behaviors.count("oscillate") == 1
    radii = [np.hypot(*t.params) for t in tasks if t.behavior == "reach"]
    assert np.allclose(radii, 0.8, atol=2e-3)


def test_switchworld50_grid():
    tasks = switchworld50_registry()
    assert len(tasks) == 50
    assert sum(t.behavior == "reach" for t in tasks) == 48
    assert all(t.params != (0.0, 0.0) for t in tasks if t.behavior == "reach")


def test_pointgoal_registry_deterministic_and_bounded():
    a = pointgoal_registry(200, seed=3)
    b = pointgoal_registry(200, seed=3)
    assert [t.params for t in a] == [t.params for t in b]
    assert len({t.params for t in a}) == 200
    for t in a:
        assert -0.9 <= t.params[0] <= 0.9 and -0.9 <= t.params[1] <= 0.9


def test_unknown_family_is_config_error():
    with pytest.raises(ConfigError):
        task_registry("gridworld")


def test_task_spec_validation():
    with pytest.raises(ConfigError):
        TaskSpec("bad", "veltrack", "velocity", (4.5,), 100)
    with pytest.raises(ConfigError):
        TaskSpec("bad", "pointgoal", "reach", (1.5, 0.0), 60)


def test_registry_fingerprint_stable_and_sensitive():
    a = switchworld10_registry()
    assert registry_fingerprint(a) == registry_fingerprint(switchworld10_registry())
    assert registry_fingerprint(a) != registry_fingerprint(a[:-1])


@given(st.integers(min_value=0, max_value=10_000), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=30, deadline=None)
def test_dynamics_deterministic_property(seed, ax, ay):
    task = switchworld10_registry()[0]
    state = reset_state(task, seed)
    n1 = transition(task, state, np.array([ax, ay]))
    n2 = transition(task, state, np.array([ax, ay]))
    assert np.array_equal(n1[0], n2[0]) and n1[1] == n2[1]


def test_rewards_bounded_on_expert_rollouts():
    from tenet.experts import expert_policy, run_episode
    for task in switchworld10_registry()[:3] + [veltrack_task(2.4)]:
        traj, _ = run_episode(task, expert_policy(task), seed=0)
        r = traj.rewards()
        if task.family == "veltrack":
            assert np.all(r >= -4.0) and np.all(r <= 0.0)
        elif task.behavior == "reach":
            assert np.all(r >= -2.0 * np.sqrt(2.0)) and np.all(r <= 0.0)
