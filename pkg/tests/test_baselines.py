import numpy as np
import pytest

from tenet.baselines import (PromptConcatPolicy, SharedPolicyBC, TrajectoryHypernet,
                             matched_width, train_baseline)
from tenet.data import generate_dataset
from tenet.errors import ConfigError, MissingPromptError
from tenet.evaluation import evaluate
from tenet.models import trainable_count


def test_matched_width_hits_budget():
    target = trainable_count(4, 2, 11)
    w = matched_width(4, 2, target)
    count = (4 * w + w) + (w * w + w) + (w * 2 + 2)
    assert abs(count / target - 1.0) <= 0.2


def test_shared_bc_budget_and_fit(sw10_dataset):
    model = SharedPolicyBC(steps=30, seed=0).fit(sw10_dataset)
    target = trainable_count(4, 2, 11)
    assert abs(model.w_.shape[0] / target - 1.0) <= 0.2
    report = evaluate(model.policy_source(), sw10_dataset.tasks[:2], n_rollouts=2, seed=0)
    assert report.rows[0].n_rollouts == 2


def test_shared_bc_explicit_hidden(sw10_dataset):
    model = SharedPolicyBC(hidden=(16, 16), steps=10, seed=0).fit(sw10_dataset)
    assert model.manifest_.layers[0].out_dim == 16


def test_traj_hn_requires_prompts_at_eval(sw10_dataset):
    model = TrajectoryHypernet(steps=10, bc_samples=4, seed=0).fit(sw10_dataset)
    source = model.policy_source(None)
    with pytest.raises(MissingPromptError):
        evaluate(source, sw10_dataset.tasks[:1], n_rollouts=1, seed=0)


def test_traj_hn_total_budget(sw10_dataset):
    model = TrajectoryHypernet(steps=5, bc_samples=4, seed=0).fit(sw10_dataset)
    target = trainable_count(4, 2, 11)
    assert abs(model.w_.shape[0] / target - 1.0) <= 0.2


def test_traj_hn_policy_from_prompt_deterministic(sw10_dataset):
    model = TrajectoryHypernet(steps=10, bc_samples=4, seed=0).fit(sw10_dataset)
    prompt = sw10_dataset.per_task[sw10_dataset.task_ids()[0]].trajectories[0]
    a = model.policy_from_prompt(prompt)
    b = model.policy_from_prompt(prompt)
    state = np.zeros(4)
    assert np.array_equal(a(state), b(state))


def test_traj_hn_needs_two_demos(sw10_tasks):
    ds = generate_dataset(sw10_tasks[:3], k=1, m=1, seed=0, skip_gate=True)
    with pytest.raises(ConfigError):
        TrajectoryHypernet(steps=1).fit(ds)


def test_prompt_concat_fit_and_eval(sw10_dataset):
    model = PromptConcatPolicy(steps=10, bc_samples=4, seed=0).fit(sw10_dataset)
    target = trainable_count(4, 2, 11)
    assert abs(model.w_.shape[0] / target - 1.0) <= 0.2
    prompts = {tid: sw10_dataset.per_task[tid].trajectories[0]
               for tid in sw10_dataset.task_ids()}
    report = evaluate(model.policy_source(prompts), sw10_dataset.tasks[:2],
                      n_rollouts=2, seed=0)
    assert len(report.rows) == 2


def test_prompt_concat_held_aside_prompt_never_cloned(sw10_dataset):
    # the prompt trajectory (index 0) must not appear in the cloning pool
    from tenet.baselines import _bc_pool_excluding_first
    states, _ = _bc_pool_excluding_first(sw10_dataset, sw10_dataset.task_ids()[0])
    k, horizon = sw10_dataset.k, sw10_dataset.horizon
    assert states.shape[0] == (k - 1) * horizon


def test_train_baseline_dispatch(sw10_dataset):
    model = train_baseline("bc-shared", sw10_dataset, steps=5, seed=1)
    assert isinstance(model, SharedPolicyBC)
    with pytest.raises(ConfigError):
        train_baseline("unknown", sw10_dataset)


def test_baseline_fit_deterministic(sw10_dataset):
    a = SharedPolicyBC(hidden=(8, 8), steps=20, seed=4).fit(sw10_dataset)
    b = SharedPolicyBC(hidden=(8, 8), steps=20, seed=4).fit(sw10_dataset)
    assert np.array_equal(a.w_, b.w_)
