"""Comparison baselines.

* ``SharedPolicyBC`` -- one ordinary policy MLP cloned on all tasks with no
  task signal at all; its ceiling on conflicting task sets is the point.
* ``TrajectoryHypernet`` -- the same hypernetwork mechanism, but conditioned
  on an encoded demonstration (a prompt trajectory) instead of text; it needs
  a demonstration of the task at evaluation time.
* ``PromptConcatPolicy`` -- a shared policy MLP reading the state concatenated
  with a pooled prompt embedding.

Hidden widths default to a parameter budget matched (within 20%) to the
text-conditioned model's trainable total, so capacity never explains the
comparison.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import autodiff as ad
from . import losses
from .data import OfflineDataset
from .envs import Trajectory
from .errors import ConfigError, TrainingDivergedError
from .models import TRAJ_POOL_AFTER, HYPER_OUT_SCALE, trainable_count, transition_rows
from .nets import (CompiledPolicy, Manifest, ParamVec, generated_apply, init_params,
                   mlp_apply, mlp_forward, mlp_manifest, policy_manifest,
                   pooled_apply, pooled_forward)
from .optim import Adam
from .seeding import derive_rng
from .validation import check_fitted


def matched_width(in_dim: int, out_dim: int, target: int) -> int:
    """Width w for a two-hidden-layer MLP whose parameter count is ~target."""
    b = in_dim + out_dim + 2
    w = (-b + np.sqrt(b * b + 4.0 * (target - out_dim))) / 2.0
    return max(8, int(round(w)))


def _bc_pool_excluding_first(dataset: OfflineDataset, task_id: str):
    trajs = dataset.per_task[task_id].trajectories[1:]
    states = np.concatenate([[t.state for t in tr.transitions] for tr in trajs])
    actions = np.concatenate([[t.action for t in tr.transitions] for tr in trajs])
    return np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64)


class _AdamLoop:
    """Shared training-loop plumbing for the baseline estimators."""

    def _run(self, n_steps: int, build_loss, log_every: int = 100):
        self.loss_history_ = []
        last_good = (0, self.w_.copy())
        for step in range(n_steps):
            w_node = ad.Node(self.w_)
            try:
                loss = build_loss(w_node, step)
                ad.backward(loss)
            except Exception as exc:
                from .errors import NumericError
                if isinstance(exc, NumericError):
                    self.w_ = last_good[1]
                    raise TrainingDivergedError(step, self) from exc
                raise
            if step % log_every == 0:
                self.loss_history_.append({"step": step, "total": float(loss.value)})
                last_good = (step, self.w_.copy())
            grad = w_node.grad
            if grad is None or not np.all(np.isfinite(grad)):
                self.w_ = last_good[1]
                raise TrainingDivergedError(step, self)
            self.w_ = self.adam_.step(self.w_, grad)
        self.n_steps_done_ = n_steps


class SharedPolicyBC(BaseEstimator, _AdamLoop):
    """Task-blind behavior cloning: one policy MLP over all transitions."""

    def __init__(self, hidden=None, budget_target=None, learning_rate=3e-4,
                 steps=2000, batch_size=128, seed=0, log_every=100):
        self.hidden = hidden
        self.budget_target = budget_target
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_size = batch_size
        self.seed = seed
        self.log_every = log_every

    def fit(self, dataset: OfflineDataset, y=None):
        s_dim, a_dim = dataset.state_dim, dataset.action_dim
        if self.hidden is not None:
            hidden = tuple(self.hidden)
        else:
            target = self.budget_target or trainable_count(
                s_dim, a_dim, dataset.transition_feature_dim())
            width = matched_width(s_dim, a_dim, target)
            hidden = (width, width)
        self.manifest_ = policy_manifest(s_dim, a_dim, hidden)
        pools = [dataset.bc_pool(tid) for tid in dataset.task_ids()]
        states = np.concatenate([p[0] for p in pools])
        actions = np.concatenate([p[1] for p in pools])
        self.w_ = init_params(self.manifest_, derive_rng(self.seed, "init"))
        self.adam_ = Adam(self.w_.shape[0], lr=self.learning_rate)

        def build_loss(w_node, step):
            rng = derive_rng(self.seed, "batch", step)
            idx = rng.integers(0, states.shape[0], size=self.batch_size)
            pred = mlp_apply(w_node, self.manifest_, states[idx])
            return losses.action_mse(pred, actions[idx])

        self._run(self.steps, build_loss, self.log_every)
        self.family_ = dataset.family
        return self

    def policy_params(self) -> ParamVec:
        check_fitted(self, "w_")
        return ParamVec(self.w_, self.manifest_)

    def policy_source(self):
        from .evaluation import FixedControllerSource
        return FixedControllerSource(self.policy_params())


class TrajectoryHypernet(BaseEstimator, _AdamLoop):
    """Hypernetwork conditioned on an encoded prompt trajectory instead of text.

    Trajectory index 0 of every task is held aside as the prompt; cloning
    transitions come from the remaining demonstrations.  Evaluation requires a
    prompt trajectory per task.
    """

    def __init__(self, cond_dim=64, hyper_hidden=(256, 256), policy_hidden=(64, 64),
                 traj_hidden=64, learning_rate=3e-4, steps=20000, batch_tasks=32,
                 bc_samples=16, seed=0, log_every=100):
        self.cond_dim = cond_dim
        self.hyper_hidden = hyper_hidden
        self.policy_hidden = policy_hidden
        self.traj_hidden = traj_hidden
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_tasks = batch_tasks
        self.bc_samples = bc_samples
        self.seed = seed
        self.log_every = log_every

    def fit(self, dataset: OfflineDataset, y=None):
        if dataset.k < 2:
            raise ConfigError("prompt-conditioned training needs K >= 2 demonstrations")
        s_dim, a_dim = dataset.state_dim, dataset.action_dim
        f_dim = dataset.transition_feature_dim()
        self.policy_manifest_ = policy_manifest(s_dim, a_dim, self.policy_hidden)
        self.traj_manifest_ = mlp_manifest("traj", f_dim,
                                           (self.traj_hidden, self.traj_hidden),
                                           self.cond_dim)
        self.hyper_manifest_ = mlp_manifest("hyper", self.cond_dim, self.hyper_hidden,
                                            self.policy_manifest_.param_count)
        tasks = dataset.tasks
        prompts = np.stack([dataset.trajectory_features(t.task_id)[0] for t in tasks])
        pools = [_bc_pool_excluding_first(dataset, t.task_id) for t in tasks]
        bc_states = np.stack([p[0] for p in pools])
        bc_actions = np.stack([p[1] for p in pools])

        self._slices = {
            "traj": slice(0, self.traj_manifest_.param_count),
            "hyper": slice(self.traj_manifest_.param_count,
                           self.traj_manifest_.param_count + self.hyper_manifest_.param_count),
        }
        rng = derive_rng(self.seed, "init")
        self.w_ = np.concatenate([
            init_params(self.traj_manifest_, rng),
            init_params(self.hyper_manifest_, rng, last_layer_scale=HYPER_OUT_SCALE),
        ])
        self.adam_ = Adam(self.w_.shape[0], lr=self.learning_rate)
        n = len(tasks)

        def build_loss(w_node, step):
            srng = derive_rng(self.seed, "batch", step)
            b = min(self.batch_tasks, n)
            idx = srng.choice(n, size=b, replace=False)
            bc_j = srng.integers(0, bc_states.shape[1], size=(b, self.bc_samples))
            rows = np.arange(b)[:, None]
            z = pooled_apply(ad.take(w_node, (self._slices["traj"],)),
                             self.traj_manifest_, TRAJ_POOL_AFTER, prompts[idx])
            theta = mlp_apply(ad.take(w_node, (self._slices["hyper"],)),
                              self.hyper_manifest_, z)
            pred = generated_apply(theta, self.policy_manifest_,
                                   bc_states[idx][rows, bc_j])
            return losses.action_mse(pred, bc_actions[idx][rows, bc_j])

        self._run(self.steps, build_loss, self.log_every)
        self.family_ = dataset.family
        return self

    def encode_trajectory(self, traj: Trajectory) -> np.ndarray:
        check_fitted(self, "w_")
        params = ParamVec(self.w_[self._slices["traj"]], self.traj_manifest_)
        return pooled_forward(params, TRAJ_POOL_AFTER, transition_rows(traj))

    def policy_from_prompt(self, prompt: Trajectory) -> CompiledPolicy:
        z = self.encode_trajectory(prompt)
        hyper = ParamVec(self.w_[self._slices["hyper"]], self.hyper_manifest_)
        theta = mlp_forward(hyper, z)
        return CompiledPolicy(ParamVec(theta, self.policy_manifest_))

    def policy_source(self, prompts: dict[str, Trajectory] | None = None):
        from .evaluation import PromptedPolicySource
        return PromptedPolicySource(self, prompts)


class PromptConcatPolicy(BaseEstimator, _AdamLoop):
    """Shared policy MLP on [state ; pooled prompt embedding]."""

    def __init__(self, cond_dim=64, traj_hidden=64, hidden=None, budget_target=None,
                 learning_rate=3e-4, steps=20000, batch_tasks=32, bc_samples=16,
                 seed=0, log_every=100):
        self.cond_dim = cond_dim
        self.traj_hidden = traj_hidden
        self.hidden = hidden
        self.budget_target = budget_target
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_tasks = batch_tasks
        self.bc_samples = bc_samples
        self.seed = seed
        self.log_every = log_every

    def fit(self, dataset: OfflineDataset, y=None):
        if dataset.k < 2:
            raise ConfigError("prompt-conditioned training needs K >= 2 demonstrations")
        s_dim, a_dim = dataset.state_dim, dataset.action_dim
        f_dim = dataset.transition_feature_dim()
        self.traj_manifest_ = mlp_manifest("traj", f_dim,
                                           (self.traj_hidden, self.traj_hidden),
                                           self.cond_dim)
        if self.hidden is not None:
            hidden = tuple(self.hidden)
        else:
            target = self.budget_target or trainable_count(s_dim, a_dim, f_dim)
            width = matched_width(s_dim + self.cond_dim, a_dim,
                                  target - self.traj_manifest_.param_count)
            hidden = (width, width)
        self.policy_manifest_ = policy_manifest(s_dim + self.cond_dim, a_dim, hidden)
        tasks = dataset.tasks
        prompts = np.stack([dataset.trajectory_features(t.task_id)[0] for t in tasks])
        pools = [_bc_pool_excluding_first(dataset, t.task_id) for t in tasks]
        bc_states = np.stack([p[0] for p in pools])
        bc_actions = np.stack([p[1] for p in pools])

        self._slices = {
            "traj": slice(0, self.traj_manifest_.param_count),
            "policy": slice(self.traj_manifest_.param_count,
                            self.traj_manifest_.param_count + self.policy_manifest_.param_count),
        }
        rng = derive_rng(self.seed, "init")
        self.w_ = np.concatenate([
            init_params(self.traj_manifest_, rng),
            init_params(self.policy_manifest_, rng),
        ])
        self.adam_ = Adam(self.w_.shape[0], lr=self.learning_rate)
        n = len(tasks)

        def build_loss(w_node, step):
            srng = derive_rng(self.seed, "batch", step)
            b = min(self.batch_tasks, n)
            idx = srng.choice(n, size=b, replace=False)
            bc_j = srng.integers(0, bc_states.shape[1], size=(b, self.bc_samples))
            rows = np.arange(b)[:, None]
            states = bc_states[idx][rows, bc_j]                      # (b, bc, s)
            z = pooled_apply(ad.take(w_node, (self._slices["traj"],)),
                             self.traj_manifest_, TRAJ_POOL_AFTER, prompts[idx])
            z_tiled = ad.add(ad.reshape(z, (b, 1, self.cond_dim)),
                             np.zeros((b, self.bc_samples, self.cond_dim)))
            x = ad.concat([states, z_tiled], axis=2)
            pred = mlp_apply(ad.take(w_node, (self._slices["policy"],)),
                             self.policy_manifest_, x)
            return losses.action_mse(pred, bc_actions[idx][rows, bc_j])

        self._run(self.steps, build_loss, self.log_every)
        self.family_ = dataset.family
        return self

    def encode_trajectory(self, traj: Trajectory) -> np.ndarray:
        check_fitted(self, "w_")
        params = ParamVec(self.w_[self._slices["traj"]], self.traj_manifest_)
        return pooled_forward(params, TRAJ_POOL_AFTER, transition_rows(traj))

    def policy_from_prompt(self, prompt: Trajectory):
        z = self.encode_trajectory(prompt)
        policy = ParamVec(self.w_[self._slices["policy"]], self.policy_manifest_)

        def act(state):
            return mlp_forward(policy, np.concatenate([np.asarray(state), z]))

        return act

    def policy_source(self, prompts: dict[str, Trajectory] | None = None):
        from .evaluation import PromptedPolicySource
        return PromptedPolicySource(self, prompts)


BASELINE_KINDS = {
    "bc-shared": SharedPolicyBC,
    "traj-hn": TrajectoryHypernet,
    "prompt-concat": PromptConcatPolicy,
}


def train_baseline(kind: str, dataset: OfflineDataset, **params):
    """Fit one of the named baselines on an offline dataset."""
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"unknown baseline {kind!r}; choose from {sorted(BASELINE_KINDS)}")
    return BASELINE_KINDS[kind](**params).fit(dataset)
