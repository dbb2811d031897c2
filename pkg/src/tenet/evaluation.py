"""Closed-loop evaluation: seeded rollouts, success/return reports, velocity
alignment curves, and paraphrase-robustness tables.

Reports are deterministic given (policy source, task set, seed): no wall-clock
or machine fields, so two identical runs serialize byte-identically.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptions import canonical_description
from .envs import TaskSpec, Trajectory, success, veltrack_task
from .errors import InputError, MissingPromptError
from .experts import expert_policy, run_episode
from .nets import CompiledPolicy, ParamVec
from .seeding import episode_seed

REPORT_VERSION = 1


class InstantiatingPolicySource:
    """Instantiates one controller per task from a description, then reuses it."""

    def __init__(self, model, level: str = "L0", desc_seed: int = 0):
        self.model = model
        self.level = level
        self.desc_seed = desc_seed

    def policy_for(self, task: TaskSpec):
        text = self.model.description_for(task, self.level, self.desc_seed)
        return CompiledPolicy(self.model.instantiate(text))


class ExpertPolicySource:
    """The scripted experts, wrapped for the harness."""

    def policy_for(self, task: TaskSpec):
        return expert_policy(task)


class FixedControllerSource:
    """One fixed controller used for every task (e.g. a loaded controller file)."""

    def __init__(self, params: ParamVec, precision: str = "f64"):
        self.compiled = CompiledPolicy(params, precision)

    def policy_for(self, task: TaskSpec):
        if task.state_dim != self.compiled.manifest.in_dim:
            raise InputError(
                f"controller expects {self.compiled.manifest.in_dim}-d states, "
                f"task {task.task_id} has {task.state_dim}"
            )
        return self.compiled


class PromptedPolicySource:
    """For baselines that need a demonstration of the task at evaluation time."""

    def __init__(self, model, prompts: dict[str, Trajectory] | None):
        self.model = model
        self.prompts = prompts

    def policy_for(self, task: TaskSpec):
        if not self.prompts or task.task_id not in self.prompts:
            raise MissingPromptError(
                f"{type(self.model).__name__} needs a prompt trajectory for "
                f"task {task.task_id}; none was provided"
            )
        return self.model.policy_from_prompt(self.prompts[task.task_id])


@dataclass
class TaskEvalRow:
    task_id: str
    family: str
    split: str
    success_rate: float
    mean_return: float
    std_return: float
    n_rollouts: int
    n_flagged: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EvalReport:
    rows: list[TaskEvalRow]
    n_rollouts: int
    eval_seed: int
    config_hash: str = ""
    registry_fingerprint: str = ""
    aggregates: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = self._aggregate()

    def _aggregate(self) -> dict:
        out = {}
        for split in sorted({r.split for r in self.rows}):
            rows = [r for r in self.rows if r.split == split]
            out[split] = {
                "success_rate": float(np.mean([r.success_rate for r in rows])),
                "mean_return": float(np.mean([r.mean_return for r in rows])),
                "n_tasks": len(rows),
            }
        return out

    def split_success(self, split: str) -> float:
        return self.aggregates[split]["success_rate"]

    @property
    def overall_success(self) -> float:
        return float(np.mean([r.success_rate for r in self.rows]))

    def to_json_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "n_rollouts": self.n_rollouts,
            "eval_seed": self.eval_seed,
            "config_hash": self.config_hash,
            "registry_fingerprint": self.registry_fingerprint,
            "aggregates": self.aggregates,
            "rows": [r.to_json() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["task_id", "family", "split", "eval_seed", "success_rate",
                         "mean_return", "std_return", "n_rollouts", "n_flagged"])
        for r in self.rows:
            writer.writerow([r.task_id, r.family, r.split, self.eval_seed,
                             f"{r.success_rate:.6g}", f"{r.mean_return:.6g}",
                             f"{r.std_return:.6g}", r.n_rollouts, r.n_flagged])
        return buf.getvalue()

    def save(self, directory: str | Path, stem: str = "eval_report") -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{stem}.json").write_text(self.to_json(), encoding="utf-8")
        (directory / f"{stem}.csv").write_text(self.to_csv(), encoding="utf-8")


def evaluate(source, tasks: list[TaskSpec], n_rollouts: int = 50, seed: int = 0,
             split_of: dict[str, str] | None = None, config_hash: str = "",
             ) -> EvalReport:
    """Run ``n_rollouts`` seeded episodes per task and report success/returns.

    Episodes that emit a non-finite action are aborted, counted as failures,
    and flagged in the per-task row.
    """
    from .envs import registry_fingerprint

    rows = []
    for task in tasks:
        policy = source.policy_for(task)
        wins, flagged_count, returns = 0, 0, []
        for k in range(n_rollouts):
            traj, flagged = run_episode(task, policy, episode_seed(seed, task.task_id, k))
            if flagged:
                flagged_count += 1
            elif len(traj) == task.horizon and success(task, traj):
                wins += 1
            returns.append(traj.episodic_return)
        rows.append(TaskEvalRow(
            task_id=task.task_id, family=task.family,
            split=(split_of or {}).get(task.task_id, "all"),
            success_rate=wins / n_rollouts,
            mean_return=float(np.mean(returns)),
            std_return=float(np.std(returns)),
            n_rollouts=n_rollouts, n_flagged=flagged_count,
        ))
    return EvalReport(rows, n_rollouts, seed, config_hash=config_hash,
                      registry_fingerprint=registry_fingerprint(tasks))


def split_labels(train: list[TaskSpec], test: list[TaskSpec]) -> dict[str, str]:
    labels = {t.task_id: "train" for t in train}
    labels.update({t.task_id: "test" for t in test})
    return labels


def achieved_velocity(traj: Trajectory, window: int = 20) -> float:
    """Mean forward speed over the final ``window`` states of an episode."""
    return float(traj.states()[-window:, 0].mean())


def velocity_alignment(source, targets, n_rollouts: int = 50, seed: int = 0) -> list[dict]:
    """Instantiate per-target controllers from the canonical velocity command
    and measure the achieved speed; returns one row per instructed target."""
    rows = []
    for target in targets:
        task = veltrack_task(target)
        policy = source.policy_for(task)
        achieved = []
        for k in range(n_rollouts):
            traj, flagged = run_episode(task, policy, episode_seed(seed, task.task_id, k))
            if not flagged:
                achieved.append(achieved_velocity(traj))
        rows.append({
            "instructed": float(task.params[0]),
            "achieved_mean": float(np.mean(achieved)) if achieved else float("nan"),
            "achieved_std": float(np.std(achieved)) if achieved else float("nan"),
            "n_rollouts": len(achieved),
        })
    return rows


def paraphrase_eval(model, tasks: list[TaskSpec], levels=("L0", "L1", "L2"),
                    n_rollouts: int = 50, seed: int = 0, desc_seed: int = 0) -> dict:
    """Re-instantiate every task's controller from fresh level-k descriptions
    and evaluate; returns {level: {success, report}} in level order."""
    out = {}
    for level in levels:
        source = model.policy_source(level=level, desc_seed=desc_seed)
        report = evaluate(source, tasks, n_rollouts=n_rollouts, seed=seed)
        out[level] = {"success": report.overall_success, "report": report}
    return out
