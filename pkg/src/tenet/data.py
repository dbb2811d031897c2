"""Offline dataset generation, task splitting, and the on-disk format.

A dataset directory holds ``manifest.json`` plus one binary trajectory blob
and one description list per task.  Generation is gated on the scripted
experts actually solving their tasks, and is a pure function of
(registry, K, M, levels, seed): regenerating with the same arguments yields
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import descriptions as desc_mod
from .envs import (ENV_CONSTANTS, TaskSpec, Trajectory, Transition,
                   VELTRACK_HELDOUT_TARGETS, registry_fingerprint, transition)
from .errors import ArtifactError, ConfigError, ExpertGateError
from .experts import EXPERT_GAINS, EXPERT_VERSION, expert_policy, expert_success_rate, run_episode
from .seeding import derive_rng, derive_seed

FORMAT_VERSION = 1
_TRAJ_MAGIC = b"TNTRAJ01"

DEFAULT_K = 20
DEFAULT_M = 10
EXPERT_GATE_THRESHOLD = 0.95
EXPERT_GATE_ROLLOUTS = 50


@dataclass
class TaskData:
    task: TaskSpec
    trajectories: list[Trajectory]
    descriptions: dict[str, list[str]]


@dataclass
class OfflineDataset:
    tasks: list[TaskSpec]
    per_task: dict[str, TaskData]
    k: int
    m: int
    levels: tuple[str, ...]
    seed: int
    provenance: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return self.tasks[0].family

    @property
    def state_dim(self) -> int:
        return self.tasks[0].state_dim

    @property
    def action_dim(self) -> int:
        return self.tasks[0].action_dim

    @property
    def horizon(self) -> int:
        return self.tasks[0].horizon

    def task_ids(self) -> list[str]:
        return [t.task_id for t in self.tasks]

    def subset(self, tasks: list[TaskSpec]) -> "OfflineDataset":
        missing = [t.task_id for t in tasks if t.task_id not in self.per_task]
        if missing:
            raise ArtifactError(f"dataset does not cover tasks: {missing}")
        return OfflineDataset(
            tasks=list(tasks),
            per_task={t.task_id: self.per_task[t.task_id] for t in tasks},
            k=self.k, m=self.m, levels=self.levels, seed=self.seed,
            provenance=self.provenance,
        )

    # dense views used by training loops
    def transition_feature_dim(self) -> int:
        return 2 * self.state_dim + self.action_dim + 1

    def trajectory_features(self, task_id: str) -> np.ndarray:
        """(K, T, 2s+a+1) array of (state, action, reward, next_state) rows."""
        trajs = self.per_task[task_id].trajectories
        out = np.empty((len(trajs), len(trajs[0]), self.transition_feature_dim()))
        for i, traj in enumerate(trajs):
            out[i] = _traj_rows(traj)
        return out

    def bc_pool(self, task_id: str) -> tuple[np.ndarray, np.ndarray]:
        """All (state, expert action) pairs of one task, flattened over time."""
        trajs = self.per_task[task_id].trajectories
        states = np.concatenate([[tr.state for tr in t.transitions] for t in trajs])
        actions = np.concatenate([[tr.action for tr in t.transitions] for t in trajs])
        return np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64)

    def summary(self) -> dict:
        rows = {}
        for tid, td in self.per_task.items():
            rows[tid] = {
                "n_transitions": sum(len(t) for t in td.trajectories),
                "mean_return": float(np.mean([t.episodic_return for t in td.trajectories])),
            }
        return rows


def _traj_rows(traj: Trajectory) -> np.ndarray:
    rows = [
        np.concatenate([t.state, t.action, [t.reward], t.next_state])
        for t in traj.transitions
    ]
    return np.asarray(rows, dtype=np.float64)


def check_expert_gate(tasks: list[TaskSpec], threshold: float = EXPERT_GATE_THRESHOLD,
                      n_rollouts: int = EXPERT_GATE_ROLLOUTS, seed: int = 0) -> dict[str, float]:
    """Success rate of the scripted expert on every task; raises on failure."""
    rates = {t.task_id: expert_success_rate(t, n_rollouts, seed) for t in tasks}
    failures = {tid: r for tid, r in rates.items() if r < threshold}
    if failures:
        raise ExpertGateError(failures)
    return rates


def generate_dataset(tasks: list[TaskSpec], k: int = DEFAULT_K, m: int = DEFAULT_M,
                     levels: tuple[str, ...] = ("L0",), seed: int = 0,
                     skip_gate: bool = False) -> OfflineDataset:
    """Roll out K expert episodes and sample M descriptions per level per task."""
    if k < 1 or m < 1:
        raise ConfigError("k and m must both be >= 1")
    families = {t.family for t in tasks}
    if len(families) != 1:
        raise ConfigError(f"one dataset covers one family, got {sorted(families)}")
    if not skip_gate:
        check_expert_gate(tasks, seed=seed)
    per_task: dict[str, TaskData] = {}
    for task in tasks:
        policy = expert_policy(task)
        trajs = []
        for i in range(k):
            traj, flagged = run_episode(task, policy, derive_seed(seed, task.task_id, "demo", i))
            assert not flagged
            trajs.append(traj)
        descs = {}
        for level in levels:
            rng = derive_rng(seed, task.task_id, level, task.descriptor_seed)
            descs[level] = [desc_mod.sample_description(task, level, rng) for _ in range(m)]
        per_task[task.task_id] = TaskData(task, trajs, descs)
    provenance = {
        "expert_version": EXPERT_VERSION,
        "expert_gains": dict(EXPERT_GAINS),
        "env_constants": dict(ENV_CONSTANTS),
    }
    return OfflineDataset(list(tasks), per_task, k, m, tuple(levels), seed, provenance)


def split_tasks(tasks: list[TaskSpec], holdout_fraction: float | None = None,
                seed: int = 0) -> tuple[list[TaskSpec], list[TaskSpec]]:
    """Disjoint, exhaustive train/test split.

    With ``holdout_fraction`` unset, veltrack uses its fixed held-out targets;
    other families get 10%.  The split is a seeded shuffle; outputs keep
    registry order.
    """
    if len(tasks) < 2:
        raise ConfigError("need at least 2 tasks to split")
    if holdout_fraction is None and tasks and tasks[0].family == "veltrack":
        held = set(VELTRACK_HELDOUT_TARGETS)
        test = [t for t in tasks if t.params[0] in held]
        train = [t for t in tasks if t.params[0] not in held]
        if not test:
            raise ConfigError("registry contains none of the fixed held-out targets")
        return train, test
    fraction = 0.1 if holdout_fraction is None else holdout_fraction
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"holdout fraction {fraction} outside (0, 1)")
    n_hold = int(round(len(tasks) * fraction))
    n_hold = min(max(n_hold, 1), len(tasks) - 1)
    order = np.random.default_rng(seed).permutation(len(tasks))
    test_idx = set(int(i) for i in order[:n_hold])
    train = [t for i, t in enumerate(tasks) if i not in test_idx]
    test = [t for i, t in enumerate(tasks) if i in test_idx]
    return train, test


# ---------------------------------------------------------------------------
# on-disk format


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def save_dataset(ds: OfflineDataset, path: str | Path, force: bool = False) -> Path:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if manifest_path.exists() and not force:
        raise ArtifactError(f"{manifest_path} exists; pass force=True to overwrite")
    (path / "tasks").mkdir(parents=True, exist_ok=True)
    files = {}
    for task in ds.tasks:
        td = ds.per_task[task.task_id]
        traj_rel = f"tasks/{task.task_id}.traj.bin"
        desc_rel = f"tasks/{task.task_id}.desc.json"
        (path / traj_rel).write_bytes(_encode_trajectories(task, td.trajectories))
        (path / desc_rel).write_text(
            _canonical_json({"levels": td.descriptions}), encoding="utf-8"
        )
        files[task.task_id] = {"trajectories": traj_rel, "descriptions": desc_rel}
    manifest = {
        "format_version": FORMAT_VERSION,
        "family": ds.family,
        "k": ds.k,
        "m": ds.m,
        "levels": list(ds.levels),
        "seed": ds.seed,
        "registry": [t.to_json() for t in ds.tasks],
        "registry_fingerprint": registry_fingerprint(ds.tasks),
        "provenance": ds.provenance,
        "files": files,
    }
    manifest_path.write_text(_canonical_json(manifest), encoding="utf-8")
    return path


def load_dataset(path: str | Path) -> OfflineDataset:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise ArtifactError(f"no dataset manifest at {manifest_path}; run `tenet gen` first")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(f"unsupported dataset format {manifest.get('format_version')}")
    tasks = [TaskSpec.from_json(t) for t in manifest["registry"]]
    if registry_fingerprint(tasks) != manifest["registry_fingerprint"]:
        raise ArtifactError("registry fingerprint mismatch; manifest corrupted")
    per_task = {}
    for task in tasks:
        entry = manifest["files"][task.task_id]
        trajs = _decode_trajectories(task, (path / entry["trajectories"]).read_bytes())
        desc = json.loads((path / entry["descriptions"]).read_text(encoding="utf-8"))
        per_task[task.task_id] = TaskData(task, trajs, desc["levels"])
    return OfflineDataset(
        tasks, per_task, int(manifest["k"]), int(manifest["m"]),
        tuple(manifest["levels"]), int(manifest["seed"]), manifest["provenance"],
    )


def _encode_trajectories(task: TaskSpec, trajs: list[Trajectory]) -> bytes:
    parts = [_TRAJ_MAGIC,
             struct.pack("<IIII", len(trajs), task.horizon, task.state_dim, task.action_dim)]
    for traj in trajs:
        rows = _traj_rows(traj)
        if rows.shape[0] != task.horizon:
            raise ArtifactError("only complete episodes are stored")
        parts.append(struct.pack("<q", traj.seed))
        parts.append(rows.astype("<f8").tobytes())
    return b"".join(parts)


def _decode_trajectories(task: TaskSpec, blob: bytes) -> list[Trajectory]:
    if blob[:8] != _TRAJ_MAGIC:
        raise ArtifactError(f"bad trajectory blob for {task.task_id}")
    n, horizon, s_dim, a_dim = struct.unpack_from("<IIII", blob, 8)
    if (horizon, s_dim, a_dim) != (task.horizon, task.state_dim, task.action_dim):
        raise ArtifactError(f"trajectory blob shape mismatch for {task.task_id}")
    row_len = 2 * s_dim + a_dim + 1
    offset = 24
    trajs = []
    for _ in range(n):
        (seed,) = struct.unpack_from("<q", blob, offset)
        offset += 8
        count = horizon * row_len * 8
        rows = np.frombuffer(blob[offset: offset + count], dtype="<f8").reshape(horizon, row_len)
        offset += count
        transitions = [
            Transition(
                row[:s_dim].copy(),
                row[s_dim: s_dim + a_dim].copy(),
                float(row[s_dim + a_dim]),
                row[s_dim + a_dim + 1:].copy(),
            )
            for row in rows
        ]
        trajs.append(Trajectory(task.task_id, transitions, seed=int(seed)))
    return trajs


def replay_matches(ds: OfflineDataset, task_id: str) -> bool:
    """Re-run each stored action sequence through the dynamics and compare."""
    task = ds.per_task[task_id].task
    for traj in ds.per_task[task_id].trajectories:
        state = traj.transitions[0].state
        for tr in traj.transitions:
            nxt, reward, _ = transition(task, state, tr.action)
            if not np.array_equal(nxt, tr.next_state) or reward != tr.reward:
                return False
            state = nxt
    return True
