import numpy as np
import pytest

import tenet.experts
from tenet.data import (check_expert_gate, generate_dataset, load_dataset, replay_matches,
                        save_dataset, split_tasks)
from tenet.envs import (VELTRACK_HELDOUT_TARGETS, pointgoal_registry,
                        switchworld10_registry, veltrack_registry)
from tenet.errors import ArtifactError, ConfigError, ExpertGateError


def test_generation_counts(sw10_tasks):
    ds = generate_dataset(sw10_tasks, k=5, m=10, levels=("L0",), seed=0, skip_gate=True)
    assert sum(len(td.trajectories) for td in ds.per_task.values()) == 50
    assert sum(len(td.descriptions["L0"]) for td in ds.per_task.values()) == 100


def test_generation_deterministic(sw10_tasks):
    a = generate_dataset(sw10_tasks[:3], k=2, m=2, seed=5, skip_gate=True)
    b = generate_dataset(sw10_tasks[:3], k=2, m=2, seed=5, skip_gate=True)
    for tid in a.per_task:
        ta, tb = a.per_task[tid], b.per_task[tid]
        assert ta.descriptions == tb.descriptions
        for x, y in zip(ta.trajectories, tb.trajectories):
            assert np.array_equal(x.states(), y.states())
            assert np.array_equal(x.actions(), y.actions())


def test_expert_gate_refuses_bad_expert(sw10_tasks, monkeypatch):
    monkeypatch.setattr(tenet.experts, "expert_action",
                        lambda task, state: np.zeros(task.action_dim))
    with pytest.raises(ExpertGateError) as err:
        check_expert_gate(sw10_tasks[:2], n_rollouts=5)
    assert "switchworld-reach-0" in str(err.value)


def test_gate_runs_during_generation(sw10_tasks, monkeypatch):
    monkeypatch.setattr(tenet.experts, "expert_action",
                        lambda task, state: np.zeros(task.action_dim))
    with pytest.raises(ExpertGateError):
        generate_dataset(sw10_tasks[:2], k=1, m=1, seed=0)


def test_mixed_families_rejected(sw10_tasks):
    mixed = sw10_tasks[:1] + veltrack_registry()[:1]
    with pytest.raises(ConfigError):
        generate_dataset(mixed, k=1, m=1, skip_gate=True)


def test_trajectories_replay_exactly(sw10_dataset):
    for tid in sw10_dataset.task_ids():
        assert replay_matches(sw10_dataset, tid)


def test_split_disjoint_exhaustive():
    tasks = pointgoal_registry(50, seed=0)
    train, test = split_tasks(tasks, holdout_fraction=0.1, seed=0)
    assert len(train) == 45 and len(test) == 5
    train_ids = {t.task_id for t in train}
    test_ids = {t.task_id for t in test}
    assert not train_ids & test_ids
    assert train_ids | test_ids == {t.task_id for t in tasks}


def test_split_two_tasks_even():
    tasks = pointgoal_registry(2, seed=0)
    train, test = split_tasks(tasks, holdout_fraction=0.5, seed=0)
    assert len(train) == 1 and len(test) == 1


def test_split_seeded_shuffle_changes_with_seed():
    tasks = pointgoal_registry(30, seed=0)
    _, t0 = split_tasks(tasks, 0.2, seed=0)
    _, t1 = split_tasks(tasks, 0.2, seed=1)
    assert {t.task_id for t in t0} != {t.task_id for t in t1}


def test_veltrack_default_split_uses_fixed_targets():
    train, test = split_tasks(veltrack_registry())
    assert sorted(t.params[0] for t in test) == sorted(VELTRACK_HELDOUT_TARGETS)
    assert len(train) == 35


def test_split_validates_fraction():
    tasks = pointgoal_registry(10, seed=0)
    with pytest.raises(ConfigError):
        split_tasks(tasks, holdout_fraction=1.5)
    with pytest.raises(ConfigError):
        split_tasks(tasks[:1], holdout_fraction=0.5)


def test_dataset_round_trip_and_byte_identical(tmp_path, sw10_tasks):
    ds = generate_dataset(sw10_tasks[:3], k=2, m=2, levels=("L0", "L1"), seed=3,
                          skip_gate=True)
    out1 = tmp_path / "d1"
    out2 = tmp_path / "d2"
    save_dataset(ds, out1)
    save_dataset(generate_dataset(sw10_tasks[:3], k=2, m=2, levels=("L0", "L1"),
                                  seed=3, skip_gate=True), out2)
    for rel in sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file()):
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel

    loaded = load_dataset(out1)
    assert loaded.task_ids() == ds.task_ids()
    assert loaded.k == 2 and loaded.m == 2 and loaded.levels == ("L0", "L1")
    for tid in ds.task_ids():
        a, b = ds.per_task[tid], loaded.per_task[tid]
        assert a.descriptions == b.descriptions
        for x, y in zip(a.trajectories, b.trajectories):
            assert np.array_equal(x.states(), y.states())
            assert x.seed == y.seed


def test_save_refuses_overwrite(tmp_path, sw10_tasks):
    ds = generate_dataset(sw10_tasks[:2], k=1, m=1, seed=0, skip_gate=True)
    out = tmp_path / "d"
    save_dataset(ds, out)
    with pytest.raises(ArtifactError):
        save_dataset(ds, out)
    save_dataset(ds, out, force=True)


def test_load_missing_manifest_is_artifact_error(tmp_path):
    with pytest.raises(ArtifactError, match="gen"):
        load_dataset(tmp_path / "nope")


def test_summary_matches_regeneration(sw10_tasks):
    a = generate_dataset(sw10_tasks, k=3, m=2, seed=11, skip_gate=True)
    b = generate_dataset(sw10_tasks, k=3, m=2, seed=11, skip_gate=True)
    assert a.summary() == b.summary()


def test_subset_covers_and_rejects(sw10_dataset, sw10_tasks):
    sub = sw10_dataset.subset(sw10_tasks[:4])
    assert sub.task_ids() == [t.task_id for t in sw10_tasks[:4]]
    from tenet.envs import TaskSpec
    foreign = TaskSpec("other", "switchworld", "hold", (), 60)
    with pytest.raises(ArtifactError):
        sw10_dataset.subset([foreign])
