"""Command-line surface: dataset generation, training, evaluation,
benchmarking, one-off policy instantiation, and experiment recipes.

Every command takes an optional JSON config (--config) plus flag overrides;
flags win, and the merged effective config is written next to the outputs.
Exit codes: 0 ok, 2 config error, 3 training diverged, 4 missing or
incompatible artifact, 5 expert gate failure, 6 refusing to overwrite.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import config as cfg
from .benchmark import bench_controller, bench_instantiation
from .data import generate_dataset, load_dataset, save_dataset, split_tasks
from .envs import TaskSpec
from .errors import (ArtifactError, ConfigError, ExpertGateError, InputError,
                     MissingPromptError, ShapeError, TrainingDivergedError)
from .evaluation import FixedControllerSource, evaluate, split_labels
from .experiments import EXPERIMENTS, run_experiment
from .serialize import load_controller, load_model, save_checkpoint, save_controller

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_ARTIFACT = 4
EXIT_GATE = 5
EXIT_REFUSED = 6


class _Refused(Exception):
    pass


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, _Refused):
        return EXIT_REFUSED
    if isinstance(exc, ExpertGateError):
        return EXIT_GATE
    if isinstance(exc, TrainingDivergedError):
        return EXIT_DIVERGED
    if isinstance(exc, ArtifactError):
        return EXIT_ARTIFACT
    if isinstance(exc, (ConfigError, InputError, ShapeError, MissingPromptError)):
        return EXIT_CONFIG
    raise exc


def _command(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except Exception as exc:  # map package errors onto documented codes
            code = _exit_code(exc)
            click.echo(f"error: {exc}", err=True)
            sys.exit(code)
    return wrapper


def _load(config_path, overrides):
    return cfg.load_config(config_path, overrides)


def _overrides(**pairs) -> dict:
    """Drop unset flags, build the nested override dict."""
    out: dict = {}
    for dotted, value in pairs.items():
        if value is None:
            continue
        node = out
        *parents, last = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[last] = value
    return out


@click.group()
def main():
    """Compile natural-language task descriptions into compact controllers."""


@main.command("config-schema")
def config_schema():
    """Print the JSON schema every config is validated against."""
    click.echo(json.dumps(cfg.SCHEMA, sort_keys=True, indent=2))


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--family", default=None)
@click.option("--task-count", type=int, default=None)
@click.option("--k", type=int, default=None)
@click.option("--m", type=int, default=None)
@click.option("--levels", default=None, help="comma-separated, e.g. L0,L1")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--force", is_flag=True, default=False)
@_command
def gen(config_path, family, task_count, k, m, levels, seed, out_dir, force):
    """Generate an offline demonstration dataset for one task family."""
    config = _load(config_path, _overrides(**{
        "family": family, "task_count": task_count,
        "data.k": k, "data.m": m, "data.seed": seed,
        "data.levels": levels.split(",") if levels else None,
    }))
    out = Path(out_dir)
    if (out / "manifest.json").exists() and not force:
        raise _Refused(f"{out} already holds a dataset; pass --force to regenerate")
    registry = cfg.build_registry(config)
    dataset = generate_dataset(
        registry, k=config["data"]["k"], m=config["data"]["m"],
        levels=tuple(config["data"]["levels"]), seed=config["data"]["seed"])
    save_dataset(dataset, out, force=True)
    cfg.write_effective_config(config, out)
    click.echo(f"wrote dataset: {len(registry)} tasks x {dataset.k} demonstrations -> {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--kind", default=None)
@click.option("--variant", default=None)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--train-on", default=None, type=click.Choice(["train", "all"]))
@click.option("--resume", "resume_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_command
def train(config_path, dataset_dir, kind, variant, steps, seed, train_on,
          resume_path, out_dir):
    """Train a model offline on a generated dataset."""
    config = _load(config_path, _overrides(**{
        "model.kind": kind, "model.variant": variant, "model.steps": steps,
        "model.seed": seed, "train_on": train_on,
    }))
    dataset = load_dataset(dataset_dir)
    if dataset.family != config["family"].rstrip("0123456789"):
        # family aliases carry sizes (switchworld10); compare the stem
        stem = config["family"].rstrip("0123456789")
        if dataset.family != stem:
            raise ArtifactError(
                f"dataset family {dataset.family!r} does not match config family "
                f"{config['family']!r}")
    if config["train_on"] == "train":
        train_tasks, _ = split_tasks(dataset.tasks,
                                     config["split"]["holdout_fraction"],
                                     config["split"]["seed"])
        fit_data = dataset.subset(train_tasks)
    else:
        fit_data = dataset
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if resume_path:
        model = load_model(resume_path)
        model.resume_fit(fit_data)
    else:
        model = cfg.build_model(config)
        model.fit(fit_data)
    ckpt = out / "checkpoint.bin"
    save_checkpoint(model, ckpt, config_hash=cfg.config_hash(config),
                    registry_fingerprint=_fingerprint(fit_data))
    _write_loss_curve(model, out / "loss_curve.csv")
    cfg.write_effective_config(config, out)
    click.echo(f"trained {config['model']['kind']} for {model.n_steps_done_} steps -> {ckpt}")


def _fingerprint(dataset) -> str:
    from .envs import registry_fingerprint
    return registry_fingerprint(dataset.tasks)


def _write_loss_curve(model, path: Path) -> None:
    history = getattr(model, "loss_history_", [])
    if not history:
        path.write_text("step,total\n", encoding="utf-8")
        return
    fields = list(history[0])
    lines = [",".join(fields)]
    lines += [",".join(f"{row[f]:.10g}" if f != "step" else str(row[f]) for f in fields)
              for row in history]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _select_tasks(dataset, config, split: str):
    if split == "all":
        return dataset.tasks, {t.task_id: "all" for t in dataset.tasks}
    train_tasks, test_tasks = split_tasks(dataset.tasks,
                                          config["split"]["holdout_fraction"],
                                          config["split"]["seed"])
    labels = split_labels(train_tasks, test_tasks)
    if split == "train":
        return train_tasks, labels
    if split == "test":
        return test_tasks, labels
    raise ConfigError(f"unknown split {split!r}")


@main.command("eval")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None)
@click.option("--controller", "controller_path", type=click.Path(), default=None)
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--split", default="all", type=click.Choice(["train", "test", "all"]))
@click.option("--task-id", default=None, help="restrict to one task")
@click.option("--rollouts", type=int, default=None)
@click.option("--seeds", default=None, help="comma-separated eval seeds")
@click.option("--level", default=None, type=click.Choice(["L0", "L1", "L2"]))
@click.option("--prompts", default="dataset",
              type=click.Choice(["dataset", "shuffled", "none"]))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_command
def eval_cmd(config_path, checkpoint_path, controller_path, dataset_dir, split,
             task_id, rollouts, seeds, level, prompts, out_dir):
    """Evaluate a checkpoint or standalone controller with seeded rollouts."""
    if (checkpoint_path is None) == (controller_path is None):
        raise ConfigError("pass exactly one of --checkpoint or --controller")
    config = _load(config_path, _overrides(**{
        "eval.n_rollouts": rollouts, "eval.level": level,
        "eval.seeds": [int(s) for s in seeds.split(",")] if seeds else None,
    }))
    dataset = load_dataset(dataset_dir)
    tasks, labels = _select_tasks(dataset, config, split)
    if task_id is not None:
        tasks = [t for t in tasks if t.task_id == task_id]
        if not tasks:
            raise ConfigError(f"task {task_id!r} not in the selected split")
    source = _policy_source(checkpoint_path, controller_path, dataset, config, prompts)
    out = Path(out_dir)
    for eval_seed in config["eval"]["seeds"]:
        report = evaluate(source, tasks, n_rollouts=config["eval"]["n_rollouts"],
                          seed=eval_seed, split_of=labels,
                          config_hash=cfg.config_hash(config))
        report.save(out, stem=f"eval_report_seed{eval_seed}")
        click.echo(f"seed {eval_seed}: success "
                   + " ".join(f"{k}={v['success_rate']:.3f}"
                              for k, v in sorted(report.aggregates.items())))
    cfg.write_effective_config(config, out)


def _policy_source(checkpoint_path, controller_path, dataset, config, prompts):
    if controller_path is not None:
        params, _ = load_controller(controller_path)
        return FixedControllerSource(params)
    model = load_model(checkpoint_path)
    if hasattr(model, "policy_from_prompt"):
        if prompts == "none":
            return model.policy_source(None)
        mapping = {t.task_id: dataset.per_task[t.task_id].trajectories[0]
                   for t in dataset.tasks}
        if prompts == "shuffled":
            ids = [t.task_id for t in dataset.tasks]
            mapping = {ids[i]: dataset.per_task[ids[(i + 1) % len(ids)]].trajectories[0]
                       for i in range(len(ids))}
        return model.policy_source(mapping)
    if hasattr(model, "instantiate"):
        return model.policy_source(level=config["eval"]["level"])
    return model.policy_source()


@main.command()
@click.option("--controller", "controller_path", type=click.Path(), required=True)
@click.option("--iterations", type=int, default=100_000)
@click.option("--precision", default="f64", type=click.Choice(["f64", "f32"]))
@click.option("--out", "out_path", type=click.Path(), required=True)
@_command
def bench(controller_path, iterations, precision, out_path):
    """Benchmark a standalone controller's forward-pass latency."""
    params, _ = load_controller(controller_path)
    report = bench_controller(params, iterations=iterations, precision=precision)
    report.save(out_path)
    click.echo(f"{report.param_count} params, {precision}: "
               f"median {report.median_latency_s * 1e6:.1f} us  "
               f"({report.hz:.0f} Hz sustained)")


@main.command()
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--text", required=True)
@click.option("--controller-out", type=click.Path(), default=None)
@_command
def instantiate(checkpoint_path, text, controller_out):
    """Instantiate a controller from a task description and summarize it."""
    model = load_model(checkpoint_path)
    if not hasattr(model, "instantiate"):
        raise ConfigError("this checkpoint kind does not instantiate from text")
    params = model.instantiate(text)
    latency = bench_instantiation(model, text)
    click.echo(f"description: {text!r}")
    click.echo(f"controller: {params.manifest.param_count} parameters, "
               f"layers {[l.name for l in params.manifest.layers]}")
    click.echo(f"instantiation latency: {latency * 1e3:.3f} ms (median of 100)")
    click.echo(f"weight stats: |w|_max={np.abs(params.values).max():.4f} "
               f"mean={params.values.mean():+.5f}")
    if controller_out:
        save_controller(params, controller_out, meta={"description": text})
        click.echo(f"controller written -> {controller_out}")


@main.command()
@click.argument("name", type=click.Choice(sorted(EXPERIMENTS)))
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_command
def experiment(name, config_path, out_dir):
    """Run a full multi-training experiment recipe end to end."""
    config = _load(config_path, {})
    payload = run_experiment(name, config, out_dir)
    cfg.write_effective_config(config, out_dir)
    click.echo(json.dumps(payload["rows"], indent=2))


if __name__ == "__main__":
    main()
