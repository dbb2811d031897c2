"""Text-to-controller policy synthesis.

A natural-language task description is embedded, projected into a small
conditioning space, and fed to a hypernetwork that emits the full parameter
vector of a compact state-to-action controller.  Training is offline behavior
cloning on scripted-expert demonstrations over synthetic language-augmented
control tasks, with optional losses that ground the text embeddings in
demonstrated behavior.
"""

from .baselines import (PromptConcatPolicy, SharedPolicyBC, TrajectoryHypernet,
                        train_baseline)
from .benchmark import BenchReport, bench_controller
from .data import OfflineDataset, generate_dataset, load_dataset, save_dataset, split_tasks
from .descriptions import canonical_description, sample_description
from .envs import Env, TaskSpec, Trajectory, Transition, success, task_registry
from .evaluation import EvalReport, evaluate, paraphrase_eval, velocity_alignment
from .experiments import run_experiment
from .models import TeNet
from .nets import CompiledPolicy, Manifest, ParamVec, mlp_forward, policy_manifest
from .optim import Adam
from .serialize import load_controller, load_model, save_checkpoint, save_controller
from .text import HashEmbedder, extract_numeric_literals, load_embedding_table

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BenchReport",
    "CompiledPolicy",
    "Env",
    "EvalReport",
    "HashEmbedder",
    "Manifest",
    "OfflineDataset",
    "ParamVec",
    "PromptConcatPolicy",
    "SharedPolicyBC",
    "TaskSpec",
    "TeNet",
    "Trajectory",
    "TrajectoryHypernet",
    "Transition",
    "bench_controller",
    "canonical_description",
    "evaluate",
    "extract_numeric_literals",
    "generate_dataset",
    "load_controller",
    "load_dataset",
    "load_embedding_table",
    "load_model",
    "mlp_forward",
    "paraphrase_eval",
    "policy_manifest",
    "run_experiment",
    "sample_description",
    "save_checkpoint",
    "save_controller",
    "save_dataset",
    "split_tasks",
    "success",
    "task_registry",
    "train_baseline",
    "velocity_alignment",
]
