"""The text-to-controller model.

A projection network maps frozen text embeddings into a small conditioning
space; a hypernetwork maps the conditioning vector to the full flat parameter
vector of a compact control policy.  Training is offline behavior cloning on
expert demonstrations, optionally combined with grounding losses that align
projected text embeddings with trajectory-encoder embeddings.  At inference a
policy is instantiated from text alone; no demonstrations are consumed.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import autodiff as ad
from . import losses
from .data import OfflineDataset
from .descriptions import canonical_description, sample_description
from .envs import Trajectory
from .errors import ConfigError, InputError, ShapeError, TrainingDivergedError
from .nets import (Manifest, ParamVec, generated_apply, init_params, mlp_apply,
                   mlp_forward, mlp_manifest, policy_manifest, pooled_apply,
                   pooled_forward)
from .optim import Adam
from .seeding import derive_rng
from .text import HashEmbedder, check_injective
from .validation import check_embedding_dim, check_fitted

VARIANTS = ("direct", "mse", "contrastive")

TRAJ_POOL_AFTER = 1  # featurizer layer count before the mean pool
# Shrinking the generator's output layer at init (e.g. 1/100) looks like a
# stabilizer but traps the generated tanh policies in their flat near-zero
# region; relay-style experts then never get cloned.  Plain fan-based init
# is stable here and fits them.
HYPER_OUT_SCALE = 1.0


def transition_rows(traj: Trajectory) -> np.ndarray:
    """(T, 2s+a+1) array of concatenated (state, action, reward, next_state)."""
    if len(traj) == 0:
        raise InputError("cannot featurize an empty trajectory")
    return np.asarray(
        [np.concatenate([t.state, t.action, [t.reward], t.next_state])
         for t in traj.transitions],
        dtype=np.float64,
    )


def build_manifests(text_dim, cond_dim, proj_hidden, hyper_hidden, policy_hidden,
                    traj_hidden, state_dim, action_dim, feature_dim):
    policy = policy_manifest(state_dim, action_dim, policy_hidden)
    proj = mlp_manifest("proj", text_dim, proj_hidden, cond_dim)
    hyper = mlp_manifest("hyper", cond_dim, hyper_hidden, policy.param_count)
    traj = mlp_manifest("traj", feature_dim, (traj_hidden, traj_hidden), cond_dim)
    return proj, hyper, traj, policy


def trainable_count(state_dim: int, action_dim: int, feature_dim: int,
                    text_dim: int = 256, cond_dim: int = 64,
                    proj_hidden=(128,), hyper_hidden=(256, 256),
                    policy_hidden=(64, 64), traj_hidden: int = 64) -> int:
    """Total trainable parameters of the default model for given task dims.

    Baselines match their budgets against this so capacity comparisons stay
    fair.
    """
    proj, hyper, traj, _ = build_manifests(
        text_dim, cond_dim, proj_hidden, hyper_hidden, policy_hidden,
        traj_hidden, state_dim, action_dim, feature_dim)
    return proj.param_count + hyper.param_count + traj.param_count


class TeNet(BaseEstimator):
    """Text-conditioned hypernetwork policy generator (sklearn-style).

    Parameters
    ----------
    variant : 'direct', 'mse', or 'contrastive'
        Grounding mode: none, squared-distance alignment, or the symmetric
        InfoNCE plus text-text contrastive pair.
    grounding_weight : float
        Weight of the grounding term in the total loss.
    temperature : float
        Softmax temperature for the contrastive losses.
    batch_tasks : int
        Tasks per training step (capped by the number of train tasks); each
        contributes one description, one trajectory, and ``bc_samples``
        cloning transitions.
    provider : optional text-embedding provider
        Defaults to the built-in feature-hash embedder at ``text_dim``.
    """

    def __init__(self, variant="contrastive", text_dim=256, cond_dim=64,
                 proj_hidden=(128,), hyper_hidden=(256, 256), policy_hidden=(64, 64),
                 traj_hidden=64, temperature=0.1, grounding_weight=1.0,
                 learning_rate=3e-4, steps=20000, batch_tasks=32, bc_samples=16,
                 paraphrase_positive=False, provider=None, seed=0, log_every=100):
        self.variant = variant
        self.text_dim = text_dim
        self.cond_dim = cond_dim
        self.proj_hidden = proj_hidden
        self.hyper_hidden = hyper_hidden
        self.policy_hidden = policy_hidden
        self.traj_hidden = traj_hidden
        self.temperature = temperature
        self.grounding_weight = grounding_weight
        self.learning_rate = learning_rate
        self.steps = steps
        self.batch_tasks = batch_tasks
        self.bc_samples = bc_samples
        self.paraphrase_positive = paraphrase_positive
        self.provider = provider
        self.seed = seed
        self.log_every = log_every

    # ------------------------------------------------------------------ setup

    def _validate_config(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.grounding_weight < 0:
            raise ConfigError("grounding_weight must be non-negative")
        if self.steps < 0 or self.batch_tasks < 1 or self.bc_samples < 1:
            raise ConfigError("steps, batch_tasks and bc_samples must be sensible")

    def _resolve_provider(self):
        provider = self.provider if self.provider is not None else HashEmbedder(self.text_dim)
        check_embedding_dim(provider, self.text_dim)
        return provider

    @property
    def _input_scale(self) -> float:
        # normalized embeddings spread unit mass across text_dim coordinates;
        # without this gain the projection's first-layer activations are tiny
        # and per-task conditioning signals train orders of magnitude slower
        return float(np.sqrt(self.text_dim))

    def _prepare(self, dataset: OfflineDataset):
        self._validate_config()
        self.provider_ = self._resolve_provider()
        tasks = dataset.tasks
        check_injective(self.provider_, [canonical_description(t) for t in tasks])
        self.family_ = dataset.family
        self.state_dim_ = dataset.state_dim
        self.action_dim_ = dataset.action_dim
        self.feature_dim_ = dataset.transition_feature_dim()
        (self.proj_manifest_, self.hyper_manifest_,
         self.traj_manifest_, self.policy_manifest_) = build_manifests(
            self.text_dim, self.cond_dim, self.proj_hidden, self.hyper_hidden,
            self.policy_hidden, self.traj_hidden,
            self.state_dim_, self.action_dim_, self.feature_dim_)
        self.task_ids_ = dataset.task_ids()
        n = len(tasks)
        if self.variant != "direct" and min(self.batch_tasks, n) < 2:
            raise ConfigError("grounded variants need batches of at least 2 tasks")

        # dense training arrays; text embeddings are pre-scaled (see project)
        emb = []
        for task in tasks:
            td = dataset.per_task[task.task_id]
            texts = [d for level in dataset.levels for d in td.descriptions[level]]
            emb.append(np.stack([self.provider_.embed(t) for t in texts]))
        self._desc_emb = np.stack(emb) * self._input_scale  # (n, n_desc, text_dim)
        self._traj_feats = np.stack(
            [dataset.trajectory_features(t.task_id) for t in tasks])  # (n, K, T, f)
        pools = [dataset.bc_pool(t.task_id) for t in tasks]
        self._bc_states = np.stack([p[0] for p in pools])   # (n, N, s)
        self._bc_actions = np.stack([p[1] for p in pools])  # (n, N, a)

        self._slices = {}
        offset = 0
        for name, manifest in (("proj", self.proj_manifest_),
                               ("hyper", self.hyper_manifest_),
                               ("traj", self.traj_manifest_)):
            self._slices[name] = slice(offset, offset + manifest.param_count)
            offset += manifest.param_count
        self._n_trainable = offset

    def _init_weights(self) -> np.ndarray:
        w = np.empty(self._n_trainable, dtype=np.float64)
        rng = derive_rng(self.seed, "init")
        w[self._slices["proj"]] = init_params(self.proj_manifest_, rng)
        w[self._slices["hyper"]] = init_params(self.hyper_manifest_, rng,
                                               last_layer_scale=HYPER_OUT_SCALE)
        w[self._slices["traj"]] = init_params(self.traj_manifest_, rng)
        return w

    # ----------------------------------------------------------------- batches

    def _batch(self, step: int) -> dict:
        rng = derive_rng(self.seed, "batch", step)
        n = len(self.task_ids_)
        b = min(self.batch_tasks, n)
        idx = rng.choice(n, size=b, replace=False)
        # every stream is drawn for every variant so that variants with the
        # same seed see identical batches (needed for the grounding_weight=0
        # equivalence guarantee)
        desc_j = rng.integers(0, self._desc_emb.shape[1], size=b)
        desc_j2 = rng.integers(0, self._desc_emb.shape[1], size=b)
        traj_j = rng.integers(0, self._traj_feats.shape[1], size=b)
        bc_j = rng.integers(0, self._bc_states.shape[1], size=(b, self.bc_samples))
        rows = np.arange(b)[:, None]
        return {
            "text": self._desc_emb[idx, desc_j],
            "text_alt": self._desc_emb[idx, desc_j2],
            "traj": self._traj_feats[idx, traj_j],
            "states": self._bc_states[idx][rows, bc_j],
            "actions": self._bc_actions[idx][rows, bc_j],
        }

    # ------------------------------------------------------------------- loss

    def _loss_graph(self, w_node: ad.Node, batch: dict):
        proj_flat = ad.take(w_node, (self._slices["proj"],))
        hyper_flat = ad.take(w_node, (self._slices["hyper"],))
        z_text = mlp_apply(proj_flat, self.proj_manifest_, batch["text"])
        theta = mlp_apply(hyper_flat, self.hyper_manifest_, z_text)
        pred = generated_apply(theta, self.policy_manifest_, batch["states"])
        bc = losses.action_mse(pred, batch["actions"])

        terms = {"bc": bc}
        if self.variant == "mse":
            traj_flat = ad.take(w_node, (self._slices["traj"],))
            z_traj = pooled_apply(traj_flat, self.traj_manifest_, TRAJ_POOL_AFTER,
                                  batch["traj"])
            terms["align"] = losses.embedding_alignment(z_text, z_traj)
            ground = terms["align"]
        elif self.variant == "contrastive":
            traj_flat = ad.take(w_node, (self._slices["traj"],))
            z_traj = pooled_apply(traj_flat, self.traj_manifest_, TRAJ_POOL_AFTER,
                                  batch["traj"])
            terms["text_traj"] = losses.symmetric_infonce(z_text, z_traj,
                                                          self.temperature)
            if self.paraphrase_positive:
                z_alt = mlp_apply(proj_flat, self.proj_manifest_, batch["text_alt"])
                terms["text_text"] = losses.text_contrast(z_text, self.temperature,
                                                          paraphrase_emb=z_alt)
            else:
                terms["text_text"] = losses.text_contrast(z_text, self.temperature)
            ground = ad.add(terms["text_traj"], terms["text_text"])
        else:
            ground = None

        total = bc if ground is None else ad.add(bc, ad.mul(ground, self.grounding_weight))
        return total, terms

    def _breakdown_row(self, step, total, terms) -> dict:
        row = {"step": step, "total": float(total.value),
               "bc": 0.0, "align": 0.0, "text_traj": 0.0, "text_text": 0.0}
        for name, node in terms.items():
            row[name] = float(node.value)
        return row

    def loss_breakdown(self, step: int = 0) -> dict:
        """Per-term loss values on the seeded batch for ``step`` (no update)."""
        check_fitted(self, "w_")
        total, terms = self._loss_graph(ad.Node(self.w_), self._batch(step))
        return self._breakdown_row(step, total, terms)

    # ------------------------------------------------------------------- fit

    def fit(self, dataset: OfflineDataset, y=None):
        """Train on an offline dataset of demonstrations and descriptions."""
        self._prepare(dataset)
        self.w_ = self._init_weights()
        self.adam_ = Adam(self._n_trainable, lr=self.learning_rate)
        self.loss_history_ = []
        self.n_steps_done_ = 0
        self._run_steps(self.steps)
        return self

    def resume_fit(self, dataset: OfflineDataset):
        """Continue a loaded checkpoint up to ``self.steps`` total steps."""
        check_fitted(self, "w_")
        self._prepare(dataset)
        if self.w_.shape[0] != self._n_trainable:
            raise ShapeError("checkpoint does not match this dataset's dimensions")
        self._run_steps(self.steps - self.n_steps_done_)
        return self

    def _run_steps(self, n_steps: int):
        last_good = (self.n_steps_done_, self.w_.copy())
        for _ in range(max(n_steps, 0)):
            step = self.n_steps_done_
            batch = self._batch(step)
            w_node = ad.Node(self.w_)
            try:
                total, terms = self._loss_graph(w_node, batch)
                ad.backward(total)
            except Exception as exc:
                from .errors import NumericError
                if isinstance(exc, NumericError):
                    self.w_ = last_good[1]
                    self.n_steps_done_ = last_good[0]
                    raise TrainingDivergedError(step, self) from exc
                raise
            if step % self.log_every == 0:
                self.loss_history_.append(self._breakdown_row(step, total, terms))
                last_good = (step, self.w_.copy())
            grad = w_node.grad
            if grad is None or not np.all(np.isfinite(grad)):
                self.w_ = last_good[1]
                self.n_steps_done_ = last_good[0]
                raise TrainingDivergedError(step, self)
            self.w_ = self.adam_.step(self.w_, grad)
            self.n_steps_done_ += 1
        self.final_loss_ = self.loss_history_[-1]["total"] if self.loss_history_ else None

    # -------------------------------------------------------------- inference

    def _component(self, name: str) -> ParamVec:
        check_fitted(self, "w_")
        manifest = {"proj": self.proj_manifest_, "hyper": self.hyper_manifest_,
                    "traj": self.traj_manifest_}[name]
        return ParamVec(self.w_[self._slices[name]], manifest)

    def project(self, text_embedding: np.ndarray) -> np.ndarray:
        """Map a raw text embedding into the conditioning space."""
        z = np.asarray(text_embedding, dtype=np.float64)
        if z.shape[-1] != self.text_dim:
            raise ShapeError(f"expected embeddings of dim {self.text_dim}, got {z.shape[-1]}")
        return mlp_forward(self._component("proj"), z * self._input_scale)

    def generate_policy(self, conditioning: np.ndarray) -> ParamVec:
        """Emit a full policy parameter vector from a conditioning vector."""
        theta = mlp_forward(self._component("hyper"), np.asarray(conditioning))
        return ParamVec(theta, self.policy_manifest_)

    def encode_trajectory(self, traj: Trajectory) -> np.ndarray:
        """Embed one demonstration via the permutation-invariant encoder."""
        return pooled_forward(self._component("traj"), TRAJ_POOL_AFTER,
                              transition_rows(traj))

    def instantiate(self, text: str) -> ParamVec:
        """text -> embedding -> conditioning -> generated controller."""
        check_fitted(self, "w_")
        z = self.provider_.embed(text)
        return self.generate_policy(self.project(z))

    def predict(self, texts) -> np.ndarray:
        """Generated flat parameter vectors for a list of descriptions."""
        if isinstance(texts, str):
            raise InputError("predict takes a sequence of descriptions; "
                             "use instantiate() for a single one")
        return np.stack([self.instantiate(t).values for t in texts])

    def policy_source(self, level: str = "L0", desc_seed: int = 0):
        """Per-task policy factory for the evaluation harness."""
        from .evaluation import InstantiatingPolicySource
        return InstantiatingPolicySource(self, level=level, desc_seed=desc_seed)

    def description_for(self, task, level: str = "L0", desc_seed: int = 0) -> str:
        if level == "L0":
            return canonical_description(task)
        rng = derive_rng(desc_seed, task.task_id, level, "eval")
        return sample_description(task, level, rng)
