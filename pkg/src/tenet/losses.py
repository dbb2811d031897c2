"""Training loss heads, written as pure functions over autodiff nodes.

All contrastive losses use temperature-scaled cosine similarity with in-batch
candidates (one entry per task, positives included), and go through the fused
cross-entropy primitive so near-zero losses keep full float64 precision.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError


def _batch_size(x) -> int:
    v = ad.value_of(x)
    if v.ndim != 2:
        raise ShapeError(f"expected a (batch, dim) embedding matrix, got {v.shape}")
    return v.shape[0]


def action_mse(pred, target) -> ad.Node:
    """Mean squared error over every action coordinate in the batch."""
    return ad.nmean(ad.square(ad.sub(pred, target)))


def embedding_alignment(text_emb, traj_emb) -> ad.Node:
    """Mean over the batch of the squared L2 distance between paired rows."""
    b = _batch_size(text_emb)
    if _batch_size(traj_emb) != b:
        raise ShapeError("paired embedding batches differ in size")
    sq = ad.nsum(ad.square(ad.sub(text_emb, traj_emb)), axis=1)
    return ad.nmean(sq)


def symmetric_infonce(text_emb, traj_emb, temperature: float) -> ad.Node:
    """Symmetric cross-modal InfoNCE: text->trajectory and trajectory->text.

    Row i of each modality is the positive pair; every other in-batch row is
    a negative.  Both directions are averaged with weight 1/2.
    """
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    b = _batch_size(text_emb)
    if b < 2:
        raise ConfigError("contrastive losses need a batch of at least 2 tasks")
    sims = ad.cosine_matrix(text_emb, traj_emb)
    logits = ad.mul(sims, 1.0 / temperature)
    positives = np.arange(b)
    text_to_traj = ad.softmax_cross_entropy(logits, positives)
    traj_to_text = ad.softmax_cross_entropy(ad.transpose_last(logits), positives)
    return ad.mul(ad.add(ad.nmean(text_to_traj), ad.nmean(traj_to_text)), 0.5)


def text_contrast(text_emb, temperature: float, paraphrase_emb=None) -> ad.Node:
    """Push apart text embeddings of different tasks.

    The positive term is each row's self-similarity (identically 1), so the
    loss is purely repulsive over the batch.  With ``paraphrase_emb`` given,
    the self-similarity is replaced by similarity to a second description of
    the same task, making paraphrases explicit positives.
    """
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    b = _batch_size(text_emb)
    if b < 2:
        raise ConfigError("contrastive losses need a batch of at least 2 tasks")
    sims = ad.cosine_matrix(text_emb, text_emb)
    if paraphrase_emb is not None:
        pos = ad.nsum(
            ad.mul(ad.l2_normalize_rows(text_emb), ad.l2_normalize_rows(paraphrase_emb)),
            axis=1, keepdims=True,
        )
        eye = np.eye(b)
        sims = ad.add(ad.mul(sims, 1.0 - eye), ad.mul(pos, eye))
    logits = ad.mul(sims, 1.0 / temperature)
    return ad.nmean(ad.softmax_cross_entropy(logits, np.arange(b)))
