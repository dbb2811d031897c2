"""Stable derived seeds so every sampling site is reproducible in isolation."""

from __future__ import annotations

import zlib

import numpy as np


def _tag(text: str) -> int:
    return zlib.crc32(text.encode())


def derive_seed(*parts) -> int:
    """Collapse mixed ints/strings into one 31-bit seed, stable across runs."""
    ints = tuple(_tag(p) if isinstance(p, str) else int(p) for p in parts)
    return int(np.random.SeedSequence(ints).generate_state(1)[0] % (2 ** 31))


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def episode_seed(base: int, task_id: str, rollout: int) -> int:
    return derive_seed(base, task_id, rollout)
