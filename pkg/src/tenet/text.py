"""Text embedding providers standing in for a frozen language-model encoder.

The default provider is a deterministic feature-hash embedder: word tokens are
signed-hashed into the leading block (two hash functions per token), which is
then L2-normalized; up to two numeric literals get eight dedicated trailing
channels each, encoded with a linear term and multi-frequency sinusoids so a
continuous task parameter conditions the model smoothly.  A file-backed table
provider serves precomputed embeddings by exact text match.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .errors import EmbeddingLookupError, InputError, ShapeError, TableLoadError

DEFAULT_DIM = 256
NUMERIC_SLOTS = 2
NUMERIC_CHANNELS = 8

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.\d+|\d+)")
_WORD_RE = re.compile(r"[a-z0-9]+")


def extract_numeric_literals(text: str) -> list[float]:
    """Decimal literals in textual order, parsed as floats."""
    return [float(m) for m in _NUMBER_RE.findall(text)]


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric word tokens, numeric literals removed."""
    stripped = _NUMBER_RE.sub(" ", text.lower())
    return _WORD_RE.findall(stripped)


def _token_buckets(token: str, n_buckets: int) -> list[tuple[int, float]]:
    """Two signed hash assignments per token, stable across processes."""
    out = []
    for salt in (b"a", b"b"):
        digest = hashlib.blake2b(token.encode(), digest_size=8, salt=salt).digest()
        value = int.from_bytes(digest, "little")
        out.append((value % n_buckets, 1.0 if (value >> 63) & 1 else -1.0))
    return out


# Sinusoid periods 16/8/4 cover the supported literal range (|v| <= 4 for
# velocities, |v| <= 1 for coordinates) without wrapping: distinct values in
# range never collide, so conditioning stays monotone beyond the training
# grid instead of aliasing an out-of-range command onto a small one.
_NUMERIC_BASE_FREQ = np.pi / 8.0


def _numeric_channels(v: float) -> np.ndarray:
    w = _NUMERIC_BASE_FREQ * v
    return np.array([
        v / 4.0,
        np.sin(w), np.cos(w),
        np.sin(2.0 * w), np.cos(2.0 * w),
        np.sin(4.0 * w), np.cos(4.0 * w),
        1.0,
    ], dtype=np.float64)


class HashEmbedder:
    """Deterministic bag-of-hashed-words embedder with numeric channels."""

    source = "hash"

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim <= NUMERIC_SLOTS * NUMERIC_CHANNELS:
            raise ShapeError(f"dim must exceed {NUMERIC_SLOTS * NUMERIC_CHANNELS}")
        self.dim = dim
        self._word_dim = dim - NUMERIC_SLOTS * NUMERIC_CHANNELS

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise InputError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokenize(text):
            for bucket, sign in _token_buckets(token, self._word_dim):
                vec[bucket] += sign
        norm = np.linalg.norm(vec[: self._word_dim])
        if norm > 0.0:
            vec[: self._word_dim] /= norm
        for slot, literal in enumerate(extract_numeric_literals(text)[:NUMERIC_SLOTS]):
            start = self._word_dim + slot * NUMERIC_CHANNELS
            vec[start: start + NUMERIC_CHANNELS] = _numeric_channels(literal)
        return vec


def _normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


class TableEmbedder:
    """Exact-match lookup over precomputed embeddings; no silent fallback."""

    source = "table"

    def __init__(self, entries: dict[str, np.ndarray], dim: int):
        self._entries = entries
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        key = _normalize_whitespace(text)
        hit = self._entries.get(key)
        if hit is None:
            raise EmbeddingLookupError(f"no embedding stored for text: {text!r}")
        return hit.copy()

    def __len__(self):
        return len(self._entries)


def load_embedding_table(path: str | Path) -> TableEmbedder:
    """Load a newline-delimited JSON embedding table.

    The first record is a header ``{"version": 1, "dim": d}``; every following
    record is ``{"text": ..., "embedding": [...]}``.  Inconsistent dimensions
    or conflicting duplicate texts are load errors.
    """
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TableLoadError(f"{path}:{line_no + 1}: invalid JSON: {exc}") from exc
            if line_no == 0:
                if "version" not in record:
                    raise TableLoadError(f"{path}: missing header record with version field")
                dim = record.get("dim")
                continue
            text = record.get("text")
            emb = record.get("embedding")
            if not isinstance(text, str) or emb is None:
                raise TableLoadError(f"{path}:{line_no + 1}: record needs text and embedding")
            vec = np.asarray(emb, dtype=np.float64)
            if vec.ndim != 1:
                raise TableLoadError(f"{path}:{line_no + 1}: embedding must be a flat list")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise TableLoadError(
                    f"{path}:{line_no + 1}: dimension {vec.shape[0]} != table dimension {dim}"
                )
            key = _normalize_whitespace(text)
            if key in entries and not np.array_equal(entries[key], vec):
                raise TableLoadError(f"{path}:{line_no + 1}: conflicting duplicate entry {text!r}")
            entries[key] = vec
    if dim is None or not entries:
        raise TableLoadError(f"{path}: table holds no embedding records")
    return TableEmbedder(entries, int(dim))


def write_embedding_table(path: str | Path, records: dict[str, np.ndarray]) -> None:
    """Write a table in the format ``load_embedding_table`` reads."""
    dims = {v.shape[0] for v in records.values()}
    if len(dims) > 1:
        raise TableLoadError(f"mixed embedding dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"version": 1, "dim": dim}) + "\n")
        for text in sorted(records):
            row = {"text": text, "embedding": [float(x) for x in records[text]]}
            fh.write(json.dumps(row) + "\n")


def check_injective(provider, texts) -> None:
    """Reject providers that collapse two distinct texts onto one embedding."""
    seen: dict[bytes, str] = {}
    for text in texts:
        key = provider.embed(text).tobytes()
        other = seen.get(key)
        if other is not None and other != text:
            raise InputError(f"embedding collision between {other!r} and {text!r}")
        seen[key] = text
