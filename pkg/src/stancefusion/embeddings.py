"""Sentence-embedding stores and the two neural comparison features.

Embeddings are consumed, never trained: vectors arrive via file keyed by
normalized text, or from a deterministic fallback embedder that keeps the
pipeline runnable without the external encoder. The two neural features of
a pair are the component-wise product and the element-wise absolute
difference of the body and headline embeddings.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .text import normalize

DEFAULT_DIMENSION = 4800
BINARY_MAGIC = b"STVEC1"
TEXT_MAGIC = "STVEC-TXT"


class EmbeddingFormatError(ValueError):
    """Embedding store file does not match either supported layout."""


class MissingEmbeddingError(KeyError):
    """A text key has no stored embedding (and no fallback is configured)."""


@dataclass
class EmbeddingStore:
    """Immutable map from normalized text keys to fixed-dimension vectors."""

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    source: str = "file"

    def embed(self, text: str) -> np.ndarray:
        key = normalize(text)
        try:
            return self.entries[key]
        except KeyError:
            raise MissingEmbeddingError(key) from None

    def __len__(self) -> int:
        return len(self.entries)


def _check_record(key, vec, dimension, entries, path):
    if key in entries:
        raise EmbeddingFormatError(f"{path}: duplicate key {key!r}")
    if vec.shape != (dimension,):
        raise EmbeddingFormatError(
            f"{path}: record {key!r} has dimension {vec.shape[0]}, store declares {dimension}"
        )
    if not np.all(np.isfinite(vec)):
        raise EmbeddingFormatError(f"{path}: record {key!r} contains a non-finite value")


def _load_binary(path) -> EmbeddingStore:
    data = Path(path).read_bytes()
    offset = len(BINARY_MAGIC)
    try:
        count, dimension = struct.unpack_from("<II", data, offset)
    except struct.error:
        raise EmbeddingFormatError(f"{path}: truncated header") from None
    offset += 8
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        try:
            (key_len,) = struct.unpack_from("<I", data, offset)
        except struct.error:
            raise EmbeddingFormatError(f"{path}: truncated record header") from None
        offset += 4
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        need = 4 * dimension
        if offset + need > len(data):
            raise EmbeddingFormatError(f"{path}: record {key!r} is truncated")
        vec = np.frombuffer(data, dtype="<f4", count=dimension, offset=offset).astype(np.float64)
        offset += need
        _check_record(key, vec, dimension, entries, path)
        entries[key] = vec
    if offset != len(data):
        raise EmbeddingFormatError(f"{path}: trailing bytes after the final record")
    return EmbeddingStore(dimension=dimension, entries=entries, source="file")


def _load_text(path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split("\t")
    if len(header) != 2 or header[0] != TEXT_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad header {lines[0]!r}")
    dimension = int(header[1])
    entries: dict[str, np.ndarray] = {}
    for line in lines[1:]:
        if not line:
            continue
        key, _, rest = line.partition("\t")
        values = rest.split()
        if len(values) != dimension:
            raise EmbeddingFormatError(
                f"{path}: record {key!r} has dimension {len(values)}, store declares {dimension}"
            )
        vec = np.array([float(v) for v in values], dtype=np.float64)
        _check_record(key, vec, dimension, entries, path)
        entries[key] = vec
    return EmbeddingStore(dimension=dimension, entries=entries, source="file")


def load_embeddings(path) -> EmbeddingStore:
    """Load a store, auto-detecting the binary or text layout from its magic."""
    with open(path, "rb") as fh:
        head = fh.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return _load_binary(path)
    if head.startswith(TEXT_MAGIC.encode("utf-8")[: len(head)]) and head:
        return _load_text(path)
    raise EmbeddingFormatError(f"{path}: unrecognized magic {head!r}")


def write_embeddings_binary(store: EmbeddingStore, path) -> None:
    """Binary layout: magic, u32 count, u32 dim, then per record
    u32 key byte-length, UTF-8 key, dim little-endian f32 values."""
    chunks = [BINARY_MAGIC, struct.pack("<II", len(store.entries), store.dimension)]
    for key, vec in store.entries.items():
        raw = key.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(np.asarray(vec, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def write_embeddings_text(store: EmbeddingStore, path) -> None:
    lines = [f"{TEXT_MAGIC}\t{store.dimension}"]
    for key, vec in store.entries.items():
        lines.append(key + "\t" + " ".join(repr(float(v)) for v in vec))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class FallbackEmbedder:
    """Deterministic hashed-random-projection sentence embedder.

    Each token gets a unit-norm pseudo-vector drawn from a PCG64 generator
    seeded by a stable hash of (seed, token); the sentence embedding is the
    L2-normalized sum. Identical across runs and platforms.
    """

    source = "fallback"

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = 0):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self.seed = seed
        self._token_vectors: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_vectors.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                f"{self.seed}:{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dimension)
            vec /= np.linalg.norm(vec)
            self._token_vectors[token] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        key = normalize(text)
        if not key:
            return np.zeros(self.dimension, dtype=np.float64)
        total = np.zeros(self.dimension, dtype=np.float64)
        for token in key.split(" "):
            total += self._token_vector(token)
        norm = np.linalg.norm(total)
        if norm == 0.0:
            return np.zeros(self.dimension, dtype=np.float64)
        return total / norm


def fallback_embed(text: str, dimension: int, seed: int) -> np.ndarray:
    """One-shot fallback embedding (see FallbackEmbedder)."""
    return FallbackEmbedder(dimension, seed).embed(text)


@dataclass
class NeuralFeatures:
    """Component-wise product and absolute difference of two embeddings."""

    feat1: np.ndarray
    feat2: np.ndarray


def neural_features(u: np.ndarray, v: np.ndarray) -> NeuralFeatures:
    """feat1[i] = u[i] * v[i]; feat2[i] = |u[i] - v[i]|. Symmetric in (u, v)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"embedding dimensions differ: {u.shape} vs {v.shape}")
    return NeuralFeatures(feat1=u * v, feat2=np.abs(u - v))


def neural_block(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Concatenated [feat1, feat2]; length 2D for D-dimensional embeddings."""
    feats = neural_features(u, v)
    return np.concatenate([feats.feat1, feats.feat2])
