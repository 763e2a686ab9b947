"""Per-pair feature bundles: extraction, batch stacking and the binary cache.

A bundle carries up to three blocks per pair, in the fixed fusion order
neural, external, statistical. The cache file keeps one header describing
the enabled blocks and their widths, followed by fixed-layout records, so
re-running extraction on identical inputs reproduces identical bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import STANCE_INDEX, StancePair
from .embeddings import neural_block
from .external import PolarityLexicon, external_features
from .network import BRANCH_ORDER
from .statistical import Vocabulary, statistical_feature

CACHE_MAGIC = b"FNCFEAT1"
_UNLABELED_BYTE = 255


class CacheError(ValueError):
    """Feature cache file is malformed."""


@dataclass
class FeatureBundle:
    """Feature blocks for one headline-body pair; disabled blocks are None."""

    key: str
    neural: np.ndarray | None = None
    external: np.ndarray | None = None
    statistical: np.ndarray | None = None
    label: int | None = None

    def block(self, name: str) -> np.ndarray | None:
        return getattr(self, name)

    def enabled_blocks(self) -> tuple[str, ...]:
        return tuple(n for n in BRANCH_ORDER if self.block(n) is not None)

    def dims(self) -> dict[str, int]:
        return {n: int(self.block(n).shape[0]) for n in self.enabled_blocks()}


def pair_key(pair: StancePair) -> str:
    return f"{pair.body_id}::{pair.headline}"


def extract_bundle(
    pair: StancePair,
    branches: tuple[str, ...] = BRANCH_ORDER,
    vocab: Vocabulary | None = None,
    lexicon: PolarityLexicon | None = None,
    embedder=None,
) -> FeatureBundle:
    """Compute the requested blocks for one pair.

    The neural block concatenates the component-wise product and absolute
    difference of the body and headline embeddings, so its width is twice
    the embedder dimension.
    """
    unknown = set(branches) - set(BRANCH_ORDER)
    if unknown:
        raise ValueError(f"unknown branches: {sorted(unknown)}")
    if not branches:
        raise ValueError("at least one branch must be enabled")
    bundle = FeatureBundle(
        key=pair_key(pair),
        label=None if pair.stance is None else STANCE_INDEX[pair.stance],
    )
    if "neural" in branches:
        if embedder is None:
            raise ValueError("neural branch requires an embedder")
        bundle.neural = neural_block(embedder.embed(pair.body), embedder.embed(pair.headline))
    if "external" in branches:
        if vocab is None:
            raise ValueError("external branch requires a vocabulary")
        bundle.external = external_features(pair, vocab, lexicon)
    if "statistical" in branches:
        if vocab is None:
            raise ValueError("statistical branch requires a vocabulary")
        bundle.statistical = statistical_feature(pair, vocab)
    return bundle


def extract_bundles(pairs, branches=BRANCH_ORDER, vocab=None, lexicon=None, embedder=None):
    return [extract_bundle(p, branches, vocab, lexicon, embedder) for p in pairs]


def stack_bundles(bundles: list[FeatureBundle]):
    """Stack bundles into {block: [n, dim] matrix}, a label array and keys.

    All bundles must share the same enabled blocks and widths. The label
    array is None when every bundle is unlabeled; mixing labeled and
    unlabeled bundles is an error.
    """
    if not bundles:
        raise ValueError("no bundles to stack")
    blocks = bundles[0].enabled_blocks()
    dims = bundles[0].dims()
    for b in bundles:
        if b.enabled_blocks() != blocks or b.dims() != dims:
            raise ValueError(f"bundle {b.key!r} does not match the first bundle's layout")
    inputs = {name: np.vstack([b.block(name) for b in bundles]) for name in blocks}
    labeled = [b.label is not None for b in bundles]
    if all(labeled):
        labels = np.array([b.label for b in bundles], dtype=np.int64)
    elif not any(labeled):
        labels = None
    else:
        raise ValueError("cannot stack a mix of labeled and unlabeled bundles")
    return inputs, labels, [b.key for b in bundles]


def write_cache(path, bundles: list[FeatureBundle]) -> None:
    """Serialize bundles: magic, block/dim header, count, then fixed records.

    Record layout: u32 key byte-length, UTF-8 key, the concatenated blocks as
    little-endian float64, and one gold-label byte (255 when unlabeled).
    """
    if not bundles:
        raise ValueError("refusing to write an empty feature cache")
    blocks = bundles[0].enabled_blocks()
    dims = bundles[0].dims()
    header = (
        CACHE_MAGIC
        + b"\n"
        + ("blocks\t" + ",".join(f"{n}:{dims[n]}" for n in blocks) + "\n").encode("utf-8")
        + f"count\t{len(bundles)}\n".encode("utf-8")
        + b"DATA\n"
    )
    chunks = [header]
    for b in bundles:
        if b.enabled_blocks() != blocks or b.dims() != dims:
            raise ValueError(f"bundle {b.key!r} does not match the cache header layout")
        raw_key = b.key.encode("utf-8")
        values = np.concatenate([b.block(n) for n in blocks])
        label = _UNLABELED_BYTE if b.label is None else b.label
        chunks.append(struct.pack("<I", len(raw_key)))
        chunks.append(raw_key)
        chunks.append(np.ascontiguousarray(values, dtype="<f8").tobytes())
        chunks.append(struct.pack("B", label))
    Path(path).write_bytes(b"".join(chunks))


def read_cache_header(path) -> tuple[dict[str, int], int]:
    """Return ({block: dim}, record count) without reading the records."""
    with open(path, "rb") as fh:
        data = fh.read(4096)
    return _parse_header(data, path)[:2]


def _parse_header(data: bytes, path):
    if not data.startswith(CACHE_MAGIC + b"\n"):
        raise CacheError(f"{path}: bad magic")
    marker = data.find(b"DATA\n")
    if marker < 0:
        raise CacheError(f"{path}: missing data section")
    dims: dict[str, int] = {}
    count = None
    for line in data[len(CACHE_MAGIC) + 1 : marker].decode("utf-8").splitlines():
        field, _, value = line.partition("\t")
        if field == "blocks":
            for item in value.split(","):
                name, _, dim = item.partition(":")
                if name not in BRANCH_ORDER:
                    raise CacheError(f"{path}: unknown block {name!r}")
                dims[name] = int(dim)
        elif field == "count":
            count = int(value)
        else:
            raise CacheError(f"{path}: unknown header field {field!r}")
    if not dims or count is None:
        raise CacheError(f"{path}: incomplete header")
    return dims, count, marker + len(b"DATA\n")


def read_cache(path) -> list[FeatureBundle]:
    data = Path(path).read_bytes()
    dims, count, offset = _parse_header(data, path)
    blocks = tuple(n for n in BRANCH_ORDER if n in dims)
    total_dim = sum(dims.values())
    bundles = []
    for _ in range(count):
        try:
            (key_len,) = struct.unpack_from("<I", data, offset)
        except struct.error:
            raise CacheError(f"{path}: truncated record header") from None
        offset += 4
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        need = 8 * total_dim + 1
        if offset + need > len(data):
            raise CacheError(f"{path}: record {key!r} is truncated")
        values = np.frombuffer(data, dtype="<f8", count=total_dim, offset=offset).copy()
        offset += 8 * total_dim
        label_byte = data[offset]
        offset += 1
        bundle = FeatureBundle(
            key=key, label=None if label_byte == _UNLABELED_BYTE else int(label_byte)
        )
        start = 0
        for name in blocks:
            setattr(bundle, name, values[start : start + dims[name]])
            start += dims[name]
        bundles.append(bundle)
    if offset != len(data):
        raise CacheError(f"{path}: trailing bytes after the final record")
    return bundles
