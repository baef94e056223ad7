"""Contextual document vectors: interchange file, baseline encoder, fusion.

The CEB1 interchange file carries dense per-document vectors produced by an
external encoder (or by the built-in baseline). Layout (little-endian):

    magic  "CEB1" (4 bytes)
    count  u32
    dim    u32
    count records, sorted by doc_id:
        id_len u16, id UTF-8 bytes, dim x f32

A debug TSV form `doc_id<TAB>v0,v1,...` (comma-separated values after one
tab) is accepted on read where a CLI flag asks for it.

The baseline encoder is a training-free stand-in for a pretrained encoder:
TF-IDF with smoothed idf = ln((1+N)/(1+df)) + 1, feature-hashed into `dim`
buckets with a signed blake2b hash, then L2-normalized. Fusion concatenates
the contextual vector with the document's topic distribution, CE first.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._binio import Reader, Writer
from .corpus import EncodedCorpus
from .errors import DataError, FormatError
from .lda import TopicDistribution

_CEB_MAGIC = b"CEB1"


@dataclass
class EmbeddingMatrix:
    dim: int
    entries: dict[str, np.ndarray]  # doc_id -> (dim,) float32

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        if self.dim != other.dim or self.entries.keys() != other.entries.keys():
            return False
        return all(np.array_equal(v, other.entries[k]) for k, v in self.entries.items())


@dataclass
class FusedFeatures:
    doc_id: str
    vector: np.ndarray  # (E + K,) float64: CE at [0, E), theta at [E, E+K)
    embed_dim: int
    topic_dim: int


def write_embedding_file(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the CEB1 container; records in lexicographic doc_id order."""
    if len(matrix.entries) == 0:
        raise DataError("refusing to write an empty embedding matrix")
    w = Writer()
    w.raw(_CEB_MAGIC)
    w.u32(len(matrix.entries))
    w.u32(matrix.dim)
    for doc_id in sorted(matrix.entries):
        vector = matrix.entries[doc_id]
        if vector.shape != (matrix.dim,):
            raise DataError(f"vector for {doc_id!r} has wrong length {vector.shape}")
        w.string(doc_id)
        w.f32_array(vector)
    Path(path).write_bytes(w.getvalue())


def read_embedding_file(path: str | Path) -> EmbeddingMatrix:
    data = Path(path).read_bytes()
    r = Reader(data, name=str(path))
    if r.raw(4) != _CEB_MAGIC:
        raise FormatError(f"{path}: not an embedding file")
    count = r.u32()
    dim = r.u32()
    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        try:
            doc_id = r.string()
            vector = r.f32_array(dim)
        except FormatError as exc:
            raise FormatError(f"{path}: corrupt at record {i}: {exc}") from None
        if not np.isfinite(vector).all():
            raise FormatError(f"{path}: non-finite value in record {i} ({doc_id!r})")
        if doc_id in entries:
            raise FormatError(f"{path}: duplicate doc id {doc_id!r} at record {i}")
        entries[doc_id] = vector
    r.expect_done()
    return EmbeddingMatrix(dim, entries)


def read_embedding_tsv(path: str | Path) -> EmbeddingMatrix:
    """Debug TSV reader: `doc_id<TAB>v0,v1,...` per line."""
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    text = Path(path).read_text(encoding="utf-8")
    for line_num, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{line_num}: expected 'doc_id<TAB>v0,v1,...'")
        doc_id = parts[0]
        try:
            vector = np.array([float(v) for v in parts[1].split(",")], dtype=np.float32)
        except ValueError as exc:
            raise FormatError(f"{path}:{line_num}: bad vector value") from exc
        if not np.isfinite(vector).all():
            raise FormatError(f"{path}:{line_num}: non-finite value")
        if dim is None:
            dim = vector.size
        elif vector.size != dim:
            raise FormatError(f"{path}:{line_num}: dimension {vector.size} != {dim}")
        if doc_id in entries:
            raise FormatError(f"{path}:{line_num}: duplicate doc id {doc_id!r}")
        entries[doc_id] = vector
    if dim is None:
        raise FormatError(f"{path}: no records")
    return EmbeddingMatrix(dim, entries)


def _hash_token(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def baseline_encode(corpus: EncodedCorpus, dim: int = 512) -> EmbeddingMatrix:
    """Hashed TF-IDF document vectors over the corpus vocabulary.

    idf uses the document frequencies stored in the vocabulary, so encoding a
    test corpus against the training vocabulary reuses the training idf.
    Documents with no in-vocabulary tokens stay all-zero.
    """
    if dim < 1:
        raise DataError(f"embedding dim must be >= 1, got {dim}")
    vocab = corpus.vocab
    n = vocab.num_docs
    idf = np.log((1.0 + n) / (1.0 + np.asarray(vocab.doc_freq, dtype=np.float64))) + 1.0
    bucket = np.empty(vocab.size, dtype=np.int64)
    sign = np.empty(vocab.size, dtype=np.float64)
    for token_id, token in enumerate(vocab.id_to_token):
        h = _hash_token(token)
        bucket[token_id] = (h >> 1) % dim
        sign[token_id] = 1.0 if (h & 1) == 0 else -1.0

    entries: dict[str, np.ndarray] = {}
    for doc in corpus.documents:
        vector = np.zeros(dim, dtype=np.float64)
        if doc.token_ids:
            ids, tf = np.unique(np.asarray(doc.token_ids, dtype=np.int64), return_counts=True)
            np.add.at(vector, bucket[ids], sign[ids] * tf * idf[ids])
            norm = np.linalg.norm(vector)
            if norm > 0:
                vector /= norm
        entries[doc.id] = vector.astype(np.float32)
    return EmbeddingMatrix(dim, entries)


def fuse(
    embeddings: EmbeddingMatrix,
    topics: Mapping[str, TopicDistribution | np.ndarray],
    ids: Sequence[str],
) -> list[FusedFeatures]:
    """Per document: CE followed by theta, in the order given by `ids`."""
    fused: list[FusedFeatures] = []
    topic_dim: int | None = None
    for doc_id in ids:
        if doc_id not in embeddings.entries:
            raise DataError(f"missing embedding for {doc_id}")
        if doc_id not in topics:
            raise DataError(f"missing topic distribution for {doc_id}")
        entry = topics[doc_id]
        theta = entry.theta if isinstance(entry, TopicDistribution) else np.asarray(entry)
        if topic_dim is None:
            topic_dim = theta.size
        elif theta.size != topic_dim:
            raise DataError(f"topic vector for {doc_id} has length {theta.size} != {topic_dim}")
        vector = np.concatenate(
            [embeddings.entries[doc_id].astype(np.float64), theta.astype(np.float64)]
        )
        fused.append(FusedFeatures(doc_id, vector, embeddings.dim, theta.size))
    return fused
