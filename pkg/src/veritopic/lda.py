"""Latent Dirichlet Allocation trained by collapsed Gibbs sampling.

The sampler resamples one token topic at a time from the closed-form
conditional

    p(z = k | rest) ~ (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta)

where the counts exclude the token being resampled. phi is the average of the
per-sweep posterior-mean estimates over post-burn-in sweeps. Unseen documents
are folded in against frozen topic-word counts, so inference never touches
the trained model.

Randomness: all draws are uniforms from numpy's PCG64 generator, seeded from
LdaConfig.seed (algorithm id "numpy-pcg64", recorded in the model file).
Fold-in streams are derived per document as blake2b(doc_id, key=seed), so
inference for a document is reproducible regardless of batch composition.

Model container VLDA, layout (little-endian):

    magic    "VLDA" (4 bytes)
    version  u8 = 1
    rng_algo u8-prefixed ASCII ("numpy-pcg64")
    K u32, alpha f64, beta f64, iterations u32, burn_in u32,
    seed u64, infer_iterations u32
    V u32
    n_kw     K*V i64
    phi      K*V f64

n_k is reconstructed as the row sums of n_kw on load.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from ._binio import Reader, Writer
from .corpus import EncodedCorpus
from .errors import DataError, FormatError

_VLDA_MAGIC = b"VLDA"
_VLDA_VERSION = 1
RNG_ALGORITHM = "numpy-pcg64"


@dataclass(frozen=True)
class LdaConfig:
    k: int = 10
    alpha: float = 0.1
    beta: float = 0.01
    iterations: int = 500
    burn_in: int = 300
    seed: int = 0
    infer_iterations: int = 50

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DataError(f"topic count must be >= 1, got {self.k}")
        if self.alpha <= 0 or self.beta <= 0:
            raise DataError("alpha and beta must be positive")
        if not (self.iterations >= self.burn_in >= 0):
            raise DataError(
                f"need iterations >= burn_in >= 0, got {self.iterations} / {self.burn_in}"
            )
        if self.infer_iterations < 1:
            raise DataError("infer_iterations must be >= 1")


@dataclass
class TopicModel:
    config: LdaConfig
    vocab_size: int
    n_kw: np.ndarray  # (K, V) int64
    n_k: np.ndarray  # (K,) int64
    phi: np.ndarray  # (K, V) float64, rows sum to 1
    trained: bool = True
    train_log: list[float] = field(default_factory=list, compare=False, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TopicModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.vocab_size == other.vocab_size
            and np.array_equal(self.n_kw, other.n_kw)
            and np.array_equal(self.n_k, other.n_k)
            and np.array_equal(self.phi, other.phi)
        )


@dataclass
class TopicDistribution:
    doc_id: str
    theta: np.ndarray  # (K,) float64, sums to 1


@dataclass
class GibbsState:
    """Mutable sampler state, exposed to the per-sweep callback and tests."""

    n_dk: np.ndarray  # (D, K) int64
    n_kw: np.ndarray  # (K, V) int64
    n_k: np.ndarray  # (K,) int64
    assignments: np.ndarray  # (n_tokens,) int64
    doc_of_token: np.ndarray
    word_of_token: np.ndarray


@njit(cache=False)
def _gibbs_sweep(doc_of_token, word_of_token, z, n_dk, n_kw, n_k, alpha, beta, uniforms, cumprob):
    k_count = n_kw.shape[0]
    v_beta = n_kw.shape[1] * beta
    for i in range(doc_of_token.shape[0]):
        d = doc_of_token[i]
        w = word_of_token[i]
        old = z[i]
        n_dk[d, old] -= 1
        n_kw[old, w] -= 1
        n_k[old] -= 1
        total = 0.0
        for k in range(k_count):
            total += (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + v_beta)
            cumprob[k] = total
        u = uniforms[i] * total
        new = 0
        while new < k_count - 1 and cumprob[new] <= u:
            new += 1
        z[i] = new
        n_dk[d, new] += 1
        n_kw[new, w] += 1
        n_k[new] += 1


@njit(cache=False)
def _fold_in_sweeps(
    word_of_token, z, n_dk_local, n_kw, n_k, alpha, beta, uniforms, theta_acc, first_kept
):
    k_count = n_kw.shape[0]
    v_beta = n_kw.shape[1] * beta
    n_tokens = word_of_token.shape[0]
    denom = n_tokens + k_count * alpha
    cumprob = np.empty(k_count)
    kept = 0
    for sweep in range(uniforms.shape[0]):
        for i in range(n_tokens):
            w = word_of_token[i]
            old = z[i]
            n_dk_local[old] -= 1
            total = 0.0
            for k in range(k_count):
                total += (n_dk_local[k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + v_beta)
                cumprob[k] = total
            u = uniforms[sweep, i] * total
            new = 0
            while new < k_count - 1 and cumprob[new] <= u:
                new += 1
            z[i] = new
            n_dk_local[new] += 1
        if sweep >= first_kept:
            kept += 1
            for k in range(k_count):
                theta_acc[k] += (n_dk_local[k] + alpha) / denom
    return kept


def _as_id_lists(corpus) -> list[Sequence[int]]:
    if isinstance(corpus, EncodedCorpus):
        return [doc.token_ids for doc in corpus.documents]
    return list(corpus)


def conditional_distribution(
    n_dk: np.ndarray, n_kw: np.ndarray, n_k: np.ndarray, word: int, config: LdaConfig
) -> np.ndarray:
    """Normalized full conditional over topics for one token of `word`.

    n_dk: per-topic token counts for the document, excluding the token.
    n_kw: (K, V) topic-word table, excluding the token. n_k: its row sums.
    Exposed as its own operation so it can be checked against a brute-force
    evaluation of the formula.
    """
    n_dk = np.asarray(n_dk, dtype=np.float64)
    n_kw = np.asarray(n_kw, dtype=np.float64)
    n_k = np.asarray(n_k, dtype=np.float64)
    if n_dk.min(initial=0.0) < 0 or n_kw.min(initial=0.0) < 0 or n_k.min(initial=0.0) < 0:
        raise DataError("negative count in conditional_distribution")
    vocab_size = n_kw.shape[1]
    if not (0 <= word < vocab_size):
        raise DataError(f"word id {word} out of range for V={vocab_size}")
    weights = (
        (n_dk + config.alpha)
        * (n_kw[:, word] + config.beta)
        / (n_k + vocab_size * config.beta)
    )
    return weights / weights.sum()


def train(
    corpus,
    config: LdaConfig,
    vocab_size: int | None = None,
    on_sweep: Callable[[int, GibbsState], None] | None = None,
) -> TopicModel:
    """Fit a TopicModel on encoded documents; deterministic for a fixed seed.

    `corpus` is an EncodedCorpus or a plain sequence of token-id lists (then
    vocab_size must be given). Sweeps past config.burn_in contribute to the
    averaged phi estimate. on_sweep(sweep_index, state) runs after every
    sweep; mutating the state voids the warranty.
    """
    docs = _as_id_lists(corpus)
    if vocab_size is None:
        if isinstance(corpus, EncodedCorpus):
            vocab_size = corpus.vocab.size
        else:
            raise DataError("vocab_size is required when training on raw id-lists")
    if vocab_size < 1:
        raise DataError("vocabulary must be non-empty")
    if not docs:
        raise DataError("no tokens to sample")

    doc_of_token = np.concatenate(
        [np.full(len(doc), d, dtype=np.int64) for d, doc in enumerate(docs)]
    )
    if doc_of_token.size == 0:
        raise DataError("no tokens to sample")
    word_of_token = np.concatenate(
        [np.asarray(list(doc), dtype=np.int64) for doc in docs]
    )
    if word_of_token.min() < 0 or word_of_token.max() >= vocab_size:
        raise DataError("token id out of vocabulary range")

    n_docs = len(docs)
    k = config.k
    rng = np.random.default_rng(config.seed)

    z = np.floor(rng.random(doc_of_token.size) * k).astype(np.int64)
    np.clip(z, 0, k - 1, out=z)
    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    n_kw = np.zeros((k, vocab_size), dtype=np.int64)
    n_k = np.zeros(k, dtype=np.int64)
    np.add.at(n_dk, (doc_of_token, z), 1)
    np.add.at(n_kw, (z, word_of_token), 1)
    np.add.at(n_k, z, 1)

    state = GibbsState(n_dk, n_kw, n_k, z, doc_of_token, word_of_token)
    phi_acc = np.zeros((k, vocab_size), dtype=np.float64)
    cumprob = np.empty(k, dtype=np.float64)
    kept = 0
    train_log: list[float] = []
    for sweep in range(config.iterations):
        uniforms = rng.random(doc_of_token.size)
        _gibbs_sweep(
            doc_of_token, word_of_token, z, n_dk, n_kw, n_k,
            config.alpha, config.beta, uniforms, cumprob,
        )
        if sweep >= config.burn_in:
            phi_acc += (n_kw + config.beta) / (
                n_k + vocab_size * config.beta
            )[:, None]
            kept += 1
        train_log.append(log_likelihood(state, config))
        if on_sweep is not None:
            on_sweep(sweep, state)

    if kept:
        phi = phi_acc / kept
    else:
        # burn_in == iterations: fall back to the final-count estimate
        phi = (n_kw + config.beta) / (n_k + vocab_size * config.beta)[:, None]
    phi /= phi.sum(axis=1, keepdims=True)

    for arr in (n_kw, n_k, phi):
        arr.flags.writeable = False
    return TopicModel(config, vocab_size, n_kw, n_k, phi, trained=True, train_log=train_log)


def _doc_stream_seed(global_seed: int, doc_id: str) -> int:
    key = int(global_seed).to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(doc_id.encode("utf-8"), key=key, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def infer_theta(model: TopicModel, token_ids: Sequence[int], doc_id: str) -> TopicDistribution:
    """Fold-in Gibbs against frozen counts; deterministic per (seed, doc_id).

    Empty documents get the prior mean (uniform under a symmetric alpha).
    """
    if not model.trained:
        raise DataError("model is not trained")
    k = model.config.k
    if len(token_ids) == 0:
        return TopicDistribution(doc_id, np.full(k, 1.0 / k))
    words = np.asarray(list(token_ids), dtype=np.int64)
    if words.min() < 0 or words.max() >= model.vocab_size:
        raise DataError(f"document {doc_id!r} has token ids outside the model vocabulary")

    cfg = model.config
    sweeps = cfg.infer_iterations
    first_kept = sweeps // 2
    rng = np.random.default_rng(_doc_stream_seed(cfg.seed, doc_id))
    draws = rng.random((sweeps + 1, words.size))

    z = np.floor(draws[0] * k).astype(np.int64)
    np.clip(z, 0, k - 1, out=z)
    n_dk_local = np.bincount(z, minlength=k).astype(np.int64)
    theta_acc = np.zeros(k, dtype=np.float64)
    kept = _fold_in_sweeps(
        words, z, n_dk_local, model.n_kw, model.n_k,
        cfg.alpha, cfg.beta, draws[1:], theta_acc, first_kept,
    )
    theta = theta_acc / kept
    theta /= theta.sum()
    return TopicDistribution(doc_id, theta)


def infer_corpus(model: TopicModel, corpus: EncodedCorpus) -> list[TopicDistribution]:
    """theta for every document in file order (the pre-computation pass)."""
    return [infer_theta(model, doc.token_ids, doc.id) for doc in corpus.documents]


def log_likelihood(state: GibbsState, config: LdaConfig) -> float:
    """Joint log p(w, z | alpha, beta) under the current assignments."""
    return joint_log_likelihood(state.n_dk, state.n_kw, config.alpha, config.beta)


def joint_log_likelihood(n_dk: np.ndarray, n_kw: np.ndarray, alpha: float, beta: float) -> float:
    n_dk = np.asarray(n_dk, dtype=np.float64)
    n_kw = np.asarray(n_kw, dtype=np.float64)
    if n_dk.size == 0 and (n_kw.size == 0 or n_kw.sum() == 0):
        return 0.0
    k = n_kw.shape[0]
    v = n_kw.shape[1]
    if v == 0:
        return 0.0
    doc_totals = n_dk.sum(axis=1)
    doc_term = (
        n_dk.shape[0] * (gammaln(k * alpha) - k * gammaln(alpha))
        + gammaln(n_dk + alpha).sum()
        - gammaln(doc_totals + k * alpha).sum()
    )
    n_k = n_kw.sum(axis=1)
    word_term = (
        k * (gammaln(v * beta) - v * gammaln(beta))
        + gammaln(n_kw + beta).sum()
        - gammaln(n_k + v * beta).sum()
    )
    return float(doc_term + word_term)


def model_to_bytes(model: TopicModel) -> bytes:
    w = Writer()
    w.raw(_VLDA_MAGIC)
    w.u8(_VLDA_VERSION)
    w.string(RNG_ALGORITHM, width=8)
    cfg = model.config
    w.u32(cfg.k)
    w.f64(cfg.alpha)
    w.f64(cfg.beta)
    w.u32(cfg.iterations)
    w.u32(cfg.burn_in)
    w.u64(cfg.seed)
    w.u32(cfg.infer_iterations)
    w.u32(model.vocab_size)
    w.i64_array(model.n_kw)
    w.f64_array(model.phi)
    return w.getvalue()


def model_from_bytes(data: bytes, name: str = "model") -> TopicModel:
    r = Reader(data, name=name)
    if r.raw(4) != _VLDA_MAGIC:
        raise FormatError(f"{name}: not an LDA model file (bad magic)")
    version = r.u8()
    if version != _VLDA_VERSION:
        raise FormatError(f"{name}: unsupported model format version {version}")
    algo = r.string(width=8)
    if algo != RNG_ALGORITHM:
        raise FormatError(f"{name}: unknown RNG algorithm {algo!r}")
    cfg = LdaConfig(
        k=r.u32(),
        alpha=r.f64(),
        beta=r.f64(),
        iterations=r.u32(),
        burn_in=r.u32(),
        seed=r.u64(),
        infer_iterations=r.u32(),
    )
    vocab_size = r.u32()
    n_kw = r.i64_array(cfg.k * vocab_size).reshape(cfg.k, vocab_size)
    phi = r.f64_array(cfg.k * vocab_size).reshape(cfg.k, vocab_size)
    r.expect_done()
    if n_kw.min(initial=0) < 0:
        raise FormatError(f"{name}: negative topic-word count")
    n_k = n_kw.sum(axis=1)
    for arr in (n_kw, n_k, phi):
        arr.flags.writeable = False
    return TopicModel(cfg, vocab_size, n_kw, n_k, phi, trained=True)


def write_model_file(model: TopicModel, path: str | Path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def read_model_file(path: str | Path) -> TopicModel:
    return model_from_bytes(Path(path).read_bytes(), name=str(path))


def write_theta_tsv(distributions: Sequence[TopicDistribution], path: str | Path) -> None:
    """`doc_id<TAB>p_0<TAB>...<TAB>p_{K-1}`, one row per document."""
    lines = []
    for dist in distributions:
        values = "\t".join(repr(float(p)) for p in dist.theta)
        lines.append(f"{dist.doc_id}\t{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_theta_tsv(path: str | Path) -> dict[str, np.ndarray]:
    result: dict[str, np.ndarray] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_num, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise FormatError(f"{path}:{line_num}: expected doc_id and probabilities")
        doc_id = parts[0]
        if doc_id in result:
            raise FormatError(f"{path}:{line_num}: duplicate doc id {doc_id!r}")
        try:
            theta = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}:{line_num}: bad probability value") from exc
        result[doc_id] = theta
    return result
