"""Shared fixtures: synthetic corpora with known structure."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from veritopic import corpus as corpus_mod

FAKE_WORDS = ["cure", "miracle", "conspiracy", "hoax", "secret", "garlic", "bleach"]
REAL_WORDS = ["cases", "vaccine", "study", "health", "official", "update", "report"]
SHARED_WORDS = ["covid", "virus", "people", "news", "today"]


def write_labeled_csv(path: Path, n_rows: int, seed: int, start: int = 0) -> None:
    """Synthetic two-class CSV in the id,tweet,label schema.

    Fake and real rows draw from mostly disjoint word pools, so the task is
    learnable by any reasonable feature pipeline.
    """
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "tweet", "label"])
        for i in range(start, start + n_rows):
            label = "fake" if i % 2 == 0 else "real"
            pool = (FAKE_WORDS if label == "fake" else REAL_WORDS) + SHARED_WORDS
            words = [pool[int(rng.integers(len(pool)))] for _ in range(12)]
            tweet = " ".join(words) + " https://t.co/x @user #Covid19"
            writer.writerow([f"t{i:04d}", tweet, label])


def synthetic_lda_data(
    n_docs: int = 200, doc_len: int = 50, n_topics: int = 3, vocab_size: int = 30, seed: int = 42
):
    """Documents generated from known sparse topics (disjoint word blocks)."""
    rng = np.random.default_rng(seed)
    block = vocab_size // n_topics
    phi_true = np.zeros((n_topics, vocab_size))
    for k in range(n_topics):
        phi_true[k, k * block : (k + 1) * block] = 1.0 / block
    docs = []
    for _ in range(n_docs):
        theta = rng.dirichlet([0.2] * n_topics)
        topics = rng.choice(n_topics, size=doc_len, p=theta)
        docs.append([int(rng.choice(vocab_size, p=phi_true[z])) for z in topics])
    return phi_true, docs


def greedy_topic_alignment(phi_true: np.ndarray, phi_learned: np.ndarray) -> list[int]:
    """Match each true topic to its nearest unused learned topic by L1."""
    n = phi_true.shape[0]
    distance = np.array(
        [[np.abs(phi_true[i] - phi_learned[j]).sum() for j in range(n)] for i in range(n)]
    )
    assignment = [-1] * n
    used: set[int] = set()
    for _ in range(n):
        best = None
        for i in range(n):
            if assignment[i] >= 0:
                continue
            for j in range(n):
                if j in used:
                    continue
                if best is None or distance[i, j] < distance[best[0], best[1]]:
                    best = (i, j)
        assignment[best[0]] = best[1]
        used.add(best[1])
    return assignment


@pytest.fixture(scope="session")
def stopwords() -> frozenset[str]:
    return corpus_mod.default_stopwords()


@pytest.fixture()
def tiny_corpus(stopwords) -> corpus_mod.Corpus:
    docs = [
        corpus_mod.Document("d1", "garlic cure covid hoax", label=corpus_mod.Label.FAKE),
        corpus_mod.Document("d2", "vaccine study cases covid", label=corpus_mod.Label.REAL),
        corpus_mod.Document("d3", "miracle cure secret covid", label=corpus_mod.Label.FAKE),
        corpus_mod.Document("d4", "health update report covid", label=corpus_mod.Label.REAL),
    ]
    raw = corpus_mod.Corpus(docs, corpus_mod.Split.TRAIN)
    return corpus_mod.preprocess_corpus(raw, stopwords)
