"""Builds a tiny local XLNet checkpoint so export runs without any downloads."""

from __future__ import annotations

import pytest

SENTENCES = [
    "the quick brown fox jumps over the lazy dog",
    "covid vaccine news spreads fast on social media",
    "hospital cases rise as people test positive today",
    "officials report new health guidance for the public",
    "viral claim about miracle cure turns out to be false",
    "researchers publish study on long term effects",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    spm = pytest.importorskip("sentencepiece")
    pytest.importorskip("transformers")
    import torch
    from transformers import XLNetConfig, XLNetModel, XLNetTokenizer

    root = tmp_path_factory.mktemp("tiny-xlnet")
    corpus = root / "corpus.txt"
    corpus.write_text("\n".join(SENTENCES * 10), encoding="utf-8")
    spm.SentencePieceTrainer.train(
        input=str(corpus),
        model_prefix=str(root / "sp"),
        vocab_size=64,
        model_type="unigram",
    )
    tokenizer = XLNetTokenizer(vocab_file=str(root / "sp.model"))
    config = XLNetConfig(
        vocab_size=len(tokenizer) + 8, d_model=16, n_layer=1, n_head=2, d_inner=32
    )
    torch.manual_seed(0)
    model = XLNetModel(config)
    model_dir = root / "model"
    tokenizer.save_pretrained(model_dir)
    model.save_pretrained(model_dir)
    return str(model_dir)


@pytest.fixture()
def small_csv(tmp_path):
    path = tmp_path / "docs.csv"
    path.write_text(
        "id,tweet,label\n"
        "doc-b,covid vaccine news spreads fast,real\n"
        "doc-a,viral claim about miracle cure,fake\n"
        "doc-c,hospital cases rise today,real\n",
        encoding="utf-8",
    )
    return path
