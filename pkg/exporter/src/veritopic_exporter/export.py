"""Batch document-embedding export from a frozen pretrained encoder.

Documents come from a CSV with header `id,tweet,label` (label may be empty;
only id and tweet are used). Each text is tokenized and run through the
encoder with gradients disabled; the per-document vector is either the
mask-weighted mean of the last hidden layer (default) or the hidden state at
position 0. Vectors land in a CEB1 file next to a JSON sidecar that records
the model id, pooling, lengths and library versions.

The raw text is embedded as-is: pretrained tokenizers expect natural text,
and keeping this tool independent of the classifier's preprocessing means
the two sides stay coupled only through the file formats.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .ceb import CebError, write_atomic

POOLING_MODES = {
    "mean": "mean-last-layer",
    "first": "first-token",
}


class ExportError(ValueError):
    pass


@dataclass(frozen=True)
class ExportConfig:
    model_id: str = "xlnet-base-cased"
    pooling: str = "mean"  # key into POOLING_MODES
    max_length: int = 128
    batch_size: int = 16
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.pooling not in POOLING_MODES:
            raise ExportError(f"unknown pooling {self.pooling!r}, expected one of {sorted(POOLING_MODES)}")
        if self.max_length < 1 or self.batch_size < 1:
            raise ExportError("max_length and batch_size must be >= 1")


def read_documents(csv_path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs in file order; validates the schema and id uniqueness."""
    path = Path(csv_path)
    if not path.exists():
        raise ExportError(f"dataset file not found: {path}")
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = [name.strip() for name in (reader.fieldnames or [])]
        for column in ("id", "tweet"):
            if column not in header:
                raise ExportError(f"{path}: missing required column '{column}' (header was {header})")
        for row_num, row in enumerate(reader, start=1):
            doc_id = (row.get("id") or "").strip()
            if not doc_id:
                raise ExportError(f"{path}: row {row_num}: empty id")
            if doc_id in seen:
                raise ExportError(f"{path}: row {row_num}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            rows.append((doc_id, row.get("tweet") or ""))
    if not rows:
        raise ExportError(f"{path}: no documents to embed")
    return rows


def _pool(hidden: torch.Tensor, mask: torch.Tensor, pooling: str) -> torch.Tensor:
    if pooling == "first":
        return hidden[:, 0, :]
    weights = mask.unsqueeze(-1).to(hidden.dtype)
    token_counts = weights.sum(dim=1).clamp(min=1.0)
    return (hidden * weights).sum(dim=1) / token_counts


def export_embeddings(csv_path: str | Path, config: ExportConfig, out_path: str | Path) -> dict:
    """Embed every document and write the CEB1 file + `.meta.json` sidecar.

    Returns the sidecar payload. Import of transformers is deferred so that
    config errors surface instantly.
    """
    from transformers import AutoModel, AutoTokenizer
    import transformers

    documents = read_documents(csv_path)

    if config.deterministic:
        torch.manual_seed(0)
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True, warn_only=True)

    tokenizer = AutoTokenizer.from_pretrained(config.model_id)
    model = AutoModel.from_pretrained(config.model_id)
    model.eval()

    entries: dict[str, np.ndarray] = {}
    hidden_size: int | None = None
    with torch.no_grad():
        for start in range(0, len(documents), config.batch_size):
            batch = documents[start : start + config.batch_size]
            encoded = tokenizer(
                [text for _, text in batch],
                padding=True,
                truncation=True,
                max_length=config.max_length,
                return_tensors="pt",
            )
            output = model(
                input_ids=encoded["input_ids"], attention_mask=encoded["attention_mask"]
            )
            pooled = _pool(output.last_hidden_state, encoded["attention_mask"], config.pooling)
            vectors = pooled.to(torch.float32).cpu().numpy()
            hidden_size = vectors.shape[1]
            for (doc_id, _), vector in zip(batch, vectors):
                entries[doc_id] = vector

    try:
        write_atomic(entries, hidden_size, out_path)
    except CebError as exc:
        raise ExportError(str(exc)) from exc

    sidecar = {
        "tool": "veritopic-exporter",
        "tool_version": __version__,
        "model_id": config.model_id,
        "pooling": POOLING_MODES[config.pooling],
        "max_length": config.max_length,
        "batch_size": config.batch_size,
        "deterministic": config.deterministic,
        "hidden_size": hidden_size,
        "num_documents": len(entries),
        "library_versions": {
            "torch": torch.__version__,
            "transformers": transformers.__version__,
        },
    }
    sidecar_path = Path(str(out_path) + ".meta.json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar
