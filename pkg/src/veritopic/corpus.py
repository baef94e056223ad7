"""Dataset ingestion, tweet preprocessing, vocabulary and integer encoding.

The input CSV schema is `id,tweet,label` with labels "real"/"fake"
(case-insensitive). Preprocessing applies, in this order: lowercase, drop URL
tokens (prefix http/https/www), drop @-mentions, strip leading '#' from
hashtags, replace every character outside [a-z0-9' ] with a space, split on
whitespace, drop stopwords and empties. The character whitelist keeps the
apostrophe so contractions and possessives ("india's") survive as single
tokens.

Encoded corpora are persisted in the VCP1 container, layout (little-endian):

    magic    "VCP1" (4 bytes)
    version  u8 = 1
    split    u8 (0 train, 1 validation, 2 test, 3 unsplit)
    ndocs    u32
    num_docs u32                -- corpus size the vocabulary was built from
    V        u32
    V times:  token u16-prefixed UTF-8, doc_freq u32
    ndocs times:
        id     u16-prefixed UTF-8
        label  u8 (0 fake, 1 real, 255 absent)
        ntok   u32
        ntok   u32 token ids

Round-trip identity: read_corpus_file(write_corpus_file(c)) == c.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path

from ._binio import Reader, Writer
from .errors import DataError, FormatError

_ALLOWED_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789'")
_URL_PREFIXES = ("http", "www")
_CSV_COLUMNS = ("id", "tweet", "label")

_VCP_MAGIC = b"VCP1"
_VCP_VERSION = 1
_NO_LABEL = 255


class Label(IntEnum):
    FAKE = 0
    REAL = 1


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"
    UNSPLIT = "unsplit"


@dataclass
class Document:
    id: str
    raw_text: str
    tokens: list[str] = field(default_factory=list)
    label: Label | None = None


@dataclass
class Corpus:
    documents: list[Document]
    split: Split = Split.UNSPLIT

    def __len__(self) -> int:
        return len(self.documents)

    def class_counts(self) -> dict[str, int]:
        counts = {"real": 0, "fake": 0, "unlabeled": 0}
        for doc in self.documents:
            if doc.label is Label.REAL:
                counts["real"] += 1
            elif doc.label is Label.FAKE:
                counts["fake"] += 1
            else:
                counts["unlabeled"] += 1
        return counts


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]
    doc_freq: list[int]
    num_docs: int

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self.token_to_id == other.token_to_id
            and self.id_to_token == other.id_to_token
            and self.doc_freq == other.doc_freq
            and self.num_docs == other.num_docs
        )


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one token per line, '#' lines are comments."""
    words = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word = line.strip()
            if word and not word.startswith("#"):
                words.add(word)
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    """The stopword list shipped with the package (data/stopwords_en.txt)."""
    ref = importlib.resources.files("veritopic").joinpath("data/stopwords_en.txt")
    words = set()
    for line in ref.read_text(encoding="utf-8").splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


def preprocess_text(raw: str, stopwords: frozenset[str] | set[str]) -> list[str]:
    """Clean one text down to its token list. Degenerate inputs give []."""
    kept: list[str] = []
    for word in raw.lower().split():
        if word.startswith(_URL_PREFIXES) or word.startswith("@"):
            continue
        kept.append(word.lstrip("#"))
    cleaned = "".join(c if c in _ALLOWED_CHARS else " " for c in " ".join(kept))
    # The character filter can split glued URLs ("-http://x") back into
    # tokens with a URL prefix; re-apply the prefix rule so the result is a
    # fixpoint of the pipeline.
    return [
        tok
        for tok in cleaned.split()
        if tok not in stopwords and not tok.startswith(_URL_PREFIXES)
    ]


def preprocess_corpus(corpus: Corpus, stopwords: frozenset[str] | set[str]) -> Corpus:
    """New Corpus with every document's token list filled in."""
    docs = [
        Document(d.id, d.raw_text, preprocess_text(d.raw_text, stopwords), d.label)
        for d in corpus.documents
    ]
    return Corpus(docs, corpus.split)


def _parse_label(value: str, row_num: int, split: Split) -> Label | None:
    text = value.strip().lower()
    if text == "real":
        return Label.REAL
    if text == "fake":
        return Label.FAKE
    if text == "":
        if split is Split.UNSPLIT:
            return None
        raise DataError(f"row {row_num}: missing label (required for split '{split.value}')")
    raise DataError(f"row {row_num}: unparseable label {value!r} (expected 'real' or 'fake')")


def load_dataset(path: str | Path, split: Split = Split.UNSPLIT) -> Corpus:
    """Load a labeled CSV into a Corpus, preserving file order.

    Raises DataError for schema problems (missing columns), bad labels
    (with the 1-based data row number) and duplicate ids.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    documents: list[Document] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, expected header id,tweet,label")
        header = [name.strip() for name in reader.fieldnames]
        for column in _CSV_COLUMNS:
            if column not in header:
                raise DataError(f"{path}: missing required column '{column}' (header was {header})")
        for row_num, row in enumerate(reader, start=1):
            doc_id = (row.get("id") or "").strip()
            if not doc_id:
                raise DataError(f"row {row_num}: empty id")
            if doc_id in seen_ids:
                raise DataError(f"row {row_num}: duplicate id {doc_id!r}")
            seen_ids.add(doc_id)
            label = _parse_label(row.get("label") or "", row_num, split)
            documents.append(Document(doc_id, row.get("tweet") or "", [], label))
    return Corpus(documents, split)


def build_vocabulary(corpus: Corpus, min_df: int = 1) -> Vocabulary:
    """Vocabulary over tokens with document frequency >= min_df.

    Ids are assigned in lexicographic token order, so two runs over the same
    corpus produce byte-identical vocabularies.
    """
    if min_df < 1:
        raise DataError(f"min_df must be >= 1, got {min_df}")
    df: dict[str, int] = {}
    for doc in corpus.documents:
        for token in set(doc.tokens):
            df[token] = df.get(token, 0) + 1
    tokens = sorted(t for t, count in df.items() if count >= min_df)
    if not tokens:
        raise DataError("empty vocabulary")
    return Vocabulary(
        token_to_id={t: i for i, t in enumerate(tokens)},
        id_to_token=tokens,
        doc_freq=[df[t] for t in tokens],
        num_docs=len(corpus.documents),
    )


def encode_document(tokens: list[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids in order; out-of-vocabulary tokens are dropped."""
    mapping = vocab.token_to_id
    return [mapping[t] for t in tokens if t in mapping]


@dataclass
class EncodedDocument:
    id: str
    label: Label | None
    token_ids: list[int]


@dataclass
class EncodedCorpus:
    split: Split
    vocab: Vocabulary
    documents: list[EncodedDocument]

    def __len__(self) -> int:
        return len(self.documents)

    def labels(self) -> list[Label | None]:
        return [d.label for d in self.documents]

    def ids(self) -> list[str]:
        return [d.id for d in self.documents]


def encode_corpus(corpus: Corpus, vocab: Vocabulary) -> EncodedCorpus:
    docs = [
        EncodedDocument(d.id, d.label, encode_document(d.tokens, vocab))
        for d in corpus.documents
    ]
    return EncodedCorpus(corpus.split, vocab, docs)


_SPLIT_CODE = {Split.TRAIN: 0, Split.VALIDATION: 1, Split.TEST: 2, Split.UNSPLIT: 3}
_CODE_SPLIT = {v: k for k, v in _SPLIT_CODE.items()}


def write_corpus_file(encoded: EncodedCorpus, path: str | Path) -> None:
    w = Writer()
    w.raw(_VCP_MAGIC)
    w.u8(_VCP_VERSION)
    w.u8(_SPLIT_CODE[encoded.split])
    w.u32(len(encoded.documents))
    vocab = encoded.vocab
    w.u32(vocab.num_docs)
    w.u32(vocab.size)
    for token, freq in zip(vocab.id_to_token, vocab.doc_freq):
        w.string(token)
        w.u32(freq)
    for doc in encoded.documents:
        w.string(doc.id)
        w.u8(_NO_LABEL if doc.label is None else int(doc.label))
        w.u32(len(doc.token_ids))
        w.u32_array(doc.token_ids)
    Path(path).write_bytes(w.getvalue())


def read_corpus_file(path: str | Path) -> EncodedCorpus:
    data = Path(path).read_bytes()
    r = Reader(data, name=str(path))
    if r.raw(4) != _VCP_MAGIC:
        raise FormatError(f"{path}: not a corpus file (bad magic)")
    version = r.u8()
    if version != _VCP_VERSION:
        raise FormatError(f"{path}: unsupported corpus format version {version}")
    split = _CODE_SPLIT.get(r.u8())
    if split is None:
        raise FormatError(f"{path}: unknown split code")
    ndocs = r.u32()
    num_docs = r.u32()
    vsize = r.u32()
    tokens: list[str] = []
    freqs: list[int] = []
    for _ in range(vsize):
        tokens.append(r.string())
        freqs.append(r.u32())
    vocab = Vocabulary(
        token_to_id={t: i for i, t in enumerate(tokens)},
        id_to_token=tokens,
        doc_freq=freqs,
        num_docs=num_docs,
    )
    documents: list[EncodedDocument] = []
    for i in range(ndocs):
        doc_id = r.string()
        code = r.u8()
        if code == _NO_LABEL:
            label: Label | None = None
        elif code in (0, 1):
            label = Label(code)
        else:
            raise FormatError(f"{path}: corrupt at record {i}: bad label code {code}")
        ntok = r.u32()
        ids = r.u32_array(ntok)
        if vsize and ids.size and int(ids.max()) >= vsize:
            raise FormatError(f"{path}: corrupt at record {i}: token id out of range")
        documents.append(EncodedDocument(doc_id, label, [int(x) for x in ids]))
    r.expect_done()
    return EncodedCorpus(split, vocab, documents)
