"""Text ingestion: tokenisation, frequency-truncated vocabulary, fixed-length samples."""

import os
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import binfmt
from .errors import CorpusError, FormatError

PUNCTUATION = ".,!?;:'\"()-"
_TOKEN_RE = re.compile(r"\d+|[.,!?;:'\"()\-]|[^\s\d.,!?;:'\"()\-]+")

BATCH_MAGIC = b"ATDL-BATCH1"
_BATCH_HEADER = "<IIQ"  # T, |V|, N


def tokenize(text):
    """Lowercase, split on whitespace; punctuation marks and digit runs stand alone."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class CorpusConfig:
    vocab_size_cap: int = 3000
    seq_len: int = 200
    max_samples: int = 65536
    tokenizer: str = "whitespace-punct"

    def __post_init__(self):
        if self.seq_len < 2:
            raise ValueError("seq_len must be >= 2")
        if self.vocab_size_cap < 2:
            raise ValueError("vocab_size_cap must be >= 2")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        if self.tokenizer not in ("whitespace-punct", "pre-tokenized-ids"):
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")


@dataclass
class Vocab:
    tokens: list
    freq: list
    id_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.id_of = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.id_of

    def encode(self, tokens):
        return [self.id_of[t] for t in tokens]

    def decode(self, ids):
        return [self.tokens[i] for i in ids]

    def dumps(self):
        return "".join(f"{t}\t{c}\n" for t, c in zip(self.tokens, self.freq))

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text):
        tokens, freq = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line:
                continue
            try:
                tok, count = line.rsplit("\t", 1)
                freq.append(int(count))
            except ValueError:
                raise FormatError(f"vocab line {lineno} is not 'token<TAB>count'") from None
            tokens.append(tok)
        return cls(tokens, freq)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


@dataclass
class SequenceBatch:
    """N rows of T+1 ids; columns ``:T`` are inputs and ``1:`` the targets."""

    ids: np.ndarray
    vocab_size: int

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int64)
        if self.ids.ndim != 2 or self.ids.shape[1] < 3:
            raise CorpusError(f"ids must be N x (T+1) with T >= 2, got {self.ids.shape}")
        if self.ids.shape[0] == 0:
            raise CorpusError("empty batch")
        if self.ids.min() < 0 or self.ids.max() >= self.vocab_size:
            raise CorpusError("token id outside the vocabulary")

    @property
    def n(self):
        return self.ids.shape[0]

    @property
    def t(self):
        return self.ids.shape[1] - 1

    @property
    def inputs(self):
        return self.ids[:, :-1]

    @property
    def targets(self):
        return self.ids[:, 1:]

    def subset(self, rows):
        return SequenceBatch(self.ids[rows], self.vocab_size)

    def to_bytes(self, chash=None):
        header = (self.t, self.vocab_size, self.n)
        payload = self.ids.astype("<u4").tobytes()
        return binfmt.pack(BATCH_MAGIC, _BATCH_HEADER, header, payload, chash)

    @classmethod
    def from_bytes(cls, blob):
        (t, v, n), _, payload = binfmt.unpack(
            blob, BATCH_MAGIC, _BATCH_HEADER, lambda h: h[2] * (h[0] + 1) * 4)
        ids = np.frombuffer(payload, dtype="<u4").reshape(n, t + 1)
        return cls(ids.astype(np.int64), v)

    def save(self, path, chash=None):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes(chash))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def read_documents(path, per_file=False):
    """Yield documents from a file (one per line) or a directory.

    For a directory every regular file is read in sorted name order; with
    ``per_file`` each whole file is one document, otherwise each line is.
    """
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if os.path.isfile(os.path.join(path, n)))
        files = [os.path.join(path, n) for n in names]
    else:
        files = [path]
    for fname in files:
        with open(fname, encoding="utf-8") as fh:
            if per_file:
                yield fh.read()
            else:
                for line in fh:
                    if line.strip():
                        yield line


def build_vocab(docs, cfg):
    counts = Counter()
    for doc in docs:
        counts.update(tokenize(doc))
    if not counts:
        raise CorpusError("empty text stream")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cfg.vocab_size_cap]
    return Vocab([t for t, _ in ranked], [c for _, c in ranked])


def encode_sequences(docs, vocab, cfg):
    """Keep in-vocabulary documents of at least T+1 tokens, truncated to T+1."""
    need = cfg.seq_len + 1
    rows = []
    for doc in docs:
        toks = tokenize(doc)
        if len(toks) < need:
            continue
        # out-of-vocabulary anywhere in the document disqualifies it
        if any(t not in vocab.id_of for t in toks):
            continue
        rows.append(vocab.encode(toks[:need]))
        if len(rows) >= cfg.max_samples:
            break
    if not rows:
        raise CorpusError("no document qualifies (length >= T+1 and fully in vocabulary)")
    return SequenceBatch(np.array(rows, dtype=np.int64), len(vocab))


def load_pretokenized(lines, cfg, vocab_size):
    """Parse whitespace-separated decimal id rows; short rows are skipped."""
    if isinstance(lines, (str, os.PathLike)):
        with open(lines, encoding="ascii") as fh:
            lines = fh.read().splitlines()
    need = cfg.seq_len + 1
    rows = []
    for lineno, line in enumerate(lines, 1):
        try:
            ids = [int(f) for f in line.split()]
        except ValueError:
            raise CorpusError(f"line {lineno}: non-integer token id") from None
        bad = [i for i in ids if i < 0 or i >= vocab_size]
        if bad:
            raise CorpusError(f"line {lineno}: id {bad[0]} outside vocabulary of size {vocab_size}")
        if len(ids) < need:
            continue
        rows.append(ids[:need])
        if len(rows) >= cfg.max_samples:
            break
    if not rows:
        raise CorpusError("no pre-tokenized row of length >= T+1")
    return SequenceBatch(np.array(rows, dtype=np.int64), vocab_size)
