"""Sentence segmentation, tokenization, vocabularies, and embedding files.

The splitter and tokenizer are deliberately rule-based and deterministic so
fixtures stay stable: no learned models, no external resources.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError

# dot-stripped, lowercased tokens that a period may follow without ending
# the sentence ("fig." -> "fig", "e.g." -> "eg", "et al." -> "al")
ABBREVIATIONS = frozenset({
    "fig", "figs", "eg", "ie", "al", "vs", "approx", "etc", "cf",
    "eq", "eqs", "ref", "refs", "vol", "vols", "ca", "resp", "dr", "prof",
})

_TERMINATORS = ".?!"
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]", re.UNICODE)


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int
    text: str


def normalize(text):
    return unicodedata.normalize("NFC", text)


def _preceding_token(text, dot_index):
    """Letters/digits/dots run that ends right before ``dot_index``."""
    j = dot_index
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    return text[j:dot_index]


def _is_boundary(text, run_start, run_end):
    if run_end >= len(text):
        return True
    if not text[run_end].isspace():
        # "3.5", "e.g.," and friends: punctuation glued to the next char
        return False
    if text[run_start:run_end] != ".":
        return True  # ?, !, ?!, ... always split before whitespace
    token = _preceding_token(text, run_start)
    stripped = token.replace(".", "").lower()
    if stripped in ABBREVIATIONS:
        return False
    if len(stripped) == 1 and stripped.isalpha():
        return False  # single-letter initial such as "J."
    return True


def split_sentences(text):
    """Split NFC-normalized text into ordered, disjoint sentence spans.

    Offsets index into the normalized text.  Joining the spans with the
    whitespace between them reconstructs it exactly.  Whitespace-only
    input yields an empty list.
    """
    text = normalize(text)
    spans = []
    n = len(text)
    i = 0
    while i < n and text[i].isspace():
        i += 1
    start = i
    while i < n:
        if text[i] in _TERMINATORS:
            run_start = i
            while i < n and text[i] in _TERMINATORS:
                i += 1
            if _is_boundary(text, run_start, i):
                spans.append(SentenceSpan(start, i, text[start:i]))
                while i < n and text[i].isspace():
                    i += 1
                start = i
        else:
            i += 1
    if start < n:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            spans.append(SentenceSpan(start, end, text[start:end]))
    return spans


def tokenize(text):
    """Lowercased tokens: alphanumeric runs, punctuation as singletons."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(normalize(text))]


class Vocabulary:
    """Dense token ids with reserved PAD=0 and UNK=1.

    The frequency table keeps counts for every token seen, including
    tokens pruned by ``min_count``; those counts feed frequency-weighted
    sentence embeddings later.
    """

    PAD = 0
    UNK = 1
    PAD_TOKEN = "<pad>"
    UNK_TOKEN = "<unk>"

    def __init__(self, tokens=(), frequencies=None):
        self._id_to_token = [self.PAD_TOKEN, self.UNK_TOKEN]
        self._token_to_id = {self.PAD_TOKEN: self.PAD, self.UNK_TOKEN: self.UNK}
        for token in tokens:
            if token in self._token_to_id:
                raise ContractError(f"duplicate vocabulary token {token!r}")
            self._token_to_id[token] = len(self._id_to_token)
            self._id_to_token.append(token)
        self.frequencies = dict(frequencies or {})
        self._total_count = sum(self.frequencies.values())

    @classmethod
    def build(cls, token_sequences, min_count=1):
        if min_count < 1:
            raise ContractError(f"min_count must be >= 1, got {min_count}")
        counts = {}
        for seq in token_sequences:
            for token in seq:
                counts[token] = counts.get(token, 0) + 1
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        return cls(kept, counts)

    def id(self, token):
        return self._token_to_id.get(token, self.UNK)

    def ids(self, tokens):
        return [self.id(t) for t in tokens]

    def token(self, token_id):
        return self._id_to_token[token_id]

    @property
    def tokens(self):
        """Non-reserved tokens in id order."""
        return list(self._id_to_token[2:])

    def __len__(self):
        return len(self._id_to_token)

    def __contains__(self, token):
        return token in self._token_to_id

    def probability(self, token):
        """Corpus frequency count(token)/total; 0 for unseen tokens."""
        if self._total_count == 0:
            return 0.0
        return self.frequencies.get(token, 0) / self._total_count


@dataclass
class EmbeddingTable:
    """Vocabulary-aligned dense vectors; row i embeds token id i."""

    dim: int
    matrix: np.ndarray
    coverage: float

    def row(self, token_id):
        return self.matrix[token_id]


def load_frequency_file(path):
    """Read ``token count`` lines into a frequency table."""
    freq = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError("expected 'token count'", line=line_no)
            try:
                count = int(parts[1])
            except ValueError as exc:
                raise FormatError(f"unreadable count: {parts[1]!r}", line=line_no) from exc
            if count < 0:
                raise FormatError("counts must be non-negative", line=line_no)
            freq[parts[0]] = freq.get(parts[0], 0) + count
    return freq


def load_embeddings(path, vocab, seed=0, init_scale=0.05):
    """Read a whitespace-delimited text embedding file into a table.

    Each line is ``token v1 ... vD``.  A single leading ``V D`` count
    header is detected and skipped.  Vocabulary tokens missing from the
    file get seeded uniform(-init_scale, init_scale) rows; the PAD row is
    zero.  Coverage is the fraction of non-reserved tokens found.
    """
    rows = {}
    dim = None
    first_content = True
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split()
            if first_content:
                first_content = False
                if len(parts) == 2:
                    try:
                        int(parts[0]), int(parts[1])
                        continue  # word2vec-style count header
                    except ValueError:
                        pass
            token, values = parts[0], parts[1:]
            if not values:
                raise FormatError("no embedding values after token", line=line_no)
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise FormatError(
                    f"expected {dim} values, got {len(values)}", line=line_no)
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"unreadable float: {exc}", line=line_no) from exc
            token_id = vocab.id(token)
            if token_id >= 2 and token_id not in rows:
                rows[token_id] = vector
    if dim is None:
        raise FormatError("embedding file contains no vectors")
    rng = np.random.default_rng(seed)
    matrix = np.zeros((len(vocab), dim))
    for token_id in range(1, len(vocab)):  # PAD row stays zero
        if token_id in rows:
            matrix[token_id] = rows[token_id]
        else:
            matrix[token_id] = rng.uniform(-init_scale, init_scale, size=dim)
    real = max(1, len(vocab) - 2)
    coverage = sum(1 for i in rows if i >= 2) / real
    return EmbeddingTable(dim=dim, matrix=matrix, coverage=coverage)
