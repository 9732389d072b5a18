"""Tokenization and embedding-table loading.

Word vectors come from the textual whitespace-separated format with an
optional "count dim" header line.  Sentence vectors come from a JSONL
sidecar ({"id": ..., "vector": [...]}) produced by an external encoder;
the id convention is "depositionId#index#variant".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)*|[^\sA-Za-z0-9]")


class VectorFileError(ValueError):
    """Raised for malformed word- or sentence-vector files."""


@dataclass(frozen=True)
class Tokenizer:
    """Deterministic whitespace/punctuation tokenizer.

    Punctuation characters become their own tokens; apostrophes inside a
    word are kept ("don't" stays one token).
    """

    lowercase: bool = True

    def __call__(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        return _TOKEN_RE.findall(text)


DEFAULT_TOKENIZER = Tokenizer()


def tokenize(text: str) -> list[str]:
    """Tokenize with the shared default tokenizer (lowercased)."""
    return DEFAULT_TOKENIZER(text)


def word_tokens(text: str) -> list[str]:
    """Tokens that contain at least one alphanumeric character."""
    return [t for t in tokenize(text) if any(c.isalnum() for c in t)]


@dataclass
class WordEmbeddings:
    """Fixed token -> vector table with an out-of-vocabulary policy."""

    dim: int
    vocabulary: dict[str, np.ndarray]
    unk_policy: str = "zero_vector"  # or "learned_unk" (owned by the model)
    duplicates: int = 0

    def lookup(self, token: str) -> np.ndarray:
        vec = self.vocabulary.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec


@dataclass
class SentenceVectors:
    """Externally produced per-example sentence vectors."""

    dim: int | None = None
    map: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.map)

    def lookup(self, example_id: str) -> np.ndarray:
        try:
            return self.map[example_id]
        except KeyError:
            raise KeyError(f"no sentence vector for example id {example_id!r}") from None


def embed_tokens(
    tokens: list[str], we: WordEmbeddings, max_len: int
) -> tuple[np.ndarray, int]:
    """Embed a token sequence into a fixed (max_len, dim) float64 matrix.

    Sequences longer than max_len are truncated; shorter ones are padded
    with zero rows.  Returns the matrix and the true (unpadded) length.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    out = np.zeros((max_len, we.dim))
    true_len = min(len(tokens), max_len)
    for i in range(true_len):
        out[i] = we.lookup(tokens[i])
    return out, true_len


def load_word_vectors(path: str, unk_policy: str = "zero_vector") -> WordEmbeddings:
    """Parse a textual word-vector file.

    Accepts an optional first line "count dim"; every other line is
    "token v1 ... vdim".  On duplicate tokens the last entry wins and
    the duplicate count is recorded.
    """
    vocabulary: dict[str, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dim = int(parts[1])
                    continue
            token, values = parts[0], parts[1:]
            if dim is None:
                if not values:
                    raise VectorFileError(f"{path}:{lineno}: no vector components")
                dim = len(values)
            if len(values) != dim:
                raise VectorFileError(
                    f"{path}:{lineno}: expected {dim} components, found {len(values)}"
                )
            if token in vocabulary:
                duplicates += 1
            try:
                vocabulary[token] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise VectorFileError(f"{path}:{lineno}: {exc}") from None
    if dim is None:
        raise VectorFileError(f"{path}: empty word-vector file")
    return WordEmbeddings(dim=dim, vocabulary=vocabulary, unk_policy=unk_policy, duplicates=duplicates)


def save_word_vectors(we: WordEmbeddings, path: str) -> None:
    """Write a word-vector file that reloads bitwise-equal (repr round trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(we.vocabulary)} {we.dim}\n")
        for token, vec in we.vocabulary.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def load_sentence_vectors(path: str) -> SentenceVectors:
    """Parse a JSONL sentence-vector sidecar, validating uniform dimension."""
    sv = SentenceVectors()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise VectorFileError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            try:
                example_id = record["id"]
                vector = record["vector"]
            except (TypeError, KeyError):
                raise VectorFileError(
                    f"{path}:{lineno}: expected object with 'id' and 'vector'"
                ) from None
            if example_id in sv.map:
                raise VectorFileError(f"{path}:{lineno}: duplicate id {example_id!r}")
            vec = np.array([float(v) for v in vector])
            if sv.dim is None:
                sv.dim = vec.shape[0]
            elif vec.shape[0] != sv.dim:
                raise VectorFileError(
                    f"{path}:{lineno}: id {example_id!r} has dimension "
                    f"{vec.shape[0]}, expected {sv.dim}"
                )
            sv.map[example_id] = vec
    return sv


def save_sentence_vectors(sv: SentenceVectors, path: str) -> None:
    """Write a sentence-vector sidecar that reloads bitwise-equal."""
    with open(path, "w", encoding="utf-8") as fh:
        for example_id, vec in sv.map.items():
            fh.write(
                json.dumps({"id": example_id, "vector": [float(v) for v in vec]})
                + "\n"
            )
