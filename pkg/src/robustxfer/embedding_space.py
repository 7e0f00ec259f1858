"""Vocabularies, embedding matrices, synonym sets, and sequence encoding.

All types here are immutable after construction and safe to share across
parallel workers. Training code that needs to update embedding rows works
on its own copy (see ``classifier_core.ModelParams``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

logger = logging.getLogger(__name__)

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"

#: Sequences longer than this are truncated when encoded.
DEFAULT_MAX_LEN = 64


class Vocabulary:
    """Ordered token list with contiguous ids and UNK/PAD specials."""

    def __init__(self, tokens, unk_id: int, pad_id: int):
        self.tokens: tuple[str, ...] = tuple(tokens)
        self._id_of = {t: i for i, t in enumerate(self.tokens)}
        if len(self._id_of) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if unk_id == pad_id:
            raise ValueError("unk_id and pad_id must differ")
        if not (0 <= unk_id < len(self.tokens) and 0 <= pad_id < len(self.tokens)):
            raise ValueError("special ids out of range")
        self.unk_id = unk_id
        self.pad_id = pad_id

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._id_of

    def lookup(self, token: str) -> int:
        """Id of ``token``; raises KeyError if absent."""
        return self._id_of[token]

    def id_or_unk(self, token: str) -> int:
        return self._id_of.get(token, self.unk_id)

    @property
    def special_ids(self) -> tuple[int, int]:
        return (self.unk_id, self.pad_id)

    @classmethod
    def with_specials(cls, tokens) -> "Vocabulary":
        """Build from ``tokens``, appending UNK/PAD if not already present."""
        toks = list(tokens)
        for special in (UNK_TOKEN, PAD_TOKEN):
            if special not in toks:
                toks.append(special)
        return cls(toks, toks.index(UNK_TOKEN), toks.index(PAD_TOKEN))


class EmbeddingMatrix:
    """V x d real matrix of per-token vectors."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("embedding values must be a 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding values must be finite")
        self.values = values

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.values.copy())


@dataclass
class EmbeddedSequence:
    """Encoded token sequence: n x d vectors plus a validity mask.

    ``mask[i]`` is False exactly at PAD positions; padded rows never enter
    pooling and are never perturbed.
    """

    vectors: np.ndarray
    mask: np.ndarray

    @property
    def length(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class SynonymSet:
    """token id -> candidate replacement ids.

    Construction enforces the invariants: no self-references, no
    duplicates, and (when a size bound is given) all ids in range.
    ``warnings`` counts entries dropped during file ingestion.
    """

    neighbors: dict[int, tuple[int, ...]] = field(default_factory=dict)
    warnings: int = 0

    def __post_init__(self):
        clean: dict[int, tuple[int, ...]] = {}
        for key, ids in self.neighbors.items():
            seen = set()
            kept = []
            for i in ids:
                if i == key or i in seen:
                    continue
                seen.add(i)
                kept.append(int(i))
            clean[int(key)] = tuple(kept)
        self.neighbors = clean

    def get(self, token_id: int) -> tuple[int, ...]:
        return self.neighbors.get(token_id, ())

    def __len__(self) -> int:
        return len(self.neighbors)


def load_embeddings(path) -> tuple[Vocabulary, EmbeddingMatrix]:
    """Read the embedding text format: header "V d", then V token rows.

    UNK and PAD are appended with zero vectors when the file does not
    already contain them.
    """
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty embedding file")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(path, 1, f"expected header 'V d', got {lines[0]!r}")
    try:
        n_rows, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(path, 1, f"header fields must be integers, got {lines[0]!r}") from None
    if n_rows < 0 or dim <= 0:
        raise ParseError(path, 1, f"invalid header dimensions {n_rows} x {dim}")
    if len(lines) < 1 + n_rows:
        raise ParseError(path, len(lines), f"expected {n_rows} rows, file has {len(lines) - 1}")

    tokens: list[str] = []
    vectors = np.zeros((n_rows, dim))
    seen: set[str] = set()
    for k in range(n_rows):
        line_no = k + 2
        parts = lines[k + 1].split()
        if not parts:
            raise ParseError(path, line_no, "blank row")
        token = parts[0]
        if token in seen:
            raise ParseError(path, line_no, f"duplicate token {token!r}")
        if len(parts) - 1 != dim:
            raise ParseError(path, line_no, f"dimension mismatch at line {line_no}: "
                                            f"expected {dim} floats, got {len(parts) - 1}")
        try:
            vectors[k] = [float(x) for x in parts[1:]]
        except ValueError:
            raise ParseError(path, line_no, "unparseable float") from None
        seen.add(token)
        tokens.append(token)

    extra = [t for t in (UNK_TOKEN, PAD_TOKEN) if t not in seen]
    if extra:
        vectors = np.vstack([vectors, np.zeros((len(extra), dim))])
    vocab = Vocabulary.with_specials(tokens)
    return vocab, EmbeddingMatrix(vectors)


def save_embeddings(path, vocab: Vocabulary, emb: EmbeddingMatrix) -> None:
    """Write the embedding text format (inverse of :func:`load_embeddings`)."""
    if emb.rows != len(vocab):
        raise ValueError("embedding rows must match vocabulary size")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vocab)} {emb.dim}\n")
        for i, token in enumerate(vocab.tokens):
            row = " ".join(format(v + 0.0, ".17g") for v in emb.values[i])
            fh.write(f"{token} {row}\n")


def encode(token_ids, emb: EmbeddingMatrix, max_len: int = DEFAULT_MAX_LEN,
           pad_id: int | None = None) -> EmbeddedSequence:
    """Look up rows for ``token_ids``, truncated at ``max_len``.

    Positions holding ``pad_id`` get mask False; everything else True.
    """
    ids = np.asarray(list(token_ids), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("empty example")
    ids = ids[:max_len]
    if ids.min() < 0 or ids.max() >= emb.rows:
        bad = ids[(ids < 0) | (ids >= emb.rows)][0]
        raise IndexError(f"token id {bad} out of range for {emb.rows} rows")
    vectors = emb.values[ids].copy()
    if pad_id is None:
        mask = np.ones(ids.size, dtype=bool)
    else:
        mask = ids != pad_id
    return EmbeddedSequence(vectors=vectors, mask=mask)


def build_synonyms_knn(emb: EmbeddingMatrix, k: int, max_dist: float,
                       vocab: Vocabulary | None = None) -> SynonymSet:
    """Nearest-neighbor fallback synonym builder.

    For each non-special token, keeps the <= k closest other tokens by
    Euclidean distance, filtered to distance <= max_dist, ties broken by
    lower id. UNK/PAD are excluded both as keys and as candidates.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_dist <= 0:
        raise ValueError("max_dist must be > 0")
    special = set(vocab.special_ids) if vocab is not None else set()
    ids = [i for i in range(emb.rows) if i not in special]
    if not ids:
        return SynonymSet({})
    pts = emb.values[ids]
    # squared distances via the expansion |a-b|^2 = |a|^2 + |b|^2 - 2ab
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    neighbors: dict[int, tuple[int, ...]] = {}
    id_arr = np.asarray(ids)
    for row, t in enumerate(ids):
        order = np.lexsort((id_arr, dist[row]))
        kept = []
        for j in order:
            cand = int(id_arr[j])
            if cand == t:
                continue
            if dist[row, j] > max_dist:
                break
            kept.append(cand)
            if len(kept) == k:
                break
        neighbors[t] = tuple(kept)
    return SynonymSet(neighbors)


def load_synonyms(path, vocab: Vocabulary) -> SynonymSet:
    """Read the synonym TSV: "token<TAB>comma,separated,synonyms".

    Out-of-vocabulary tokens (keys or neighbors) are dropped; each drop
    increments the returned set's ``warnings`` counter.
    """
    path = str(path)
    neighbors: dict[int, tuple[int, ...]] = {}
    warnings = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 'token<TAB>synonyms', got {line!r}")
            token, syn_field = parts
            if token not in vocab:
                warnings += 1
                continue
            key = vocab.lookup(token)
            kept = []
            for name in filter(None, syn_field.split(",")):
                if name not in vocab:
                    warnings += 1
                    continue
                kept.append(vocab.lookup(name))
            neighbors[key] = tuple(kept)
    if warnings:
        logger.warning("load_synonyms(%s): dropped %d out-of-vocabulary entries", path, warnings)
    return SynonymSet(neighbors, warnings=warnings)


def save_synonyms(path, vocab: Vocabulary, syn: SynonymSet) -> None:
    """Write the synonym TSV (inverse of :func:`load_synonyms`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for token_id in sorted(syn.neighbors):
            names = ",".join(vocab.tokens[i] for i in syn.neighbors[token_id])
            fh.write(f"{vocab.tokens[token_id]}\t{names}\n")
