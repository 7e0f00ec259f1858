"""Zero-shot transfer evaluation, language distance from aligned word
pairs, and the improvement-vs-distance analysis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classifier_core import ModelParams, predict
from .embedding_space import (DEFAULT_MAX_LEN, EmbeddingMatrix, Vocabulary,
                              encode)
from .errors import DataMismatchError, ParseError
from .robust_training import Dataset, PerturbationSpec
from .seeding import STREAM_SMOOTH, derived_rng
from .smoothed_inference import smoothed_predict

logger = logging.getLogger(__name__)


@dataclass
class AlignedPairs:
    """Aligned (source id, target id) word pairs between two vocabularies."""

    pairs: tuple[tuple[int, int], ...]
    source_lang: str = "src"
    target_lang: str = "tgt"
    warnings: int = 0

    def __post_init__(self):
        self.pairs = tuple((int(s), int(t)) for s, t in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class TransferResult:
    """Per-language accuracies and distances for one model."""

    model_tag: str
    accuracy: dict[str, float] = field(default_factory=dict)
    distance: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for lang, acc in self.accuracy.items():
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy for {lang!r} outside [0, 1]")


@dataclass
class ImprovementRow:
    language: str
    distance: float
    acc_baseline: float
    acc_robust: float

    @property
    def delta(self) -> float:
        return self.acc_robust - self.acc_baseline


@dataclass
class ImprovementResult:
    """Per-language gains sorted by distance, plus their rank correlation."""

    rows: list[ImprovementRow]
    spearman_rho: float
    degenerate: bool


def zero_shot_eval(params: ModelParams, tgt: Dataset, emb_tgt: EmbeddingMatrix,
                   mode: str = "plain", spec: PerturbationSpec | None = None,
                   n_samples: int = 100, seed: int = 0,
                   max_len: int = DEFAULT_MAX_LEN) -> float:
    """Accuracy of the classifier head on a target-language dataset.

    The encoder lookup uses ``emb_tgt``; the head is applied unchanged.
    ``mode`` "plain" uses single-pass prediction, "smoothed" the majority
    vote of ``smoothed_predict`` under ``spec``.
    """
    if emb_tgt.dim != params.dim:
        raise DataMismatchError(
            f"target embedding dim {emb_tgt.dim} != model dim {params.dim}")
    if tgt.n_classes > params.n_classes:
        raise DataMismatchError(
            f"dataset has {tgt.n_classes} classes, model only {params.n_classes}")
    if mode not in ("plain", "smoothed"):
        raise ValueError(f"unknown inference mode {mode!r}")
    if len(tgt.examples) == 0:
        raise ValueError("empty dataset")
    if mode == "smoothed" and spec is None:
        spec = PerturbationSpec(kind="none")
    correct = 0
    for idx, (ids, label) in enumerate(tgt.examples):
        seq = encode(ids, emb_tgt, max_len)
        if mode == "plain":
            guess = predict(params, seq)
        else:
            rng = derived_rng(seed, STREAM_SMOOTH, idx)
            guess = smoothed_predict(params, seq, spec, n_samples, rng).predicted_class
        correct += guess == label
    return correct / len(tgt.examples)


def language_distance(pairs: AlignedPairs, emb_src: EmbeddingMatrix,
                      emb_tgt: EmbeddingMatrix) -> float:
    """Mean Euclidean distance between the embeddings of aligned pairs."""
    if len(pairs) == 0:
        raise ValueError("no aligned pairs")
    src_ids = np.fromiter((s for s, _ in pairs.pairs), dtype=np.int64)
    tgt_ids = np.fromiter((t for _, t in pairs.pairs), dtype=np.int64)
    diffs = emb_src.values[src_ids] - emb_tgt.values[tgt_ids]
    return float(np.mean(np.linalg.norm(diffs, axis=1)))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x, y) -> tuple[float, bool]:
    """Spearman rank correlation with average-rank tie handling.

    Returns (rho, degenerate); a constant input makes the correlation
    undefined and is reported as (0.0, True).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d arrays of equal length")
    if x.size < 2:
        return 0.0, True
    rx, ry = average_ranks(x), average_ranks(y)
    sx, sy = np.std(rx), np.std(ry)
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    rho = float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))
    return rho, False


def improvement_vs_distance(baseline: TransferResult,
                            robust: TransferResult) -> ImprovementResult:
    """Per-language accuracy gain of ``robust`` over ``baseline``.

    Rows come back sorted by distance ascending. Distances are read from
    the baseline result (the reference model's geometry). The Spearman
    correlation quantifies whether gains grow with distance.
    """
    langs = set(baseline.accuracy)
    if langs != set(robust.accuracy):
        raise DataMismatchError("baseline and robust cover different language sets")
    missing = langs - set(baseline.distance)
    if missing:
        raise DataMismatchError(f"missing distances for {sorted(missing)}")
    rows = [ImprovementRow(language=lang,
                           distance=baseline.distance[lang],
                           acc_baseline=baseline.accuracy[lang],
                           acc_robust=robust.accuracy[lang])
            for lang in sorted(langs)]
    rows.sort(key=lambda r: (r.distance, r.language))
    rho, degenerate = spearman_rho([r.distance for r in rows],
                                   [r.delta for r in rows])
    return ImprovementResult(rows=rows, spearman_rho=rho, degenerate=degenerate)


def write_improvement_csv(path, result: ImprovementResult) -> None:
    """Report CSV: language,distance,acc_baseline,acc_robust,delta."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("language,distance,acc_baseline,acc_robust,delta\n")
        for r in result.rows:
            fh.write(f"{r.language},{r.distance:.6f},{r.acc_baseline:.6f},"
                     f"{r.acc_robust:.6f},{r.delta:.6f}\n")


def load_alignments(path, vocab_src: Vocabulary, vocab_tgt: Vocabulary,
                    source_lang: str = "src", target_lang: str = "tgt") -> AlignedPairs:
    """Read the alignment TSV: "src_token<TAB>tgt_token" per line.

    Pairs with an out-of-vocabulary side are dropped and counted in the
    result's ``warnings`` field.
    """
    path = str(path)
    pairs: list[tuple[int, int]] = []
    warnings = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 'src<TAB>tgt', got {line!r}")
            src_tok, tgt_tok = parts
            if src_tok not in vocab_src or tgt_tok not in vocab_tgt:
                warnings += 1
                continue
            pairs.append((vocab_src.lookup(src_tok), vocab_tgt.lookup(tgt_tok)))
    if warnings:
        logger.warning("load_alignments(%s): dropped %d out-of-vocabulary pairs",
                       path, warnings)
    return AlignedPairs(tuple(pairs), source_lang, target_lang, warnings=warnings)


def save_alignments(path, pairs: AlignedPairs, vocab_src: Vocabulary,
                    vocab_tgt: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s, t in pairs.pairs:
            fh.write(f"{vocab_src.tokens[s]}\t{vocab_tgt.tokens[t]}\n")
