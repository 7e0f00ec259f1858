"""Smoothed prediction: majority vote over sampled perturbations, plus an
exact enumeration oracle for the discrete synonym-substitution family.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .classifier_core import ModelParams, predict
from .embedding_space import (DEFAULT_MAX_LEN, EmbeddedSequence,
                              EmbeddingMatrix, SynonymSet, encode)
from .robust_training import PerturbationSpec


@dataclass
class SmoothedPrediction:
    """Majority-vote outcome: per-class counts over n_samples draws."""

    predicted_class: int
    votes: np.ndarray
    n_samples: int

    def vote_fractions(self) -> np.ndarray:
        return self.votes / self.n_samples


@dataclass
class ExactSmoothedPrediction:
    """Enumeration outcome: exact per-class probability masses."""

    predicted_class: int
    masses: np.ndarray
    n_variants: int


def _finish_votes(votes: np.ndarray, n_samples: int) -> SmoothedPrediction:
    return SmoothedPrediction(predicted_class=int(np.argmax(votes)),
                              votes=votes, n_samples=n_samples)


def smoothed_predict(params: ModelParams, seq: EmbeddedSequence,
                     spec: PerturbationSpec, n_samples: int,
                     rng: np.random.Generator) -> SmoothedPrediction:
    """Monte Carlo majority vote under the given perturbation family.

    kind "none" votes with the unperturbed input every time; kind
    "uniform_ball" draws a fresh uniform L-infinity perturbation per
    sample. PAD rows are never perturbed. Ties go to the lowest class id.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if spec.kind not in ("none", "uniform_ball"):
        raise ValueError(f"smoothed_predict cannot sample kind {spec.kind!r}")
    votes = np.zeros(params.n_classes, dtype=np.int64)
    if spec.kind == "none" or spec.epsilon == 0.0:
        votes[predict(params, seq)] = n_samples
        return _finish_votes(votes, n_samples)
    eps = spec.epsilon
    base = seq.vectors
    for _ in range(n_samples):
        delta = rng.uniform(-eps, eps, size=base.shape)
        delta[~seq.mask] = 0.0
        votes[predict(params, EmbeddedSequence(base + delta, seq.mask))] += 1
    return _finish_votes(votes, n_samples)


def _position_options(token_ids, syn: SynonymSet, p: float):
    """Per position: list of (token_id, probability) under the
    independent-replacement distribution."""
    options = []
    for token_id in token_ids:
        neigh = syn.get(token_id)
        if not neigh or p == 0.0:
            options.append([(token_id, 1.0)])
        else:
            share = p / len(neigh)
            options.append([(token_id, 1.0 - p)] + [(s, share) for s in neigh])
    return options


def enumerate_smoothed_predict(params: ModelParams, token_ids, syn: SynonymSet,
                               p: float, emb: EmbeddingMatrix,
                               max_variants: int = 200,
                               max_len: int = DEFAULT_MAX_LEN) -> ExactSmoothedPrediction:
    """Exact smoothed prediction over the synonym-substitution family.

    Enumerates every substitution pattern, weights it by its probability
    under independent replacement (prob p, uniform synonym choice), and
    sums the mass per predicted class. Refuses when the pattern count
    exceeds ``max_variants``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    token_ids = tuple(token_ids)
    options = _position_options(token_ids, syn, p)
    n_variants = math.prod(len(opts) for opts in options)
    if n_variants > max_variants:
        raise ValueError(f"{n_variants} variants exceed the cap of {max_variants}")
    masses = np.zeros(params.n_classes)
    for pattern in itertools.product(*options):
        weight = math.prod(w for _, w in pattern)
        if weight == 0.0:
            continue
        ids = tuple(t for t, _ in pattern)
        masses[predict(params, encode(ids, emb, max_len))] += weight
    return ExactSmoothedPrediction(predicted_class=int(np.argmax(masses)),
                                   masses=masses, n_variants=n_variants)


def sample_smoothed_predict(params: ModelParams, token_ids, syn: SynonymSet,
                            p: float, emb: EmbeddingMatrix, n_samples: int,
                            rng: np.random.Generator,
                            max_len: int = DEFAULT_MAX_LEN) -> SmoothedPrediction:
    """Monte Carlo counterpart of :func:`enumerate_smoothed_predict`:
    samples substitution patterns from the same distribution and votes."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    token_ids = tuple(token_ids)
    votes = np.zeros(params.n_classes, dtype=np.int64)
    for _ in range(n_samples):
        ids = list(token_ids)
        for pos, token_id in enumerate(token_ids):
            neigh = syn.get(token_id)
            if neigh and rng.random() < p:
                ids[pos] = neigh[rng.integers(len(neigh))]
        votes[predict(params, encode(ids, emb, max_len))] += 1
    return _finish_votes(votes, n_samples)
