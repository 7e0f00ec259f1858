"""The four training regimes (normal, adversarial min-max, randomized
smoothing via random perturbation, randomized smoothing via synonym
augmentation) plus the radius grid search.

Determinism contract: every trainer is a pure function of
(data, cfg, emb, syn). Random streams are derived per
(seed, stream, epoch, batch, example), so a zero-radius adversarial run
or a zero-variant augmented run consumes exactly the same draws as plain
training and produces a bit-identical checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifier_core import (ModelParams, backward, forward, init_params,
                              loss, predict)
from .embedding_space import (DEFAULT_MAX_LEN, EmbeddedSequence,
                              EmbeddingMatrix, SynonymSet, Vocabulary, encode)
from .errors import DivergenceError, ParseError
from .seeding import (STREAM_AUGMENT, STREAM_INIT, STREAM_PERTURB,
                      STREAM_SHUFFLE, derived_rng)

PERTURB_KINDS = ("none", "adversarial", "uniform_ball")
METHODS = ("normal", "adv", "rs_random", "rs_augment")

#: Radius grid searched during model selection.
DEFAULT_EPSILON_GRID = (0.001, 0.01, 0.1, 1.0)


@dataclass(frozen=True)
class PerturbationSpec:
    """Perturbation family: kind plus per-token L-infinity radius."""

    kind: str = "none"
    epsilon: float = 0.0
    steps: int = 3

    def __post_init__(self):
        if self.kind not in PERTURB_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kind == "adversarial" and self.steps < 1:
            raise ValueError("steps must be >= 1 for adversarial perturbations")


@dataclass(frozen=True)
class TrainingConfig:
    method: str = "normal"
    perturb: PerturbationSpec = field(default_factory=PerturbationSpec)
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    augment_m: int = 10
    augment_p: float = 0.1
    hidden_dims: tuple[int, ...] = (32,)
    emb_trainable: bool = True
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.augment_p <= 1.0:
            raise ValueError("augment_p must be in [0, 1]")
        if self.augment_m < 0:
            raise ValueError("augment_m must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))


@dataclass(frozen=True)
class Dataset:
    """Labeled token-id sequences sharing one vocabulary."""

    examples: tuple[tuple[tuple[int, ...], int], ...]
    n_classes: int
    language: str = "src"

    def __post_init__(self):
        object.__setattr__(
            self, "examples",
            tuple((tuple(ids), int(label)) for ids, label in self.examples))
        for ids, label in self.examples:
            if not ids:
                raise ValueError("empty token sequence in dataset")
            if not 0 <= label < self.n_classes:
                raise ValueError(f"label {label} out of range for {self.n_classes} classes")

    def __len__(self) -> int:
        return len(self.examples)


# --- perturbation primitives -------------------------------------------

def project_linf(delta: np.ndarray, epsilon: float) -> np.ndarray:
    """Nearest point of the per-token L-infinity ball: entrywise clamp."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return np.clip(delta, -epsilon, epsilon)


def sample_uniform_linf(n: int, d: int, epsilon: float,
                        rng: np.random.Generator) -> np.ndarray:
    """n x d matrix with entries independent uniform on [-epsilon, +epsilon]."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0.0:
        return np.zeros((n, d))
    return rng.uniform(-epsilon, epsilon, size=(n, d))


def inner_max_perturbation(params: ModelParams, seq: EmbeddedSequence, label: int,
                           spec: PerturbationSpec, rng: np.random.Generator,
                           zero_start: bool = False) -> np.ndarray:
    """Loss-maximizing perturbation inside the per-token L-infinity ball.

    Projected sign-gradient ascent from a uniform random start with step
    size epsilon/steps; among the iterates (including the start) the one
    with the highest loss wins. PAD rows stay exactly zero.
    ``zero_start`` replaces the random start with zeros (test hook).
    """
    if spec.kind != "adversarial":
        raise ValueError("inner_max_perturbation requires an adversarial spec")
    eps = spec.epsilon
    n, d = seq.vectors.shape
    if eps == 0.0:
        return np.zeros((n, d))
    if zero_start:
        delta = np.zeros((n, d))
    else:
        delta = rng.uniform(-eps, eps, size=(n, d))
        delta[~seq.mask] = 0.0
    step_size = eps / spec.steps

    def loss_at(dlt: np.ndarray) -> tuple[float, object]:
        perturbed = EmbeddedSequence(seq.vectors + dlt, seq.mask)
        logits, trace = forward(params, perturbed)
        return loss(logits, label), trace

    best_delta = delta
    best_loss, trace = loss_at(delta)
    for _ in range(spec.steps):
        grad = backward(params, trace, label).d_input
        delta = project_linf(delta + step_size * np.sign(grad), eps)
        delta[~seq.mask] = 0.0
        cur_loss, trace = loss_at(delta)
        if cur_loss > best_loss:
            best_loss, best_delta = cur_loss, delta
    return best_delta


# --- the shared SGD loop ------------------------------------------------

def _run_sgd(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix,
             perturb_fn=None) -> ModelParams:
    """Mini-batch SGD; ``perturb_fn(params, seq, label, epoch, batch, i)``
    returns an additive input perturbation or None."""
    params = init_params(emb, cfg.hidden_dims, data.n_classes,
                         derived_rng(cfg.seed, STREAM_INIT),
                         emb_trainable=cfg.emb_trainable)
    n = len(data.examples)
    if n == 0 or cfg.epochs == 0:
        return params
    eps = cfg.perturb.epsilon
    lr = cfg.learning_rate
    step = 0
    for epoch in range(cfg.epochs):
        order = derived_rng(cfg.seed, STREAM_SHUFFLE, epoch).permutation(n)
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            bsz = len(batch)
            acc_w = [np.zeros_like(w) for w in params.weights]
            acc_b = [np.zeros_like(b) for b in params.biases]
            emb_ids: list[np.ndarray] = []
            emb_grads: list[np.ndarray] = []
            for pos, ex_idx in enumerate(batch):
                ids, label = data.examples[ex_idx]
                seq = encode(ids, params.emb, cfg.max_len)
                if perturb_fn is not None:
                    delta = perturb_fn(params, seq, label, epoch, batch_idx, pos)
                    assert np.all(np.abs(delta) <= eps), "perturbation left the epsilon ball"
                    seq = EmbeddedSequence(seq.vectors + delta, seq.mask)
                logits, trace = forward(params, seq)
                step += 1
                value = loss(logits, label)
                if not np.isfinite(value):
                    raise DivergenceError(
                        f"non-finite loss at step {step} (epoch {epoch}, batch {batch_idx})")
                grads = backward(params, trace, label)
                for acc, g in zip(acc_w, grads.d_weights):
                    acc += g
                for acc, g in zip(acc_b, grads.d_biases):
                    acc += g
                if params.emb_trainable:
                    # perturbation is additive post-lookup, so the table
                    # gradient is exactly the input gradient, scattered by id
                    kept = np.asarray(ids[:cfg.max_len], dtype=np.int64)[seq.mask]
                    emb_ids.append(kept)
                    emb_grads.append(grads.d_input[seq.mask])
            for w, acc in zip(params.weights, acc_w):
                w -= lr * (acc / bsz)
            for b, acc in zip(params.biases, acc_b):
                b -= lr * (acc / bsz)
            if params.emb_trainable and emb_ids:
                np.add.at(params.emb.values, np.concatenate(emb_ids),
                          (-lr / bsz) * np.concatenate(emb_grads))
    return params


def train_normal(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix) -> ModelParams:
    """Plain empirical-risk SGD over shuffled mini-batches."""
    if cfg.method != "normal":
        raise ValueError(f"train_normal got method {cfg.method!r}")
    return _run_sgd(data, cfg, emb)


def train_adversarial(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix) -> ModelParams:
    """Min-max training: each step descends the loss at the worst-case
    in-ball perturbation found by ``inner_max_perturbation``."""
    if cfg.method != "adv":
        raise ValueError(f"train_adversarial got method {cfg.method!r}")
    if cfg.perturb.kind != "adversarial":
        raise ValueError("train_adversarial requires perturb.kind == 'adversarial'")

    def perturb(params, seq, label, epoch, batch_idx, pos):
        rng = derived_rng(cfg.seed, STREAM_PERTURB, epoch, batch_idx, pos)
        return inner_max_perturbation(params, seq, label, cfg.perturb, rng)

    return _run_sgd(data, cfg, emb, perturb)


def train_rs_random(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix) -> ModelParams:
    """Randomized smoothing: one fresh uniform-ball draw per example per step."""
    if cfg.method != "rs_random":
        raise ValueError(f"train_rs_random got method {cfg.method!r}")
    if cfg.perturb.kind != "uniform_ball":
        raise ValueError("train_rs_random requires perturb.kind == 'uniform_ball'")
    eps = cfg.perturb.epsilon

    def perturb(params, seq, label, epoch, batch_idx, pos):
        rng = derived_rng(cfg.seed, STREAM_PERTURB, epoch, batch_idx, pos)
        delta = sample_uniform_linf(seq.length, seq.dim, eps, rng)
        delta[~seq.mask] = 0.0
        return delta

    return _run_sgd(data, cfg, emb, perturb)


def augment_dataset(data: Dataset, syn: SynonymSet, m: int, p: float,
                    rng: np.random.Generator) -> Dataset:
    """Original examples plus m synonym-substituted variants each.

    In every variant, each position whose token has a nonempty synonym
    list is independently replaced with probability p by a uniformly
    chosen synonym. Output size is exactly N * (m + 1).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if m < 0:
        raise ValueError("m must be >= 0")
    out: list[tuple[tuple[int, ...], int]] = []
    for ids, label in data.examples:
        out.append((ids, label))
        for _ in range(m):
            variant = list(ids)
            for pos, token_id in enumerate(ids):
                options = syn.get(token_id)
                if options and rng.random() < p:
                    variant[pos] = options[rng.integers(len(options))]
            out.append((tuple(variant), label))
    return Dataset(tuple(out), data.n_classes, data.language)


def train_rs_augment(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix,
                     syn: SynonymSet) -> ModelParams:
    """Randomized smoothing via static synonym augmentation, then plain SGD."""
    if cfg.method != "rs_augment":
        raise ValueError(f"train_rs_augment got method {cfg.method!r}")
    augmented = augment_dataset(data, syn, cfg.augment_m, cfg.augment_p,
                                derived_rng(cfg.seed, STREAM_AUGMENT))
    return _run_sgd(augmented, cfg, emb)


def train(data: Dataset, cfg: TrainingConfig, emb: EmbeddingMatrix,
          syn: SynonymSet | None = None) -> ModelParams:
    """Dispatch on cfg.method."""
    if cfg.method == "normal":
        return train_normal(data, cfg, emb)
    if cfg.method == "adv":
        return train_adversarial(data, cfg, emb)
    if cfg.method == "rs_random":
        return train_rs_random(data, cfg, emb)
    if cfg.method == "rs_augment":
        if syn is None:
            raise ValueError("rs_augment requires a synonym set")
        return train_rs_augment(data, cfg, emb, syn)
    raise ValueError(f"unknown method {cfg.method!r}")


# --- model selection ----------------------------------------------------

def dataset_accuracy(params: ModelParams, data: Dataset, emb: EmbeddingMatrix,
                     max_len: int = DEFAULT_MAX_LEN) -> float:
    """Fraction of examples whose predicted class matches the label."""
    if len(data.examples) == 0:
        raise ValueError("empty dataset")
    correct = sum(predict(params, encode(ids, emb, max_len)) == label
                  for ids, label in data.examples)
    return correct / len(data.examples)


@dataclass(frozen=True)
class GridCell:
    epsilon: float
    accuracy: float | None
    error: str | None = None


def grid_search(train_data: Dataset, dev: Dataset, cfg_base: TrainingConfig,
                grid, emb: EmbeddingMatrix, syn: SynonymSet | None = None,
                ) -> tuple[float, ModelParams, list[GridCell]]:
    """Train once per radius (same seed), pick the best dev accuracy.

    Ties go to the smaller radius; failed cells are recorded in the table
    and skipped in the argmax.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    cells: list[GridCell] = []
    best: tuple[float, float, ModelParams] | None = None  # (acc, eps, params)
    for eps in grid:
        cfg = replace(cfg_base, perturb=replace(cfg_base.perturb, epsilon=eps))
        try:
            params = train(train_data, cfg, emb, syn)
            acc = dataset_accuracy(params, dev, params.emb, cfg.max_len)
        except DivergenceError as exc:
            cells.append(GridCell(eps, None, str(exc)))
            continue
        cells.append(GridCell(eps, acc))
        if best is None or acc > best[0] or (acc == best[0] and eps < best[1]):
            best = (acc, eps, params)
    if best is None:
        raise DivergenceError("every grid cell failed: " +
                              "; ".join(c.error or "" for c in cells))
    return best[1], best[2], cells


# --- file formats -------------------------------------------------------

def load_dataset(path, vocab: Vocabulary, n_classes: int | None = None,
                 language: str = "src") -> Dataset:
    """Read the dataset TSV: "label<TAB>token token ...", 0-based labels.

    Unknown tokens map to UNK. n_classes defaults to max(label) + 1.
    """
    path = str(path)
    examples: list[tuple[tuple[int, ...], int]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 'label<TAB>tokens', got {line!r}")
            try:
                label = int(parts[0])
            except ValueError:
                raise ParseError(path, line_no, f"label {parts[0]!r} is not an integer") from None
            if label < 0:
                raise ParseError(path, line_no, "labels must be >= 0")
            tokens = parts[1].split()
            if not tokens:
                raise ParseError(path, line_no, "example has no tokens")
            examples.append((tuple(vocab.id_or_unk(t) for t in tokens), label))
    if n_classes is None:
        if not examples:
            raise ParseError(path, 1, "empty dataset file")
        n_classes = max(label for _, label in examples) + 1
    return Dataset(tuple(examples), n_classes, language)


def save_dataset(path, data: Dataset, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ids, label in data.examples:
            fh.write(f"{label}\t{' '.join(vocab.tokens[i] for i in ids)}\n")


_CONFIG_PARSERS = {
    "method": str,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "seed": int,
    "augment_m": int,
    "augment_p": float,
    "max_len": int,
    "emb_trainable": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "hidden_dims": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
    "perturb.kind": str,
    "perturb.epsilon": float,
    "perturb.steps": int,
}


def load_config(path, base: TrainingConfig | None = None) -> TrainingConfig:
    """Parse the flat "key = value" config format into a TrainingConfig.

    Keys match TrainingConfig field names; the nested perturbation spec
    uses dotted keys (perturb.kind, perturb.epsilon, perturb.steps).
    """
    path = str(path)
    cfg = base if base is not None else TrainingConfig()
    fields: dict = {}
    perturb_fields: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, line_no, f"expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_PARSERS:
                raise ParseError(path, line_no, f"unknown config key {key!r}")
            try:
                parsed = _CONFIG_PARSERS[key](value)
            except ValueError:
                raise ParseError(path, line_no, f"bad value {value!r} for {key!r}") from None
            if key.startswith("perturb."):
                perturb_fields[key.split(".", 1)[1]] = parsed
            else:
                fields[key] = parsed
    if perturb_fields:
        fields["perturb"] = replace(cfg.perturb, **perturb_fields)
    return replace(cfg, **fields)
