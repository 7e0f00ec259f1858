"""The differentiable classifier: masked mean pooling over embedded tokens
followed by a small feedforward head (tanh hidden layers, linear output),
with exact backpropagation including gradients w.r.t. the input embeddings.

Forward/backward/predict never mutate ``ModelParams``; updates happen in a
single-writer training loop (see ``robust_training``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding_space import EmbeddedSequence, EmbeddingMatrix, Vocabulary
from .errors import ParseError


@dataclass
class ModelParams:
    """All trainable weights: embedding table plus feedforward head.

    ``weights[l]`` has shape (out, in); layer shapes chain
    d -> hidden_dims... -> n_classes.
    """

    emb: EmbeddingMatrix
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    emb_trainable: bool = True

    @property
    def dim(self) -> int:
        return self.emb.dim

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    def copy(self) -> "ModelParams":
        return ModelParams(
            emb=self.emb.copy(),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            emb_trainable=self.emb_trainable,
        )


@dataclass
class ForwardTrace:
    """Cached intermediates from one forward pass, consumed by backward."""

    vectors: np.ndarray
    mask: np.ndarray
    pooled: np.ndarray
    activations: list[np.ndarray]  # input to each layer: [pooled, h1, ...]
    logits: np.ndarray


@dataclass
class Gradients:
    """Per-parameter gradients plus the gradient w.r.t. the input vectors."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray


def init_params(emb: EmbeddingMatrix, hidden_dims, n_classes: int,
                rng: np.random.Generator, emb_trainable: bool = True) -> ModelParams:
    """Fresh parameters: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
    biases zero, embedding table copied from ``emb``."""
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    dims = [emb.dim] + list(hidden_dims) + [n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(emb=emb.copy(), weights=weights, biases=biases,
                       emb_trainable=emb_trainable)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / np.sum(e)


def forward(params: ModelParams, seq: EmbeddedSequence) -> tuple[np.ndarray, ForwardTrace]:
    """Masked mean pooling, then the feedforward head. Returns (logits, trace)."""
    if seq.dim != params.dim:
        raise ValueError(f"input dim {seq.dim} != model dim {params.dim}")
    n_real = int(np.count_nonzero(seq.mask))
    if n_real == 0:
        raise ValueError("empty example")
    pooled = seq.vectors[seq.mask].sum(axis=0) / n_real
    activations = [pooled]
    h = pooled
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ h + b
        if l < last:
            h = np.tanh(z)
            activations.append(h)
        else:
            h = z
    logits = h
    trace = ForwardTrace(vectors=seq.vectors, mask=seq.mask, pooled=pooled,
                         activations=activations, logits=logits)
    return logits, trace


def loss(logits: np.ndarray, label: int) -> float:
    """Cross-entropy -log softmax(logits)[label], max-subtracted for stability."""
    if not 0 <= label < logits.shape[0]:
        raise ValueError(f"label {label} out of range for {logits.shape[0]} classes")
    shifted = logits - np.max(logits)
    return float(np.log(np.sum(np.exp(shifted))) - shifted[label])


def backward(params: ModelParams, trace: ForwardTrace, label: int) -> Gradients:
    """Exact gradients of ``loss(forward(params, seq), label)``.

    PAD positions receive exactly zero input gradient.
    """
    d_logits = softmax(trace.logits)
    d_logits[label] -= 1.0
    d_weights: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]
    dz = d_logits
    for l in range(len(params.weights) - 1, -1, -1):
        h_in = trace.activations[l]
        d_weights[l] = np.outer(dz, h_in)
        d_biases[l] = dz.copy()
        dh = params.weights[l].T @ dz
        if l > 0:
            dz = (1.0 - h_in * h_in) * dh  # tanh'(z) = 1 - tanh(z)^2
        else:
            d_pooled = dh
    n_real = int(np.count_nonzero(trace.mask))
    d_input = np.zeros_like(trace.vectors)
    d_input[trace.mask] = d_pooled / n_real
    return Gradients(d_weights=d_weights, d_biases=d_biases, d_input=d_input)


def predict(params: ModelParams, seq: EmbeddedSequence) -> int:
    """Argmax class; ties broken by lowest class id."""
    logits, _ = forward(params, seq)
    return int(np.argmax(logits))


def grad_check(params: ModelParams, seq: EmbeddedSequence, label: int,
               h: float = 1e-5, backward_fn=backward) -> float:
    """Maximum relative error of ``backward_fn`` against central differences.

    Sweeps every weight, bias, and input coordinate; the relative error
    denominator is max(|analytic|, |numeric|, 1e-8). ``backward_fn`` is a
    hook so tests can verify that a corrupted gradient is detected.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    logits, trace = forward(params, seq)
    grads = backward_fn(params, trace, label)

    max_rel = 0.0

    def compare(analytic: float, plus: float, minus: float) -> None:
        nonlocal max_rel
        numeric = (plus - minus) / (2.0 * h)
        denom = max(abs(analytic), abs(numeric), 1e-8)
        max_rel = max(max_rel, abs(analytic - numeric) / denom)

    def eval_loss() -> float:
        lg, _ = forward(params, seq)
        return loss(lg, label)

    for arrays, grad_arrays in ((params.weights, grads.d_weights),
                                (params.biases, grads.d_biases)):
        for arr, g in zip(arrays, grad_arrays):
            flat, gflat = arr.ravel(), g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp = eval_loss()
                flat[i] = orig - h
                lm = eval_loss()
                flat[i] = orig
                compare(gflat[i], lp, lm)

    vecs, gin = seq.vectors, grads.d_input
    for i in range(vecs.shape[0]):
        for j in range(vecs.shape[1]):
            orig = vecs[i, j]
            vecs[i, j] = orig + h
            lp = eval_loss()
            vecs[i, j] = orig - h
            lm = eval_loss()
            vecs[i, j] = orig
            compare(gin[i, j], lp, lm)
    return max_rel


# --- checkpoint format -------------------------------------------------
#
# Versioned text, value-exact at 17 significant digits:
#   robustxfer-model v1
#   vocab <V> <unk_id> <pad_id>      then V token lines
#   emb <V> <d> <trainable 0|1>      then V rows
#   layers <L> <n_classes>           then per layer:
#   layer <out> <in>                 out rows of W, one row of b

CHECKPOINT_HEADER = "robustxfer-model v1"


def _fmt_row(row: np.ndarray) -> str:
    # v + 0.0 normalizes -0.0 so numerically equal models serialize identically
    return " ".join(format(v + 0.0, ".17g") for v in row)


def save_checkpoint(path, params: ModelParams, vocab: Vocabulary) -> None:
    if params.emb.rows != len(vocab):
        raise ValueError("embedding rows must match vocabulary size")
    lines = [CHECKPOINT_HEADER,
             f"vocab {len(vocab)} {vocab.unk_id} {vocab.pad_id}"]
    lines.extend(vocab.tokens)
    lines.append(f"emb {params.emb.rows} {params.emb.dim} {int(params.emb_trainable)}")
    lines.extend(_fmt_row(r) for r in params.emb.values)
    lines.append(f"layers {len(params.weights)} {params.n_classes}")
    for w, b in zip(params.weights, params.biases):
        lines.append(f"layer {w.shape[0]} {w.shape[1]}")
        lines.extend(_fmt_row(r) for r in w)
        lines.append(_fmt_row(b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[ModelParams, Vocabulary]:
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take(expect: str) -> list[str]:
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(path, pos + 1, f"unexpected end of file, wanted {expect}")
        parts = lines[pos].split()
        pos += 1
        if not parts or parts[0] != expect:
            raise ParseError(path, pos, f"expected {expect!r} block, got {lines[pos - 1]!r}")
        return parts

    def take_floats(count: int) -> np.ndarray:
        nonlocal pos
        vals = lines[pos].split()
        pos += 1
        if len(vals) != count:
            raise ParseError(path, pos, f"expected {count} floats, got {len(vals)}")
        return np.array([float(v) for v in vals])

    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ParseError(path, 1, f"expected header {CHECKPOINT_HEADER!r}")
    pos = 1
    v_parts = take("vocab")
    n_tokens, unk_id, pad_id = (int(x) for x in v_parts[1:4])
    tokens = lines[pos:pos + n_tokens]
    pos += n_tokens
    vocab = Vocabulary(tokens, unk_id, pad_id)

    e_parts = take("emb")
    rows, dim, trainable = int(e_parts[1]), int(e_parts[2]), bool(int(e_parts[3]))
    emb_values = np.empty((rows, dim))
    for r in range(rows):
        emb_values[r] = take_floats(dim)

    l_parts = take("layers")
    n_layers = int(l_parts[1])
    weights, biases = [], []
    for _ in range(n_layers):
        shape = take("layer")
        out_dim, in_dim = int(shape[1]), int(shape[2])
        w = np.empty((out_dim, in_dim))
        for r in range(out_dim):
            w[r] = take_floats(in_dim)
        weights.append(w)
        biases.append(take_floats(out_dim))
    return ModelParams(emb=EmbeddingMatrix(emb_values), weights=weights,
                       biases=biases, emb_trainable=trainable), vocab
