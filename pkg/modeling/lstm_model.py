#!/usr/bin/env python3
"""
LSTM Goal Classifier

Single-layer LSTM over embedded state tokens with a 36-unit sigmoid head,
written directly in numpy: forward pass, binary cross-entropy, full
backpropagation through time and a finite-difference gradient check.

Cell, with z_t = [h_{t-1}, x_t]:
    f = sigmoid(W_f z + b_f)      i = sigmoid(W_i z + b_i)
    o = sigmoid(W_o z + b_o)      g = tanh(W_c z + b_c)
    C_t = f * C_{t-1} + i * g     h_t = o * tanh(C_t)
Output: p = sigmoid(W_y h_T + b_y).

Batches hold sequences of one common length, so no padding is involved.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

OUT_DIM = 36
PROB_EPS = 1e-12
GATES = ("f", "i", "o", "c")
PARAM_NAMES = ("embedding",) + tuple(p for g in GATES for p in (f"W_{g}", f"b_{g}")) + ("W_y", "b_y")


@dataclass(frozen=True)
class LstmShape:
    vocab_size: int
    embed_dim: int = 64
    hidden_dim: int = 128
    out_dim: int = OUT_DIM

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "hidden_dim", "out_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def full_scale(cls, vocab_size: int) -> "LstmShape":
        return cls(vocab_size, embed_dim=1000, hidden_dim=512)

    def tensor_shapes(self) -> Dict[str, Tuple[int, ...]]:
        H, E = self.hidden_dim, self.embed_dim
        shapes = {"embedding": (self.vocab_size + 1, E)}
        for g in GATES:
            shapes[f"W_{g}"] = (H, H + E)
            shapes[f"b_{g}"] = (H,)
        shapes["W_y"] = (self.out_dim, H)
        shapes["b_y"] = (self.out_dim,)
        return shapes


class LstmParams:
    """Named float64 tensors of one LSTM; row 0 of the embedding is the out-of-vocabulary token."""

    def __init__(self, shape: LstmShape, tensors: Dict[str, np.ndarray]):
        expected = shape.tensor_shapes()
        missing = set(expected) - set(tensors)
        if missing:
            raise ValueError(f"missing tensors: {sorted(missing)}")
        for name, dims in expected.items():
            if tuple(tensors[name].shape) != dims:
                raise ValueError(f"{name} has shape {tensors[name].shape}, expected {dims}")
        self.shape = shape
        self.tensors = {name: np.asarray(tensors[name], dtype=np.float64) for name in PARAM_NAMES}

    @classmethod
    def init(cls, shape: LstmShape, seed: int = 0) -> "LstmParams":
        """Uniform +-1/sqrt(fan_in) weights, zero biases except the forget gate (+1)."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, dims in shape.tensor_shapes().items():
            if name.startswith("b_"):
                tensors[name] = np.ones(dims) if name == "b_f" else np.zeros(dims)
            else:
                bound = 1.0 / np.sqrt(dims[1])
                tensors[name] = rng.uniform(-bound, bound, size=dims)
        return cls(shape, tensors)

    @classmethod
    def zeros(cls, shape: LstmShape) -> "LstmParams":
        return cls(shape, {name: np.zeros(dims) for name, dims in shape.tensor_shapes().items()})

    def copy(self) -> "LstmParams":
        return LstmParams(self.shape, {k: v.copy() for k, v in self.tensors.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in PARAM_NAMES:
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.tensors[name]).tobytes())
        return digest.hexdigest()


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class _Step(NamedTuple):
    tokens: np.ndarray
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c_prev: np.ndarray
    tanh_c: np.ndarray


class ForwardCache(NamedTuple):
    steps: List[_Step]
    h_last: np.ndarray
    raw_probs: np.ndarray
    probs: np.ndarray


def _as_batch(params: LstmParams, seqs) -> np.ndarray:
    batch = np.asarray(seqs, dtype=np.int64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] == 0:
        raise ValueError("forward needs non-empty sequences of one common length")
    vocab = params.shape.vocab_size
    if batch.min() < 0 or batch.max() > vocab:
        raise ValueError(f"token ids must lie in [0, {vocab}], got {batch.min()}..{batch.max()}")
    return batch


def forward(params: LstmParams, seqs) -> ForwardCache:
    """
    Run a batch of equal-length token sequences (or a single sequence).

    Returns:
        ForwardCache whose `probs` has shape (batch, 36), clamped to
        [1e-12, 1 - 1e-12]; `raw_probs` keeps the unclamped sigmoid.
    """
    tokens = _as_batch(params, seqs)
    B, T = tokens.shape
    H = params.shape.hidden_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for t in range(T):
        x = params["embedding"][tokens[:, t]]
        z = np.concatenate([h, x], axis=1)
        f = sigmoid(z @ params["W_f"].T + params["b_f"])
        i = sigmoid(z @ params["W_i"].T + params["b_i"])
        o = sigmoid(z @ params["W_o"].T + params["b_o"])
        g = np.tanh(z @ params["W_c"].T + params["b_c"])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        steps.append(_Step(tokens[:, t], z, f, i, o, g, c, tanh_c))
        h, c = o * tanh_c, c_new
    raw = sigmoid(h @ params["W_y"].T + params["b_y"])
    return ForwardCache(steps, h, raw, np.clip(raw, PROB_EPS, 1.0 - PROB_EPS))


def bce_loss(probs, target) -> float:
    """Summed binary cross-entropy over the output bits (summed again over a batch)."""
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    t = np.asarray(target, dtype=np.float64)
    return float(-np.sum(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def backward(params: LstmParams, cache: ForwardCache, targets) -> Dict[str, np.ndarray]:
    """Gradients of the batch's summed bce_loss with respect to every tensor."""
    targets = np.asarray(targets, dtype=np.float64).reshape(cache.raw_probs.shape)
    H = params.shape.hidden_dim
    grads = {name: np.zeros_like(t) for name, t in params.tensors.items()}

    dlogits = cache.raw_probs - targets
    grads["W_y"] = dlogits.T @ cache.h_last
    grads["b_y"] = dlogits.sum(axis=0)
    dh = dlogits @ params["W_y"]
    dc = np.zeros_like(dh)
    for step in reversed(cache.steps):
        do = dh * step.tanh_c
        dc = dc + dh * step.o * (1.0 - step.tanh_c ** 2)
        pre = {
            "f": dc * step.c_prev * step.f * (1.0 - step.f),
            "i": dc * step.g * step.i * (1.0 - step.i),
            "o": do * step.o * (1.0 - step.o),
            "c": dc * step.i * (1.0 - step.g ** 2),
        }
        dz = np.zeros_like(step.z)
        for gate, d in pre.items():
            grads[f"W_{gate}"] += d.T @ step.z
            grads[f"b_{gate}"] += d.sum(axis=0)
            dz += d @ params[f"W_{gate}"]
        np.add.at(grads["embedding"], step.tokens, dz[:, H:])
        dh = dz[:, :H]
        dc = dc * step.f
    return grads


def loss_and_gradients(params: LstmParams, seqs, targets) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean per-sequence loss of a batch and its gradients."""
    cache = forward(params, seqs)
    n = cache.probs.shape[0]
    grads = backward(params, cache, targets)
    return bce_loss(cache.probs, targets) / n, {k: v / n for k, v in grads.items()}


def predict_proba(params: LstmParams, seq: Sequence[int]) -> np.ndarray:
    return forward(params, seq).probs[0]


def gradient_check(params: LstmParams, seq: Sequence[int], target, h: float = 1e-5) -> float:
    """
    Largest relative error between backward() and central differences over
    every parameter entry; the denominator is max(|analytic| + |numeric|, 1e-4).
    """
    analytic = backward(params, forward(params, seq), target)
    worst = 0.0
    for name, tensor in params.tensors.items():
        flat = tensor.reshape(-1)
        grad = analytic[name].reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + h
            up = bce_loss(forward(params, seq).probs, target)
            flat[k] = saved - h
            down = bce_loss(forward(params, seq).probs, target)
            flat[k] = saved
            numeric = (up - down) / (2 * h)
            err = abs(grad[k] - numeric) / max(abs(grad[k]) + abs(numeric), 1e-4)
            if err > worst:
                worst = err
                logger.debug(f"gradient check {name}[{k}]: analytic={grad[k]:.6g} numeric={numeric:.6g}")
    return worst


def random_gradient_check(seed: int, vocab_size: int = 6, embed_dim: int = 4, hidden_dim: int = 5,
                          seq_len: int = 3) -> float:
    """gradient_check on a freshly initialised small model with a random sequence and target."""
    rng = np.random.default_rng(seed)
    params = LstmParams.init(LstmShape(vocab_size, embed_dim, hidden_dim), seed=seed)
    seq = rng.integers(0, vocab_size + 1, size=seq_len)
    target = rng.integers(0, 2, size=OUT_DIM)
    return gradient_check(params, seq, target)
