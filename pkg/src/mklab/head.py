"""The trainable decision head over combined embedding pairs.

Architecture: elementwise absolute difference of the two embeddings, a
fully connected layer (d -> h) with ReLU, a second fully connected layer
(h -> 1), sigmoid on the logit. Forward, analytic backward, cross-entropy
loss and the Adam update are implemented directly on float64 numpy arrays;
embeddings arrive as float32 and are upcast at the combiner.

Reference head size is d=1792, h=4096; desk-scale runs use d=128, h=512.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CLAMP_EPS = 1e-12  # probability clamp inside the loss; keeps it finite

CHECKPOINT_MAGIC = b"MKHD"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIII")


@dataclass
class HeadParameters:
    """Weights and biases of the two fully connected layers."""

    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float

    def __post_init__(self):
        h, d = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ShapeError("parameter block shapes are inconsistent")
        if not (
            np.all(np.isfinite(self.w1))
            and np.all(np.isfinite(self.b1))
            and np.all(np.isfinite(self.w2))
            and np.isfinite(self.b2)
        ):
            raise NumericError("non-finite head parameter")

    @property
    def dims(self) -> tuple[int, int]:
        h, d = self.w1.shape
        return d, h


@dataclass(frozen=True)
class ForwardTrace:
    """Intermediates of one forward pass, consumed by backward."""

    delta: np.ndarray
    pre_act: np.ndarray
    hidden: np.ndarray
    logit: float
    prob: float


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float


@dataclass
class AdamState:
    m_w1: np.ndarray
    v_w1: np.ndarray
    m_b1: np.ndarray
    v_b1: np.ndarray
    m_w2: np.ndarray
    v_w2: np.ndarray
    m_b2: float
    v_b2: float
    t: int = 0

    @classmethod
    def zeros(cls, params: HeadParameters) -> "AdamState":
        return cls(
            np.zeros_like(params.w1),
            np.zeros_like(params.w1),
            np.zeros_like(params.b1),
            np.zeros_like(params.b1),
            np.zeros_like(params.w2),
            np.zeros_like(params.w2),
            0.0,
            0.0,
        )


def init_params(d: int, h: int, seed: int) -> HeadParameters:
    """Fan-in scaled zero-mean gaussian weights, zero biases."""
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(h, d))
    w2 = rng.normal(0.0, np.sqrt(2.0 / h), size=h)
    return HeadParameters(w1, np.zeros(h), w2, 0.0)


def combine(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise absolute difference; symmetric in its arguments."""
    if x.shape != y.shape:
        raise ShapeError(f"embedding shapes differ: {x.shape} vs {y.shape}")
    return np.abs(x.astype(np.float64) - y.astype(np.float64))


def sigmoid(z):
    # Split by sign so exp never overflows.
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(params: HeadParameters, delta: np.ndarray) -> ForwardTrace:
    """Run the head on one combined vector, keeping intermediates."""
    d, _ = params.dims
    if delta.shape != (d,):
        raise ShapeError(f"combined vector has length {delta.shape}, head input is {d}")
    pre = params.w1 @ delta + params.b1
    hidden = np.maximum(pre, 0.0)
    logit = float(params.w2 @ hidden + params.b2)
    if not np.isfinite(logit):
        raise NumericError("non-finite logit in forward pass")
    prob = float(sigmoid(np.array([logit]))[0])
    return ForwardTrace(delta, pre, hidden, logit, prob)


def decide(prob: float) -> bool:
    """Same-person verdict; ties at 0.5 answer no."""
    return prob > 0.5


def ce_loss(probs, labels) -> float:
    """Summed binary cross entropy with probabilities clamped away from {0, 1}."""
    p = np.clip(np.asarray(probs, dtype=np.float64), CLAMP_EPS, 1.0 - CLAMP_EPS)
    t = np.asarray(labels, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError("probs and labels differ in length")
    return float(-np.sum(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def backward(params: HeadParameters, trace: ForwardTrace, label: int) -> Gradients:
    """Exact gradients of the per-pair cross-entropy term.

    The logit gradient is prob - label; the ReLU subgradient at 0 is 0.
    """
    dlogit = trace.prob - float(label)
    g_b2 = dlogit
    g_w2 = dlogit * trace.hidden
    d_hidden = dlogit * params.w2
    d_pre = np.where(trace.pre_act > 0.0, d_hidden, 0.0)
    g_b1 = d_pre
    g_w1 = np.outer(d_pre, trace.delta)
    return Gradients(g_w1, g_b1, g_w2, g_b2)


def batch_forward(params: HeadParameters, deltas: np.ndarray):
    """Vectorized forward over a (B, d) block of combined vectors.

    Returns (pre, hidden, probs); row i agrees with forward() on deltas[i]
    up to reduction order in the matrix products.
    """
    pre = deltas @ params.w1.T + params.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ params.w2 + params.b2
    probs = sigmoid(logits)
    return pre, hidden, probs


def batch_gradients(
    params: HeadParameters, deltas: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray, Gradients]:
    """Mean-reduced loss and gradients over a batch of combined vectors.

    Equals the arithmetic mean of per-pair backward() results (pair index
    order), which keeps reductions bit-reproducible.
    """
    n = deltas.shape[0]
    pre, hidden, probs = batch_forward(params, deltas)
    if not np.all(np.isfinite(probs)):
        bad = int(np.flatnonzero(~np.isfinite(probs))[0])
        raise NumericError(f"non-finite probability at pair index {bad}")
    mean_loss = ce_loss(probs, labels) / n
    dlogit = (probs - labels.astype(np.float64)) / n
    g_b2 = float(np.sum(dlogit))
    g_w2 = hidden.T @ dlogit
    d_pre = np.where(pre > 0.0, np.outer(dlogit, params.w2), 0.0)
    g_b1 = d_pre.sum(axis=0)
    g_w1 = d_pre.T @ deltas
    return mean_loss, probs, Gradients(g_w1, g_b1, g_w2, g_b2)


def adam_step(
    params: HeadParameters,
    grads: Gradients,
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[HeadParameters, AdamState]:
    """One bias-corrected Adam update; returns fresh parameter and state objects.

    Weight decay is decoupled: weights (not biases) shrink by (1 - lr * wd)
    before the moment update is applied.
    """
    t = state.t + 1
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t

    def moments(m, v, g):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * np.square(g)
        return m, v

    m_w1, v_w1 = moments(state.m_w1, state.v_w1, grads.w1)
    m_b1, v_b1 = moments(state.m_b1, state.v_b1, grads.b1)
    m_w2, v_w2 = moments(state.m_w2, state.v_w2, grads.w2)
    m_b2 = ADAM_BETA1 * state.m_b2 + (1.0 - ADAM_BETA1) * grads.b2
    v_b2 = ADAM_BETA2 * state.v_b2 + (1.0 - ADAM_BETA2) * grads.b2**2

    shrink = 1.0 - lr * weight_decay
    w1 = params.w1 * shrink - lr * (m_w1 / c1) / (np.sqrt(v_w1 / c2) + ADAM_EPS)
    b1 = params.b1 - lr * (m_b1 / c1) / (np.sqrt(v_b1 / c2) + ADAM_EPS)
    w2 = params.w2 * shrink - lr * (m_w2 / c1) / (np.sqrt(v_w2 / c2) + ADAM_EPS)
    b2 = params.b2 - lr * (m_b2 / c1) / (np.sqrt(v_b2 / c2) + ADAM_EPS)

    new_params = HeadParameters(w1, b1, w2, float(b2))
    new_state = AdamState(m_w1, v_w1, m_b1, v_b1, m_w2, v_w2, m_b2, v_b2, t)
    return new_params, new_state


def save_checkpoint(params: HeadParameters, step_count: int, path) -> None:
    """Write the head in the checkpoint format.

    Layout (little-endian): magic "MKHD", u32 version, u32 d, u32 h, then
    w1 (h*d float64 row-major), b1, w2, b2, and a u64 training-step count.
    """
    d, h = params.dims
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, d, h))
        np.ascontiguousarray(params.w1, dtype="<f8").tofile(fh)
        np.ascontiguousarray(params.b1, dtype="<f8").tofile(fh)
        np.ascontiguousarray(params.w2, dtype="<f8").tofile(fh)
        fh.write(struct.pack("<d", params.b2))
        fh.write(struct.pack("<Q", step_count))


def load_checkpoint(path) -> tuple[HeadParameters, int]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise FormatError("file shorter than header", offset=len(raw))
    magic, version, d, h = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(
            f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}", offset=0
        )
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    expected = _CKPT_HEADER.size + 8 * (h * d + h + h + 1) + 8
    if len(raw) != expected:
        raise FormatError(
            f"checkpoint size {len(raw)} does not match header "
            f"(d={d}, h={h}, expected {expected})",
            offset=min(len(raw), expected),
        )
    off = _CKPT_HEADER.size
    w1 = np.frombuffer(raw, dtype="<f8", count=h * d, offset=off).reshape(h, d).copy()
    off += 8 * h * d
    b1 = np.frombuffer(raw, dtype="<f8", count=h, offset=off).copy()
    off += 8 * h
    w2 = np.frombuffer(raw, dtype="<f8", count=h, offset=off).copy()
    off += 8 * h
    (b2,) = struct.unpack_from("<d", raw, off)
    off += 8
    (steps,) = struct.unpack_from("<Q", raw, off)
    return HeadParameters(w1, b1, w2, b2), steps
