"""Echo-training loss kernels and their analytic gradients.

Three objectives are combined during the final training stage:

* echo loss: cross-entropy of the echo decoder against pseudo-label
  speech tokens,
* denoising loss: ``sum_i 1 - cos(adapter(H_i), emb_i)`` aligning adapted
  hidden states with the text embeddings of the greedy transcript,
* speech-to-text loss: cross-entropy against the ground-truth text.

The two cross-entropy terms are negative log-likelihoods (lower is better)
and, like the cosine term, are summed over positions unless
``reduction="mean"`` is requested.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateVector, DimensionMismatch, InvalidInput, InvalidTarget

DEFAULT_LAMBDA = 0.2
NORM_EPS = 1e-12


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_ce(logits, targets):
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if logits.ndim != 2:
        raise DimensionMismatch(f"logits must be m x V, got shape {logits.shape}")
    if logits.shape[0] != targets.shape[0]:
        raise DimensionMismatch(f"{logits.shape[0]} logit rows for {targets.shape[0]} targets")
    if not np.all(np.isfinite(logits)):
        raise InvalidInput("logits contain non-finite values")
    V = logits.shape[1]
    bad = (targets < 0) | (targets >= V)
    if bad.any():
        raise InvalidTarget(f"target {int(targets[bad][0])} outside vocabulary of size {V}")
    return logits, targets


def _reduce(total: float, count: int, reduction: str) -> float:
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / count if count else 0.0
    raise ValueError(f"unknown reduction {reduction!r}")


def cross_entropy(logits, targets, reduction: str = "sum") -> float:
    """Negative log-likelihood of ``targets`` under row-wise softmax of ``logits``."""
    logits, targets = _check_ce(logits, targets)
    if targets.size == 0:
        return 0.0
    logp = log_softmax(logits)
    total = -float(logp[np.arange(targets.size), targets].sum())
    return _reduce(total, targets.size, reduction)


def cross_entropy_grad(logits, targets, reduction: str = "sum") -> np.ndarray:
    """Gradient of :func:`cross_entropy` w.r.t. the logits: softmax minus one-hot."""
    logits, targets = _check_ce(logits, targets)
    grad = np.exp(log_softmax(logits))
    grad[np.arange(targets.size), targets] -= 1.0
    if reduction == "mean" and targets.size:
        grad /= targets.size
    return grad


def echo_loss(logits, targets, reduction: str = "sum") -> float:
    """Echo decoder loss over pseudo-label speech tokens."""
    return cross_entropy(logits, targets, reduction)


def s2t_loss(logits, targets, reduction: str = "sum") -> float:
    """Speech-to-text loss over ground-truth text tokens."""
    return cross_entropy(logits, targets, reduction)


@dataclass
class AdapterParams:
    """One-hidden-layer feed-forward adapter: ``tanh(h @ W1 + b1) @ W2 + b2``."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_in: int, d_out: int, hidden: int = 32, seed: int = 0, scale: float = 1.0):
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(0.0, scale / math.sqrt(d_in), (d_in, hidden)),
            np.zeros(hidden),
            rng.normal(0.0, scale / math.sqrt(hidden), (hidden, d_out)),
            np.zeros(d_out),
        )

    @property
    def shapes(self):
        return [self.W1.shape, self.b1.shape, self.W2.shape, self.b2.shape]

    def flatten(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in (self.W1, self.b1, self.W2, self.b2)])

    def with_flat(self, flat: np.ndarray) -> "AdapterParams":
        parts, i = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            parts.append(np.asarray(flat[i:i + size], dtype=np.float64).reshape(shape))
            i += size
        return AdapterParams(*parts)

    def copy(self) -> "AdapterParams":
        return AdapterParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def __call__(self, H: np.ndarray) -> np.ndarray:
        return np.tanh(np.asarray(H, dtype=np.float64) @ self.W1 + self.b1) @ self.W2 + self.b2

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in ("W1", "b1", "W2", "b2")}

    @classmethod
    def from_dict(cls, data: dict) -> "AdapterParams":
        return cls(*(np.asarray(data[name], dtype=np.float64) for name in ("W1", "b1", "W2", "b2")))


def denoising_loss(H, adapter: AdapterParams, embeddings, reduction: str = "sum"):
    """Cosine denoising loss and its gradient w.r.t. every adapter parameter.

    Returns ``(loss, grad)`` where ``grad`` is an :class:`AdapterParams`
    holding dL/dW1, dL/db1, dL/dW2, dL/db2.
    """
    H = np.asarray(H, dtype=np.float64)
    E = np.asarray(embeddings, dtype=np.float64)
    if H.ndim != 2 or E.ndim != 2:
        raise DimensionMismatch("H and embeddings must be matrices")
    if H.shape[0] != E.shape[0]:
        raise DimensionMismatch(f"{H.shape[0]} hidden rows vs {E.shape[0]} embedding rows")
    if H.shape[1] != adapter.W1.shape[0]:
        raise DimensionMismatch(f"H width {H.shape[1]} != adapter input {adapter.W1.shape[0]}")
    if E.shape[1] != adapter.W2.shape[1]:
        raise DimensionMismatch(f"embedding width {E.shape[1]} != adapter output {adapter.W2.shape[1]}")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(E))):
        raise InvalidInput("non-finite input to denoising_loss")

    n = H.shape[0]
    A = np.tanh(H @ adapter.W1 + adapter.b1)
    O = A @ adapter.W2 + adapter.b2
    o_norm = np.linalg.norm(O, axis=1)
    e_norm = np.linalg.norm(E, axis=1)
    if n and (o_norm.min() < NORM_EPS or e_norm.min() < NORM_EPS):
        raise DegenerateVector("zero-norm adapter output or embedding row")

    cos = np.einsum("ij,ij->i", O, E) / (o_norm * e_norm) if n else np.zeros(0)
    loss = float(np.sum(1.0 - cos))

    # d(1 - cos)/dO = -(E / (|O||E|) - cos * O / |O|^2)
    G = -(E / (o_norm * e_norm)[:, None] - (cos / o_norm**2)[:, None] * O) if n else O
    scale = 1.0
    if reduction == "mean" and n:
        scale = 1.0 / n
    elif reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    G = G * scale
    dZ = (G @ adapter.W2.T) * (1.0 - A**2)
    grad = AdapterParams(H.T @ dZ, dZ.sum(axis=0), A.T @ G, G.sum(axis=0))
    return loss * scale, grad


def cosine_rows(X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    xn = np.linalg.norm(X, axis=-1)
    yn = np.linalg.norm(Y, axis=-1)
    if np.any(xn < NORM_EPS) or np.any(yn < NORM_EPS):
        raise DegenerateVector("cosine similarity of a zero-norm vector")
    return np.sum(X * Y, axis=-1) / (xn * yn)


@dataclass(frozen=True)
class LossBreakdown:
    echo: float
    denoising: float
    s2t: float
    lam: float
    total: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def combined_loss(echo: float, denoising: float, s2t: float, lam: float = DEFAULT_LAMBDA) -> LossBreakdown:
    """``total = echo + lam * denoising + s2t``."""
    values = (echo, denoising, s2t, lam)
    if not all(math.isfinite(v) for v in values):
        raise InvalidInput(f"non-finite loss component in {values}")
    echo, denoising, s2t, lam = (float(v) for v in values)
    return LossBreakdown(echo, denoising, s2t, lam, echo + lam * denoising + s2t)


def grad_check(f, params, step: float = 1e-5) -> float:
    """Largest disagreement between an analytic gradient and central differences.

    ``f(params)`` must return ``(value, grad)`` with ``grad`` flat and the
    same size as ``params``. Per coordinate the error is
    ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.
    """
    if not 0 < step <= 1e-2:
        raise InvalidInput(f"step must lie in (0, 1e-2], got {step}")
    params = np.asarray(params, dtype=np.float64).copy()
    value, analytic = f(params)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    if not math.isfinite(value):
        raise InvalidInput("non-finite loss at the base point")
    worst = 0.0
    for j in range(params.size):
        saved = params[j]
        params[j] = saved + step
        up = f(params)[0]
        params[j] = saved - step
        down = f(params)[0]
        params[j] = saved
        if not (math.isfinite(up) and math.isfinite(down)):
            raise InvalidInput(f"non-finite loss while probing coordinate {j}")
        numeric = (up - down) / (2.0 * step)
        err = abs(analytic[j] - numeric) / max(1.0, abs(analytic[j]), abs(numeric))
        worst = max(worst, err)
    return worst
