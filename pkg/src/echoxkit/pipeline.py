"""Echo-training harness on toy decoder-only models.

Data flow for one dialogue turn:

    input units --S2T--> greedy text X' (+ hidden states H)
    X' --frozen T2C--> greedy speech tokens Y'        (pseudo-labels)
    adapter(H) --echo decoder--> logits over Y'       (echo loss)
    adapter(H) vs Emb(X')                             (denoising loss)
    S2T teacher-forced on ground-truth text           (S2T loss)

Any object with ``step(prefix, conditioning) -> (logits, hidden)`` can be
decoded greedily; :class:`ToyDecoder` is the reference model used here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, FrozenViolation, InvalidInput
from .losses import (
    DEFAULT_LAMBDA,
    AdapterParams,
    LossBreakdown,
    combined_loss,
    cross_entropy,
    cross_entropy_grad,
    denoising_loss,
)


class SeqModel(Protocol):
    def step(self, prefix: Sequence[int], conditioning) -> tuple[np.ndarray, np.ndarray]: ...


PARAM_NAMES = ("cond_embedding", "proj", "tok_embedding", "mix", "head", "head_bias")


@dataclass
class ToyDecoder:
    """Decoder with one causal mean-of-prefix aggregation layer.

    Conditioning is either a 1-D array of token IDs, looked up in the
    frozen ``cond_embedding`` table, or a matrix already in that embedding
    space. It is projected, averaged and added to the aggregated prefix:

        h_t    = tanh(mean(tok_embedding[bos, y_1..y_t]) @ mix + mean(C @ proj))
        logits = h_t @ head + head_bias

    Only the output head is ever trained; ``frozen`` locks it too.
    """

    cond_embedding: np.ndarray
    proj: np.ndarray
    tok_embedding: np.ndarray
    mix: np.ndarray
    head: np.ndarray
    head_bias: np.ndarray
    frozen: bool = False

    @classmethod
    def init(cls, cond_vocab: int, out_vocab: int, d_emb: int, d: int, seed: int = 0,
             cond_embedding: np.ndarray | None = None, frozen: bool = False):
        rng = np.random.default_rng(seed)
        if cond_embedding is None:
            cond_embedding = rng.normal(0.0, 1.0, (cond_vocab, d_emb))
        return cls(
            np.array(cond_embedding, dtype=np.float64),
            rng.normal(0.0, 1.0 / np.sqrt(d_emb), (d_emb, d)),
            rng.normal(0.0, 1.0, (out_vocab + 1, d)),
            rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
            rng.normal(0.0, 2.0 / np.sqrt(d), (d, out_vocab)),
            np.zeros(out_vocab),
            frozen,
        )

    @property
    def vocab_size(self) -> int:
        return self.head.shape[1]

    @property
    def bos(self) -> int:
        return self.vocab_size

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in PARAM_NAMES:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()

    def clone(self, frozen: bool = False) -> "ToyDecoder":
        return ToyDecoder(*(getattr(self, n).copy() for n in PARAM_NAMES), frozen=frozen)

    def embed(self, tokens) -> np.ndarray:
        return self.cond_embedding[np.asarray(tokens, dtype=np.int64)]

    def _context(self, conditioning) -> np.ndarray:
        if conditioning is None:
            return np.zeros(self.proj.shape[1])
        C = np.asarray(conditioning)
        if C.ndim == 1:
            C = self.embed(C)
        if C.ndim != 2 or C.shape[1] != self.proj.shape[0]:
            raise DimensionMismatch(f"conditioning rows must have width {self.proj.shape[0]}")
        if C.shape[0] == 0:
            return np.zeros(self.proj.shape[1])
        return (C @ self.proj).mean(axis=0)

    def forward(self, targets: Sequence[int], conditioning) -> tuple[np.ndarray, np.ndarray]:
        """Teacher-forced pass: row i predicts ``targets[i]`` from ``targets[:i]``."""
        targets = [int(t) for t in targets]
        inputs = self.tok_embedding[[self.bos] + targets[:-1]] if targets else np.zeros((0, self.mix.shape[0]))
        counts = np.arange(1, len(targets) + 1)[:, None]
        agg = np.cumsum(inputs, axis=0) / counts if targets else inputs
        hidden = np.tanh(agg @ self.mix + self._context(conditioning))
        return hidden @ self.head + self.head_bias, hidden

    def step(self, prefix: Sequence[int], conditioning) -> tuple[np.ndarray, np.ndarray]:
        seq = [self.bos] + [int(t) for t in prefix]
        agg = self.tok_embedding[seq].mean(axis=0)
        hidden = np.tanh(agg @ self.mix + self._context(conditioning))
        return hidden @ self.head + self.head_bias, hidden

    def update_head(self, grad_head: np.ndarray, grad_bias: np.ndarray, lr: float) -> None:
        if self.frozen:
            raise FrozenViolation("attempted to update a frozen decoder")
        self.head = self.head - lr * grad_head
        self.head_bias = self.head_bias - lr * grad_bias


def greedy_decode(model: SeqModel, conditioning, max_len: int, eos: int,
                  return_hidden: bool = False):
    """Append the arg-max token (lowest ID on ties) until ``eos`` or ``max_len``.

    The returned sequence includes ``eos`` when it was produced.
    """
    if max_len < 1:
        raise InvalidInput(f"max_len must be >= 1, got {max_len}")
    out: list[int] = []
    hidden = []
    while len(out) < max_len:
        logits, h = model.step(out, conditioning)
        tok = int(np.argmax(logits))
        out.append(tok)
        hidden.append(np.asarray(h))
        if tok == eos:
            break
    if return_hidden:
        return out, np.array(hidden)
    return out


@dataclass
class PseudoLabelBatch:
    x_prime: list[int]
    y_prime: list[int]
    H: np.ndarray
    source: list[int] = field(default_factory=list)


def _strip_eos(tokens: list[int], eos: int) -> list[int]:
    return tokens[:-1] if tokens and tokens[-1] == eos else tokens


def make_pseudo_labels(s2t: ToyDecoder, t2c: ToyDecoder, input_units: Sequence[int],
                       text_eos: int = 0, speech_eos: int = 0,
                       max_text: int = 16, max_speech: int = 48) -> PseudoLabelBatch:
    """Greedy S2T transcript X' with its hidden states H, then Y' from the frozen T2C.

    ``eos`` markers are stripped, so ``len(x_prime) == H.shape[0]``.
    """
    if not t2c.frozen:
        raise FrozenViolation("the text-to-codec model must be marked frozen")
    before = t2c.checksum()
    source = [int(u) for u in input_units]
    text, hidden = greedy_decode(s2t, np.asarray(source, dtype=np.int64), max_text, text_eos,
                                 return_hidden=True)
    x_prime = _strip_eos(text, text_eos)
    H = hidden[: len(x_prime)]
    if x_prime:
        speech = greedy_decode(t2c, np.asarray(x_prime, dtype=np.int64), max_speech, speech_eos)
        y_prime = _strip_eos(speech, speech_eos)
    else:
        y_prime = []
    if t2c.checksum() != before:
        raise FrozenViolation("text-to-codec parameters changed during pseudo-labelling")
    return PseudoLabelBatch(x_prime, y_prime, H, source)


def echo_decoder_from_t2c(t2c: ToyDecoder) -> ToyDecoder:
    """Trainable echo decoder with parameters copied from the T2C model."""
    return t2c.clone(frozen=False)


def echo_training_step(batch: PseudoLabelBatch, ground_truth_text: Sequence[int],
                       s2t: ToyDecoder, echo_decoder: ToyDecoder, adapter: AdapterParams,
                       lam: float = DEFAULT_LAMBDA, lr: float = 0.01):
    """Evaluate all three losses and take one gradient-descent step.

    Trainable parameters: the adapter (denoising gradient, weighted by
    ``lam``), the echo decoder head (echo loss) and the S2T head (S2T loss);
    frozen decoders are left alone. The embedding tables are never touched.
    Returns ``(LossBreakdown, updated_adapter)``.
    """
    if not (np.isfinite(lam) and np.isfinite(lr)):
        raise InvalidInput("lambda and lr must be finite")
    H = np.asarray(batch.H, dtype=np.float64)
    n = len(batch.x_prime)
    if H.shape[0] != n:
        raise DimensionMismatch(f"{H.shape[0]} hidden rows for {n} greedy text tokens")

    if n:
        emb = echo_decoder.embed(batch.x_prime)
        den, den_grad = denoising_loss(H, adapter, emb)
        adapted = adapter(H)
    else:
        den, den_grad = 0.0, None
        adapted = np.zeros((0, echo_decoder.proj.shape[0]))

    echo_logits, echo_hidden = echo_decoder.forward(batch.y_prime, adapted)
    echo = cross_entropy(echo_logits, batch.y_prime)

    gt = [int(t) for t in ground_truth_text]
    s2t_logits, s2t_hidden = s2t.forward(gt, np.asarray(batch.source, dtype=np.int64))
    s2t_val = cross_entropy(s2t_logits, gt)

    breakdown = combined_loss(echo, den, s2t_val, lam)

    new_adapter = adapter.copy()
    if lr != 0.0:
        if den_grad is not None:
            new_adapter = adapter.with_flat(adapter.flatten() - lr * lam * den_grad.flatten())
        if batch.y_prime and not echo_decoder.frozen:
            g = cross_entropy_grad(echo_logits, batch.y_prime)
            echo_decoder.update_head(echo_hidden.T @ g, g.sum(axis=0), lr)
        if gt and not s2t.frozen:
            g = cross_entropy_grad(s2t_logits, gt)
            s2t.update_head(s2t_hidden.T @ g, g.sum(axis=0), lr)
    return breakdown, new_adapter


@dataclass
class ToySystem:
    """Seeded S2T, frozen T2C, echo decoder and adapter wired together."""

    s2t: ToyDecoder
    t2c: ToyDecoder
    echo: ToyDecoder
    adapter: AdapterParams
    unit_vocab: int
    text_vocab: int
    speech_vocab: int
    seed: int

    @classmethod
    def build(cls, seed: int = 0, unit_vocab: int = 16, text_vocab: int = 12,
              speech_vocab: int = 20, d_llm: int = 8, d_t2c: int = 8, adapter_hidden: int = 32):
        s2t = ToyDecoder.init(unit_vocab, text_vocab, d_llm, d_llm, seed=seed)
        # the T2C text embeddings start from the LLM's own token embeddings
        t2c = ToyDecoder.init(text_vocab, speech_vocab, d_llm, d_t2c, seed=seed + 1,
                              cond_embedding=s2t.tok_embedding[:text_vocab], frozen=True)
        echo = echo_decoder_from_t2c(t2c)
        adapter = AdapterParams.init(d_llm, d_llm, adapter_hidden, seed=seed + 2)
        return cls(s2t, t2c, echo, adapter, unit_vocab, text_vocab, speech_vocab, seed)

    def sample_turn(self, rng: np.random.Generator, n_units: int = 24, n_text: int = 6):
        units = rng.integers(0, self.unit_vocab, n_units).tolist()
        text = rng.integers(1, self.text_vocab, n_text).tolist() + [0]
        return units, text

    def run(self, steps: int, lam: float = DEFAULT_LAMBDA, lr: float = 0.01):
        """Yield ``(step, batch, LossBreakdown)`` for ``steps`` seeded dialogue turns."""
        rng = np.random.default_rng(self.seed)
        for i in range(steps):
            units, text = self.sample_turn(rng)
            batch = make_pseudo_labels(self.s2t, self.t2c, units)
            breakdown, self.adapter = echo_training_step(
                batch, text, self.s2t, self.echo, self.adapter, lam, lr
            )
            yield i, batch, breakdown

    def manifest(self) -> dict:
        adapter_hash = hashlib.sha256(self.adapter.flatten().tobytes()).hexdigest()
        return {
            "seed": self.seed,
            "t2c": self.t2c.checksum(),
            "echo_decoder": self.echo.checksum(),
            "s2t": self.s2t.checksum(),
            "adapter": adapter_hash,
        }
