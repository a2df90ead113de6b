"""Span-count language model scoring candidate unit-language tokens.

Every contiguous span of 1..K units in the training corpus is counted. A
span of length L is scored against the other spans of the same length with
additive smoothing over all V**L possible spans:

    log P(span) = log((count(span) + alpha) / (total_L + alpha * V**L))
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import FormatError, InsufficientData, InvalidInput, SpanTooLong
from .unitseq import UnitSequence


@dataclass
class SpanModel:
    K: int
    alpha: float
    vocab_size: int
    counts: dict[tuple[int, ...], int]
    totals: dict[int, int] = field(init=False)

    def __post_init__(self):
        if self.K < 1:
            raise InvalidInput(f"K must be >= 1, got {self.K}")
        if not self.alpha > 0:
            raise InvalidInput(f"alpha must be positive, got {self.alpha}")
        if self.vocab_size < 1:
            raise InvalidInput(f"vocab_size must be positive, got {self.vocab_size}")
        totals = {L: 0 for L in range(1, self.K + 1)}
        for span, c in self.counts.items():
            if not 1 <= len(span) <= self.K:
                raise InvalidInput(f"stored span {span} has length outside [1, {self.K}]")
            if c < 1:
                raise InvalidInput(f"stored span {span} has count {c}")
            totals[len(span)] += c
        self.totals = totals

    def count(self, span: Sequence[int]) -> int:
        return self.counts.get(tuple(span), 0)

    def log_prob(self, span: Sequence[int]) -> float:
        return span_log_prob(self, span)

    def to_json(self) -> str:
        counts = {"_".join(map(str, span)): c for span, c in sorted(self.counts.items())}
        return json.dumps(
            {"K": self.K, "alpha": self.alpha, "vocab_size": self.vocab_size, "counts": counts},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SpanModel":
        try:
            data = json.loads(text)
            counts = {
                tuple(int(u) for u in key.split("_")): int(c)
                for key, c in data["counts"].items()
            }
            return cls(int(data["K"]), float(data["alpha"]), int(data["vocab_size"]), counts)
        except (json.JSONDecodeError, KeyError, ValueError, TypeError, AttributeError) as exc:
            raise FormatError(f"malformed span model: {exc}") from None


def _units(seq) -> tuple[int, ...]:
    return seq.units if isinstance(seq, UnitSequence) else tuple(int(u) for u in seq)


def train_span_model(
    corpus: Iterable, K: int = 4, alpha: float = 1.0, vocab_size: int | None = None
) -> SpanModel:
    """Count all spans of length 1..K across ``corpus``.

    ``vocab_size`` defaults to the largest ``vocab_size`` among the
    UnitSequence entries, or max unit ID + 1 for plain lists.
    """
    corpus = list(corpus)
    if not corpus:
        raise InsufficientData("corpus is empty")
    counts: Counter = Counter()
    inferred = 0
    for seq in corpus:
        units = _units(seq)
        if isinstance(seq, UnitSequence):
            inferred = max(inferred, seq.vocab_size)
        elif units:
            inferred = max(inferred, max(units) + 1)
        n = len(units)
        for L in range(1, K + 1):
            for i in range(n - L + 1):
                counts[units[i:i + L]] += 1
    if vocab_size is None:
        vocab_size = max(inferred, 1)
    return SpanModel(K, alpha, vocab_size, dict(counts))


def span_log_prob(model: SpanModel, span: Sequence[int]) -> float:
    L = len(span)
    if not 1 <= L <= model.K:
        raise SpanTooLong(f"span length {L} outside [1, {model.K}]")
    num = model.counts.get(tuple(span), 0) + model.alpha
    den = model.totals[L] + model.alpha * float(model.vocab_size) ** L
    return math.log(num / den)
