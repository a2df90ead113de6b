"""Discrete unit sequences, adjacent deduplication and length ratios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DivisionByZero, FormatError, InvalidInput


@dataclass(frozen=True)
class UnitSequence:
    """Unit IDs ``u_1..u_n`` drawn from a vocabulary of ``vocab_size`` units."""

    units: tuple[int, ...]
    vocab_size: int
    id: str = ""

    def __post_init__(self):
        units = tuple(int(u) for u in self.units)
        object.__setattr__(self, "units", units)
        if self.vocab_size < 1:
            raise InvalidInput(f"vocab_size must be positive, got {self.vocab_size}")
        for u in units:
            if u < 0 or u >= self.vocab_size:
                raise InvalidInput(f"unit {u} outside vocabulary of size {self.vocab_size}")

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(self.units)

    def to_record(self) -> dict:
        return {"id": self.id, "units": list(self.units), "vocab_size": self.vocab_size}

    @classmethod
    def from_record(cls, record: dict) -> "UnitSequence":
        try:
            units = record["units"]
            vocab_size = record["vocab_size"]
            ident = record.get("id", "")
        except (KeyError, TypeError) as exc:
            raise FormatError(f"unit record missing field: {exc}") from None
        if not isinstance(units, list) or not all(isinstance(u, int) for u in units):
            raise FormatError("'units' must be a list of integers")
        if not isinstance(vocab_size, int):
            raise FormatError("'vocab_size' must be an integer")
        try:
            return cls(tuple(units), vocab_size, str(ident))
        except InvalidInput as exc:
            raise FormatError(str(exc)) from None


def _collapse(units: Sequence[int]) -> list[int]:
    out: list[int] = []
    for u in units:
        if not out or out[-1] != u:
            out.append(u)
    return out


def dedup_adjacent(seq):
    """Collapse each run of equal adjacent IDs to a single occurrence.

    Accepts a :class:`UnitSequence` (returns one) or any plain sequence of
    ints (returns a list).

    >>> dedup_adjacent([7, 7, 3, 3, 3, 7])
    [7, 3, 7]
    """
    if isinstance(seq, UnitSequence):
        return UnitSequence(tuple(_collapse(seq.units)), seq.vocab_size, seq.id)
    return _collapse(list(seq))


def length_ratio(speech_tokens: int, text_tokens: int) -> float:
    """Speech-token count per text token."""
    if text_tokens == 0:
        raise DivisionByZero("text_tokens must be positive")
    return speech_tokens / text_tokens
