"""Streaming read/write trigger policy.

Each semantic state is compared against a trigger embedding (the period
token) by cosine similarity. Position ``t`` fires a WRITE when its
similarity exceeds ``threshold`` and is the maximum of the centered window
``[t - w//2, t + w//2]`` (clipped at the sequence ends). Within a window
the earliest of several equal maxima fires, later equal values do not.

A decision at ``t`` needs ``w//2`` positions of lookahead, so the
streaming segmenter emits it only after position ``t + w//2`` is read, or
when the stream ends.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateVector, DimensionMismatch, EmptyInput, FormatError, InvalidInput
from .losses import NORM_EPS

READ = "READ"
WRITE = "WRITE"


@dataclass
class TriggerConfig:
    trigger_vector: np.ndarray
    threshold: float = 0.1
    window: int = 5

    def __post_init__(self):
        self.trigger_vector = np.asarray(self.trigger_vector, dtype=np.float64).reshape(-1)
        if self.trigger_vector.size == 0 or np.linalg.norm(self.trigger_vector) < NORM_EPS:
            raise InvalidInput("trigger vector must be non-zero")
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidInput(f"window must be a positive odd integer, got {self.window}")

    @property
    def lookahead(self) -> int:
        return self.window // 2

    @classmethod
    def from_json(cls, text: str) -> "TriggerConfig":
        try:
            data = json.loads(text)
            return cls(
                np.asarray(data["trigger_vector"], dtype=np.float64),
                float(data.get("threshold", 0.1)),
                int(data.get("window", 5)),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise FormatError(f"malformed trigger config: {exc}") from None


@dataclass(frozen=True)
class StreamDecision:
    position: int
    action: str
    similarity: float

    def to_record(self) -> dict:
        return {"position": self.position, "action": self.action, "similarity": self.similarity}


def similarity_series(H, config: TriggerConfig) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2:
        raise DimensionMismatch(f"H must be n x d, got shape {H.shape}")
    if H.shape[1] != config.trigger_vector.size:
        raise DimensionMismatch(
            f"hidden width {H.shape[1]} != trigger width {config.trigger_vector.size}"
        )
    norms = np.linalg.norm(H, axis=1)
    if np.any(norms < NORM_EPS):
        raise DegenerateVector(f"zero-norm hidden state at position {int(np.argmin(norms))}")
    t = config.trigger_vector
    s = (H @ t) / (norms * np.linalg.norm(t))
    return np.clip(s, -1.0, 1.0)


def fires(s: Sequence[float], t: int, threshold: float, window: int) -> bool:
    """Whether position ``t`` of a (fully known) series is a WRITE."""
    h = window // 2
    v = s[t]
    if not v > threshold:
        return False
    for j in range(max(0, t - h), t):
        if s[j] >= v:
            return False
    for j in range(t + 1, min(len(s), t + h + 1)):
        if s[j] > v:
            return False
    return True


def offline_writes(s: Sequence[float], threshold: float = 0.1, window: int = 5) -> list[int]:
    """Whole-series scan of the WRITE rule."""
    return [t for t in range(len(s)) if fires(s, t, threshold, window)]


@dataclass
class StreamingSegmenter:
    """Incremental policy over a similarity stream.

    ``push`` returns the decisions that became final after reading one more
    value; ``finish`` resolves the tail and returns the remaining decisions.
    Completed segments accumulate in ``segments`` as ``range`` objects.
    """

    threshold: float = 0.1
    window: int = 5
    values: list = field(default_factory=list)
    decided: int = 0
    last_cut: int = 0
    segments: list = field(default_factory=list)
    finished: bool = False

    def _decide(self, t: int, known: Sequence[float]) -> StreamDecision:
        if fires(known, t, self.threshold, self.window):
            self.segments.append(range(self.last_cut, t + 1))
            self.last_cut = t + 1
            return StreamDecision(t, WRITE, float(known[t]))
        return StreamDecision(t, READ, float(known[t]))

    def push(self, similarity: float) -> list[StreamDecision]:
        if self.finished:
            raise InvalidInput("stream already finished")
        self.values.append(float(similarity))
        h = self.window // 2
        out = []
        # position t is final once t + h has been read
        while self.decided + h < len(self.values):
            out.append(self._decide(self.decided, self.values))
            self.decided += 1
        return out

    def finish(self) -> list[StreamDecision]:
        out = []
        while self.decided < len(self.values):
            out.append(self._decide(self.decided, self.values))
            self.decided += 1
        if self.last_cut < len(self.values):
            self.segments.append(range(self.last_cut, len(self.values)))
            self.last_cut = len(self.values)
        self.finished = True
        return out


def stream_similarities(s: Iterable[float], threshold: float = 0.1, window: int = 5):
    seg = StreamingSegmenter(threshold, window)
    decisions = []
    for v in s:
        decisions.extend(seg.push(v))
    decisions.extend(seg.finish())
    if not decisions:
        raise EmptyInput("empty similarity stream")
    return decisions, seg.segments


def stream_segment(H, config: TriggerConfig):
    """Run the streaming policy over hidden states.

    Returns ``(decisions, segments)``: one decision per position and the
    emitted segments as ``range`` objects that tile ``0..n-1``.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] == 0:
        raise EmptyInput("no hidden states to stream")
    s = similarity_series(H, config)
    return stream_similarities(s, config.threshold, config.window)


def latency_report(decisions: Sequence[StreamDecision], window: int = 5, offline: bool = False) -> dict:
    """Token latency before speech can start, plus segment statistics.

    Streaming latency is the first WRITE position plus the ``window // 2``
    lookahead, capped at the sequence length; without any WRITE the whole
    sequence must be read. Offline latency is always the sequence length.
    """
    n = len(decisions)
    writes = [d.position for d in decisions if d.action == WRITE]
    lookahead = window // 2
    cuts = writes + ([n - 1] if not writes or writes[-1] != n - 1 else [])
    lengths = np.diff([-1] + cuts) if n else np.zeros(0)
    if offline:
        latency = n
    elif writes:
        latency = min(writes[0] + lookahead, n)
    else:
        latency = n
    return {
        "mode": "offline" if offline else "streaming",
        "length": n,
        "latency": latency,
        "first_write": writes[0] if writes else None,
        "lookahead": 0 if offline else lookahead,
        "writes": len(writes),
        "segments": 1 if offline and n else int(len(lengths)),
        "mean_segment_length": float(n if offline else (lengths.mean() if n else 0.0)),
    }
