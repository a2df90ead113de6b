"""Unit-language segmentation.

A unit sequence ``u_1..u_n`` is split into tokens of at most ``K``
contiguous units so that the summed span log-probability is maximal:

    best[0] = 0
    best[i] = max_{1 <= k <= min(K, i)} best[i - k] + log P(u[i-k+1..i])

Ties go to the smaller ``k`` (shorter final span) at every position.
``segment_brute_force`` enumerates every segmentation and serves as the
oracle for the dynamic program. Both have batch forms that score many
equal-length sequences in one vectorized pass.

Any object with an integer ``K`` attribute and a ``log_prob(span)`` method
can stand in for a :class:`~echoxkit.unitlm.SpanModel`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import EmptyInput, InsufficientData, InvalidInput, TooLargeForOracle
from .unitseq import UnitSequence

BRUTE_FORCE_LIMIT = 16


@dataclass(frozen=True)
class SegmentedSequence:
    tokens: tuple[tuple[int, ...], ...]
    source: UnitSequence
    score: float

    def flatten(self) -> list[int]:
        return [u for tok in self.tokens for u in tok]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.tokens)

    def to_record(self) -> dict:
        return {
            "id": self.source.id,
            "tokens": [list(t) for t in self.tokens],
            "score": self.score,
        }


def _as_unit_sequence(seq) -> UnitSequence:
    if isinstance(seq, UnitSequence):
        return seq
    units = tuple(int(u) for u in seq)
    return UnitSequence(units, max(units, default=0) + 1)


def _as_batch(units) -> np.ndarray:
    arr = np.asarray(units, dtype=np.int64)
    if arr.ndim != 2:
        raise InvalidInput(f"batch must be an N x n matrix, got shape {arr.shape}")
    if arr.shape[1] == 0:
        raise EmptyInput("cannot segment empty sequences")
    return arr


# Scores closer than this count as equal. Segmentations that tie in exact
# arithmetic can differ by a few ulps once summed in floating point.
TIE_TOL = 1e-9

# Dense code lookup is used when V**L stays below this size.
_DENSE_CODES = 1 << 22


def _score_table(units: np.ndarray, model) -> np.ndarray:
    """Contiguous ``(K, n, N)`` table; entry ``[L-1, i, s]`` scores span (i, L) of row s."""
    N, n = units.shape
    K = model.K
    table = np.full((K, n, N), -np.inf)
    base = int(units.max()) + 1
    cols = np.ascontiguousarray(units.T)
    codes = cols.copy()
    for L in range(1, min(K, n) + 1):
        if L > 1:
            codes = codes[:-1] * base + cols[L - 1:]
        if base ** L <= _DENSE_CODES:
            present = np.zeros(base ** L, dtype=bool)
            present[codes] = True
            lookup = np.zeros(base ** L)
            for code in np.flatnonzero(present):
                span = tuple(int(code) // base ** (L - 1 - j) % base for j in range(L))
                lookup[code] = model.log_prob(span)
            table[L - 1, : n - L + 1] = lookup[codes]
        else:
            windows = np.lib.stride_tricks.sliding_window_view(cols, L, axis=0)
            flat = windows.reshape(-1, L)
            reps, inverse = np.unique(flat, axis=0, return_inverse=True)
            per_rep = np.array([model.log_prob(tuple(r.tolist())) for r in reps])
            table[L - 1, : n - L + 1] = per_rep[inverse.reshape(-1)].reshape(n - L + 1, N)
    return table


def span_score_table(units, model) -> np.ndarray:
    """``table[s, i, L-1]`` = log P of the span of length L starting at i in row s.

    Spans running past the end of the row score ``-inf``.
    """
    return _score_table(_as_batch(units), model).transpose(2, 1, 0)


@numba.njit(cache=True)
def _dp(table, tol):
    K, n, N = table.shape
    best = np.empty((n + 1, N))
    choice = np.zeros((n + 1, N), dtype=np.int64)
    top = np.empty(N)
    best[0, :] = 0.0
    for i in range(1, n + 1):
        top[:] = -np.inf
        for k in range(1, min(K, i) + 1):
            for s in range(N):
                cand = best[i - k, s] + table[k - 1, i - k, s]
                if cand > top[s]:
                    top[s] = cand
        # smallest k among the candidates tied with the maximum
        for k in range(min(K, i), 0, -1):
            for s in range(N):
                cand = best[i - k, s] + table[k - 1, i - k, s]
                if cand >= top[s] - tol:
                    best[i, s] = cand
                    choice[i, s] = k
    return best[n].copy(), choice.T.copy()


def _ends_from_choice(choice: np.ndarray) -> np.ndarray:
    N, n1 = choice.shape
    n = n1 - 1
    ends = np.zeros((N, n), dtype=bool)
    rows = np.arange(N)
    pos = np.full(N, n)
    live = pos > 0
    while live.any():
        r = rows[live]
        ends[r, pos[r] - 1] = True
        pos[r] -= choice[r, pos[r]]
        live = pos > 0
    return ends


def lengths_from_ends(ends_row) -> tuple[int, ...]:
    """Token lengths from a boolean token-end mask."""
    lengths, prev = [], -1
    for i in np.flatnonzero(ends_row):
        lengths.append(int(i) - prev)
        prev = int(i)
    return tuple(lengths)


def segment_batch(units, model) -> tuple[np.ndarray, np.ndarray]:
    """Optimal segmentation for every row of an N x n unit matrix.

    Returns the per-row best scores and an N x n boolean mask that is True
    where a token ends.
    """
    units = _as_batch(units)
    scores, choice = _dp(_score_table(units, model), TIE_TOL)
    return scores, _ends_from_choice(choice)


def _split(units: Sequence[int], lengths: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    out, i = [], 0
    for L in lengths:
        out.append(tuple(units[i:i + L]))
        i += L
    return tuple(out)


def segment(seq, model) -> SegmentedSequence:
    seq = _as_unit_sequence(seq)
    if len(seq) == 0:
        raise EmptyInput("cannot segment an empty sequence")
    scores, ends = segment_batch([seq.units], model)
    return SegmentedSequence(_split(seq.units, lengths_from_ends(ends[0])), seq, float(scores[0]))


@lru_cache(maxsize=None)
def compositions(n: int, K: int) -> tuple[tuple[int, ...], ...]:
    """All ordered splits of n into parts of size 1..K, in left-to-right lexicographic order."""
    if n == 0:
        return ((),)
    out = []
    for k in range(1, min(K, n) + 1):
        out.extend((k,) + rest for rest in compositions(n - k, K))
    return tuple(out)


def _preference_rank(comps) -> np.ndarray:
    """Rank of each composition under the tie-break preference.

    Shorter final span first, then shorter span before it, and so on: the
    order in which the dynamic program's backtrace resolves ties.
    """
    order = sorted(range(len(comps)), key=lambda c: comps[c][::-1])
    rank = np.empty(len(comps), dtype=np.int64)
    rank[np.array(order, dtype=np.int64)] = np.arange(len(comps))
    return rank


@numba.njit(cache=True)
def _enumerate_kernel(table, rank, tol, block, out_score, out_leaf):
    # Depth-first walk over every composition of n into parts <= K; leaves
    # arrive in left-to-right lexicographic order, matching compositions().
    # Partial sums are carried for a whole block of rows at once. A leaf
    # within tol of the best seen so far is a tie and wins only on rank.
    K, n, N = table.shape
    partial = np.empty((n + 1, block))
    top = np.empty(block)
    win_rank = np.empty(block, np.int64)
    stack_k = np.empty(n + 1, np.int64)
    stack_pos = np.empty(n + 1, np.int64)
    for start in range(0, N, block):
        B = min(block, N - start)
        partial[0, :B] = 0.0
        top[:B] = -np.inf
        win_rank[:B] = rank.shape[0]
        depth = 0
        stack_pos[0] = 0
        stack_k[0] = 0
        leaf = 0
        while depth >= 0:
            stack_k[depth] += 1
            k = stack_k[depth]
            pos = stack_pos[depth]
            if k > K or pos + k > n:
                depth -= 1
                continue
            t = table[k - 1, pos, start:start + B]
            p = partial[depth]
            if pos + k == n:
                rk = rank[leaf]
                for r in range(B):
                    v = p[r] + t[r]
                    if v > top[r] + tol:
                        top[r] = v
                        win_rank[r] = rk
                        out_leaf[start + r] = leaf
                        out_score[start + r] = v
                    elif v >= top[r] - tol and rk < win_rank[r]:
                        if v > top[r]:
                            top[r] = v
                        win_rank[r] = rk
                        out_leaf[start + r] = leaf
                        out_score[start + r] = v
                leaf += 1
            else:
                q = partial[depth + 1]
                for r in range(B):
                    q[r] = p[r] + t[r]
                depth += 1
                stack_pos[depth] = pos + k
                stack_k[depth] = 0


def brute_force_batch(units, model) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive search over every segmentation of every row.

    Every composition of n into parts of at most K is scored for every row,
    left to right like the dynamic program. Compositions within
    ``TIE_TOL`` of each other are tied and resolved by the shared
    preference. Returns the same (scores, token-end mask) pair as
    :func:`segment_batch`.
    """
    units = _as_batch(units)
    N, n = units.shape
    if n > BRUTE_FORCE_LIMIT:
        raise TooLargeForOracle(f"length {n} exceeds brute-force limit {BRUTE_FORCE_LIMIT}")
    comps = compositions(n, model.K)
    table = _score_table(units, model)
    scores = np.empty(N)
    leaf = np.empty(N, dtype=np.int64)
    _enumerate_kernel(table, _preference_rank(comps), TIE_TOL, min(N, 4096), scores, leaf)

    comp_ends = np.zeros((len(comps), n), dtype=bool)
    for c, lengths in enumerate(comps):
        comp_ends[c, np.cumsum(lengths) - 1] = True
    return scores, comp_ends[leaf]


def segment_brute_force(seq, model) -> SegmentedSequence:
    seq = _as_unit_sequence(seq)
    if len(seq) == 0:
        raise EmptyInput("cannot segment an empty sequence")
    if len(seq) > BRUTE_FORCE_LIMIT:
        raise TooLargeForOracle(f"length {len(seq)} exceeds brute-force limit {BRUTE_FORCE_LIMIT}")
    scores, ends = brute_force_batch([seq.units], model)
    return SegmentedSequence(_split(seq.units, lengths_from_ends(ends[0])), seq, float(scores[0]))


def segmentation_score(units: Sequence[int], lengths: Sequence[int], model) -> float:
    """Left-to-right sum of span log-probs for a given split."""
    total = 0.0
    for tok in _split(tuple(units), lengths):
        total = total + model.log_prob(tok)
    return total


def compression_report(corpus: Iterable, model) -> dict:
    """Units versus unit-language tokens over a corpus."""
    corpus = [_as_unit_sequence(s) for s in corpus]
    if not corpus:
        raise InsufficientData("corpus is empty")
    detail = []
    n_units = n_tokens = 0
    for seq in corpus:
        m = len(segment(seq, model).tokens) if len(seq) else 0
        detail.append({"id": seq.id, "units": len(seq), "tokens": m})
        n_units += len(seq)
        n_tokens += m
    count = len(corpus)
    return {
        "sequences": count,
        "mean_units": n_units / count,
        "mean_tokens": n_tokens / count,
        "ratio": n_tokens / n_units if n_units else 1.0,
        "detail": detail,
    }


class TokenVocabulary:
    """Token-to-ID table for unit-language tokens.

    IDs ``0..V-1`` are the single units, so every sequence stays encodable.
    The remaining slots go to the most frequent multi-unit tokens seen in
    the segmented training corpus (ties broken by span order).
    """

    def __init__(self, spans: Sequence[tuple[int, ...]], vocab_size: int):
        self.vocab_size = vocab_size
        self.spans = [(u,) for u in range(vocab_size)] + [s for s in spans if len(s) > 1]
        self.index = {s: i for i, s in enumerate(self.spans)}
        self.max_len = max(len(s) for s in self.spans)

    def __len__(self) -> int:
        return len(self.spans)

    def __contains__(self, span) -> bool:
        return tuple(span) in self.index

    @classmethod
    def build(cls, segmented: Iterable[SegmentedSequence], vocab_size: int, size: int = 16384):
        counts = Counter(t for s in segmented for t in s.tokens if len(t) > 1)
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ranked[: max(0, size - vocab_size)], vocab_size)

    def _resplit(self, span: tuple[int, ...]) -> list[tuple[int, ...]]:
        out, i = [], 0
        while i < len(span):
            for L in range(min(self.max_len, len(span) - i), 0, -1):
                piece = span[i:i + L]
                if piece in self.index:
                    out.append(piece)
                    i += L
                    break
        return out

    def encode(self, tokens: Iterable[Sequence[int]]) -> list[int]:
        ids = []
        for tok in tokens:
            tok = tuple(tok)
            if tok in self.index:
                ids.append(self.index[tok])
            else:
                ids.extend(self.index[p] for p in self._resplit(tok))
        return ids

    def decode(self, ids: Iterable[int]) -> list[int]:
        return [u for i in ids for u in self.spans[i]]
