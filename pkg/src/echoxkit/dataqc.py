"""Transcript quality control: word error rate, WER filtering, corpus tables."""

from __future__ import annotations

import csv
import string
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyReference, FormatError, InvalidInput

DEFAULT_WER_THRESHOLD = 0.05
HISTOGRAM_EDGES = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)


def normalize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation per word."""
    words = (w.strip(string.punctuation) for w in text.lower().split())
    return [w for w in words if w]


@dataclass(frozen=True)
class TranscriptPair:
    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]
    id: str = ""

    @classmethod
    def from_text(cls, ref: str, hyp: str, id: str = "") -> "TranscriptPair":
        return cls(tuple(normalize(ref)), tuple(normalize(hyp)), id)

    @classmethod
    def from_record(cls, record: dict) -> "TranscriptPair":
        try:
            return cls.from_text(str(record["ref"]), str(record["hyp"]), str(record.get("id", "")))
        except KeyError as exc:
            raise FormatError(f"transcript record missing field {exc}") from None


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    """Unit-cost Levenshtein distance between two word lists."""
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i]
        for j, h in enumerate(hyp, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def wer(pair_or_ref, hyp=None) -> float:
    """(substitutions + insertions + deletions) / reference length.

    Accepts a :class:`TranscriptPair`, or two strings / word lists.
    """
    if hyp is None:
        ref, hyp = pair_or_ref.reference, pair_or_ref.hypothesis
    else:
        ref = normalize(pair_or_ref) if isinstance(pair_or_ref, str) else list(pair_or_ref)
        hyp = normalize(hyp) if isinstance(hyp, str) else list(hyp)
    if not ref:
        raise EmptyReference("reference transcript is empty")
    return edit_distance(ref, hyp) / len(ref)


def filter_corpus(pairs: Iterable[TranscriptPair], threshold: float = DEFAULT_WER_THRESHOLD):
    """Keep pairs with WER strictly below ``threshold``.

    Returns ``(retained, report)``. Pairs with an empty reference are
    dropped and counted under ``empty_reference``.
    """
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInput(f"threshold must lie in [0, 1], got {threshold}")
    retained, dropped, values = [], [], []
    empty = 0
    for pair in pairs:
        try:
            w = wer(pair)
        except EmptyReference:
            empty += 1
            dropped.append(pair)
            continue
        values.append(w)
        (retained if w < threshold else dropped).append(pair)
    edges = np.array(HISTOGRAM_EDGES + (np.inf,))
    counts, _ = np.histogram(np.clip(values, 0, None), bins=edges) if values else (np.zeros(len(edges) - 1, int), None)
    labels = [f"[{lo:g},{hi:g})" for lo, hi in zip(edges[:-1], edges[1:])]
    report = {
        "threshold": threshold,
        "retained": len(retained),
        "dropped": len(dropped),
        "empty_reference": empty,
        "mean_wer": float(np.mean(values)) if values else None,
        "histogram": dict(zip(labels, (int(c) for c in counts))),
    }
    return retained, report


def read_manifest(path) -> list[dict]:
    """Rows of a manifest CSV with columns id, task, size, duration_hours."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "task", "size", "duration_hours"} - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: manifest missing columns {sorted(missing)}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append({
                    "id": row["id"],
                    "task": row["task"],
                    "size": int(row["size"].replace(",", "")),
                    "duration_hours": float(row["duration_hours"].replace(",", "")),
                })
            except (ValueError, AttributeError):
                raise FormatError(f"{path}:{lineno}: bad size or duration") from None
    return rows


def corpus_stats(records: Iterable[dict]) -> dict:
    """Per-task and overall size / duration totals."""
    tasks: "OrderedDict[str, dict]" = OrderedDict()
    total_size, total_hours = 0, 0.0
    for rec in records:
        size, hours = int(rec["size"]), float(rec["duration_hours"])
        if hours < 0 or size < 0:
            raise InvalidInput(f"negative size or duration in record {rec.get('id')!r}")
        entry = tasks.setdefault(rec["task"], {"rows": 0, "size": 0, "duration_hours": 0.0})
        entry["rows"] += 1
        entry["size"] += size
        entry["duration_hours"] += hours
        total_size += size
        total_hours += hours
    return {
        "tasks": dict(tasks),
        "total": {"rows": sum(t["rows"] for t in tasks.values()), "size": total_size,
                  "duration_hours": total_hours},
    }


def format_stats(stats: dict) -> str:
    lines = [f"{'Task':<8}{'Rows':>6}{'Size':>14}{'Duration(H)':>14}"]
    for task, t in stats["tasks"].items():
        lines.append(f"{task:<8}{t['rows']:>6}{t['size']:>14,}{t['duration_hours']:>14,.0f}")
    t = stats["total"]
    lines.append(f"{'Total':<8}{t['rows']:>6}{t['size']:>14,}{t['duration_hours']:>14,.0f}")
    return "\n".join(lines)
