"""Seeded synthetic data for demos, tests and the bundled toy corpus."""

from __future__ import annotations

import json

import numpy as np

from .unitseq import UnitSequence


def make_motifs(rng: np.random.Generator, n_motifs: int, vocab_size: int,
                min_len: int = 2, max_len: int = 4) -> list[tuple[int, ...]]:
    """Distinct unit motifs with no adjacent repeats inside a motif."""
    motifs: list[tuple[int, ...]] = []
    while len(motifs) < n_motifs:
        L = int(rng.integers(min_len, max_len + 1))
        m = [int(rng.integers(vocab_size))]
        while len(m) < L:
            u = int(rng.integers(vocab_size))
            if u != m[-1]:
                m.append(u)
        if tuple(m) not in motifs:
            motifs.append(tuple(m))
    return motifs


def motif_corpus(seed: int = 0, n_seqs: int = 200, vocab_size: int = 50, n_motifs: int = 12,
                 motifs_per_seq: tuple[int, int] = (6, 16), min_len: int = 2,
                 max_len: int = 4, repeat: tuple[int, int] = (1, 3)) -> list[UnitSequence]:
    """Sequences built by chaining random motifs.

    Each unit of a chosen motif is repeated ``repeat`` times, imitating the
    frame-level runs produced by quantizing continuous speech features.
    """
    rng = np.random.default_rng(seed)
    motifs = make_motifs(rng, n_motifs, vocab_size, min_len, max_len)
    corpus = []
    for i in range(n_seqs):
        units: list[int] = []
        for _ in range(int(rng.integers(motifs_per_seq[0], motifs_per_seq[1] + 1))):
            for u in motifs[int(rng.integers(len(motifs)))]:
                units.extend([u] * int(rng.integers(repeat[0], repeat[1] + 1)))
        corpus.append(UnitSequence(tuple(units), vocab_size, f"utt{i:04d}"))
    return corpus


def planted_clusters(seed: int = 0, n_points: int = 200, n_centers: int = 4, dim: int = 2,
                     spread: float = 0.3, separation: float = 10.0):
    """Points scattered around well-separated planted centers; returns (points, centers)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-separation, separation, size=(n_centers, dim))
    labels = np.arange(n_points) % n_centers
    points = centers[labels] + rng.normal(0.0, spread, size=(n_points, dim))
    return points, centers


TOY_CORPUS = "toy_units.jsonl"


def toy_corpus() -> list[UnitSequence]:
    """The bundled toy unit corpus (60 frame-level sequences over 20 units)."""
    from importlib import resources

    text = resources.files(__package__).joinpath("data", TOY_CORPUS).read_text(encoding="utf-8")
    return [UnitSequence.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
