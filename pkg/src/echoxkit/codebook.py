"""K-means codebook training and nearest-centroid quantization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientData, InvalidInput
from .unitseq import UnitSequence

# frames per distance block in assign; bounds the T x k x D temporary
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray
    seed: int = 0
    inertia_history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _as_frames(frames) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] < 1:
        raise InvalidInput(f"frames must be a T x D matrix with D >= 1, got shape {frames.shape}")
    if not np.all(np.isfinite(frames)):
        raise InvalidInput("frames contain non-finite values")
    return frames


def squared_distances(frames: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact T x k squared L2 distances (difference form, no norm expansion)."""
    T, D = frames.shape
    k = centroids.shape[0]
    out = np.empty((T, k))
    step = max(1, _CHUNK_ELEMS // max(1, k * D))
    for start in range(0, T, step):
        diff = frames[start:start + step, None, :] - centroids[None, :, :]
        out[start:start + step] = np.einsum("tkd,tkd->tk", diff, diff)
    return out


def _kmeans_pp(frames: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    T = frames.shape[0]
    chosen = [int(rng.integers(T))]
    d2 = squared_distances(frames, frames[chosen[0]][None])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(T, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, squared_distances(frames, frames[idx][None])[:, 0])
    return frames[chosen].copy()


def train_codebook(frames, k: int, max_iters: int = 100, seed: int = 0) -> Codebook:
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters (and clusters that collapse onto another centroid) are
    re-seeded with the frames farthest from their current centroid. The
    inertia recorded after each assignment step never increases.
    """
    frames = _as_frames(frames)
    if k < 1:
        raise InvalidInput(f"k must be positive, got {k}")
    if max_iters < 1:
        raise InvalidInput(f"max_iters must be positive, got {max_iters}")
    T = frames.shape[0]
    if T < k:
        raise InsufficientData(f"{T} frames cannot support {k} clusters")
    n_distinct = np.unique(frames, axis=0).shape[0]
    if n_distinct < k:
        raise InsufficientData(f"only {n_distinct} distinct frames for {k} clusters")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(frames, k, rng)
    labels = None
    history = []
    for _ in range(max_iters):
        d2 = squared_distances(frames, centroids)
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(T), new_labels]
        history.append(float(point_d2.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = _update(frames, labels, centroids, point_d2)
    return Codebook(centroids, seed, tuple(history))


def _update(frames, labels, centroids, point_d2):
    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, frames)
    new = centroids.copy()
    live = counts > 0
    new[live] = sums[live] / counts[live, None]

    # a cluster whose mean lands on an earlier centroid is treated as empty
    dead = list(np.flatnonzero(~live))
    seen = {}
    for c in np.flatnonzero(live):
        key = new[c].tobytes()
        if key in seen:
            dead.append(c)
        else:
            seen[key] = c
    if not dead:
        return new
    taken = set(seen)
    for idx in np.argsort(-point_d2, kind="stable"):
        if not dead:
            break
        if point_d2[idx] <= 0.0:
            break
        key = frames[idx].tobytes()
        if key in taken:
            continue
        taken.add(key)
        new[dead.pop(0)] = frames[idx]
    return new


def assign(frames, codebook: Codebook, id: str = "") -> UnitSequence:
    """Map every frame to its nearest centroid; ties go to the lowest index."""
    frames = _as_frames(frames)
    if frames.shape[1] != codebook.dim:
        raise DimensionMismatch(
            f"frame dimension {frames.shape[1]} != centroid dimension {codebook.dim}"
        )
    if frames.shape[0] == 0:
        return UnitSequence((), codebook.k, id)
    labels = squared_distances(frames, codebook.centroids).argmin(axis=1)
    return UnitSequence(tuple(labels.tolist()), codebook.k, id)


def inertia(frames, codebook: Codebook) -> float:
    frames = _as_frames(frames)
    return float(squared_distances(frames, codebook.centroids).min(axis=1).sum())
