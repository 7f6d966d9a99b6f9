"""Signal-space neighbor search and the KNN / WKNN position baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fingerprints import Fingerprint, WapIndex, rss_matrix, rss_vector


class InsufficientCandidatesError(ValueError):
    def __init__(self, n_candidates: int, k: int):
        self.n_candidates = n_candidates
        self.k = k
        super().__init__(f"need at least k={k} candidate fingerprints, got {n_candidates}")


@dataclass(frozen=True)
class LocalCommunity:
    """A target fingerprint and its ``k`` nearest neighbors in signal space.

    ``neighbors`` is ordered by ascending distance, ties by ascending fp_id.
    """

    target: Fingerprint
    neighbors: tuple[tuple[Fingerprint, float], ...]

    @property
    def k(self) -> int:
        return len(self.neighbors)

    @property
    def members(self) -> list[Fingerprint]:
        return [self.target] + [fp for fp, _ in self.neighbors]

    @property
    def distances(self) -> np.ndarray:
        return np.array([d for _, d in self.neighbors])


def manhattan_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"RSS vectors must be 1-D with equal length, got {a.shape} and {b.shape}")
    return float(np.abs(a - b).sum())


class ReferenceSet:
    """Candidate fingerprints with their RSS matrix precomputed.

    Reuse one instance when many targets search the same candidates; it
    avoids re-vectorizing the reference fingerprints for every query.
    """

    def __init__(self, candidates: Sequence[Fingerprint], index: WapIndex):
        self.fps = list(candidates)
        self.index = index
        self.matrix = rss_matrix(self.fps, index)
        self.ids = np.array([fp.fp_id for fp in self.fps], dtype=np.int64)
        self.positions = np.array([fp.position for fp in self.fps], dtype=float).reshape(-1, 2)
        self._row = {int(i): r for r, i in enumerate(self.ids)}

    def __len__(self):
        return len(self.fps)

    def nearest(self, target: Fingerprint, k: int, exclude_self: bool = False):
        """Return ``(rows, distances)`` of the ``k`` nearest candidates."""
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        dist = np.abs(self.matrix - rss_vector(target, self.index)).sum(axis=1)
        keep = np.ones(len(self.fps), dtype=bool)
        own = self._row.get(target.fp_id)
        if own is not None:
            if not exclude_self:
                raise ValueError(f"target fp_id {target.fp_id} is among its own candidates")
            keep[own] = False
        n = int(keep.sum())
        if n < k:
            raise InsufficientCandidatesError(n, k)
        rows = np.flatnonzero(keep)
        order = np.lexsort((self.ids[rows], dist[rows]))[:k]
        rows = rows[order]
        return rows, dist[rows]

    def community(self, target: Fingerprint, k: int, exclude_self: bool = False) -> LocalCommunity:
        rows, dist = self.nearest(target, k, exclude_self)
        return LocalCommunity(target, tuple((self.fps[r], float(d)) for r, d in zip(rows, dist)))


def select_neighbors(target: Fingerprint, candidates: Sequence[Fingerprint], k: int,
                     index: WapIndex) -> LocalCommunity:
    """Pick the ``k`` candidates closest to ``target`` in Manhattan RSS distance.

    The target must not be among the candidates (checked by fp_id).
    """
    return ReferenceSet(candidates, index).community(target, k)


def _as_reference(train, index) -> ReferenceSet:
    if isinstance(train, ReferenceSet):
        return train
    return ReferenceSet(train, index)


def knn_predict(target: Fingerprint, train, k: int, index: WapIndex) -> np.ndarray:
    """Unweighted mean position of the ``k`` nearest training fingerprints.

    ``train`` may be a list of fingerprints or a prebuilt ``ReferenceSet``.
    """
    ref = _as_reference(train, index)
    rows, _ = ref.nearest(target, k)
    return ref.positions[rows].mean(axis=0)


def wknn_predict(target: Fingerprint, train, k: int, index: WapIndex) -> np.ndarray:
    """Inverse-distance weighted mean of the ``k`` nearest positions.

    If any selected neighbor sits at distance 0 the result is the plain mean
    of the zero-distance neighbors.
    """
    ref = _as_reference(train, index)
    rows, dist = ref.nearest(target, k)
    pos = ref.positions[rows]
    exact = dist == 0
    if exact.any():
        return pos[exact].mean(axis=0)
    w = 1.0 / dist
    return (w[:, None] * pos).sum(axis=0) / w.sum()


def predict_all(method: str, targets: Sequence[Fingerprint], train: Sequence[Fingerprint], k: int,
                index: WapIndex) -> np.ndarray:
    fn = {"knn": knn_predict, "wknn": wknn_predict}[method]
    ref = ReferenceSet(train, index)
    return np.array([fn(t, ref, k, index) for t in targets]).reshape(-1, 2)
