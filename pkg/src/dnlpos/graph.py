"""Heterogeneous graph encoding of a local community.

FP nodes carry ``(x_norm, y_norm, is_target)``; the target's coordinates are
masked to ``(0, 0)`` and its flag is 1.  WAP nodes carry a MAC index (0 is the
shared bucket for MACs outside the training index).  Each observation becomes
one undirected FP-WAP edge weighted by the normalized RSS.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .fingerprints import Fingerprint, WapIndex
from .neighborhood import LocalCommunity

RSS_FLOOR_DBM = -100.0
RSS_CEIL_DBM = -30.0


@dataclass(frozen=True)
class NormalizationParams:
    origin: tuple[float, float]
    scale: float
    rss_floor: float = RSS_FLOOR_DBM
    rss_ceil: float = RSS_CEIL_DBM

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.rss_ceil > self.rss_floor:
            raise ValueError("rss_ceil must exceed rss_floor")

    def normalize(self, xy) -> np.ndarray:
        return (np.asarray(xy, dtype=float) - np.asarray(self.origin)) / self.scale

    def denormalize(self, xy) -> np.ndarray:
        return np.asarray(self.origin) + self.scale * np.asarray(xy, dtype=float)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "scale": self.scale,
                "rss_floor": self.rss_floor, "rss_ceil": self.rss_ceil}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(float(v) for v in d["origin"]), float(d["scale"]),
                   float(d["rss_floor"]), float(d["rss_ceil"]))


def fit_normalization(train_fps: Sequence[Fingerprint]) -> NormalizationParams:
    """Per-axis minimum as origin, one isotropic scale (the larger extent, at least 1 m)."""
    if not train_fps:
        raise ValueError("cannot fit normalization on zero fingerprints")
    pos = np.array([fp.position for fp in train_fps], dtype=float)
    lo = pos.min(axis=0)
    extent = pos.max(axis=0) - lo
    return NormalizationParams((float(lo[0]), float(lo[1])), max(float(extent.max()), 1.0))


def edge_weight(rss: float, norm: NormalizationParams) -> float:
    w = (rss - norm.rss_floor) / (norm.rss_ceil - norm.rss_floor)
    return min(max(w, 0.0), 1.0)


@dataclass(frozen=True)
class CommunityGraph:
    """Node and edge tables of one community graph.

    FP node 0 is always the target.  Edge endpoints index into the FP and WAP
    node tables separately.
    """

    fp_ids: np.ndarray        # (k+1,) int
    fp_features: np.ndarray   # (k+1, 3)
    wap_macs: np.ndarray      # (m,) int, sorted ascending
    edge_fp: np.ndarray       # (e,) int
    edge_wap: np.ndarray      # (e,) int
    edge_weight: np.ndarray   # (e,) float in [0, 1]
    label: Optional[tuple[float, float]]
    norm: NormalizationParams

    @property
    def n_fp(self) -> int:
        return len(self.fp_ids)

    @property
    def n_wap(self) -> int:
        return len(self.wap_macs)

    @property
    def n_edges(self) -> int:
        return len(self.edge_weight)

    def to_dict(self) -> dict:
        return {
            "fp_nodes": [
                {"node_id": i, "fp_id": int(f), "feature": [float(v) for v in feat]}
                for i, (f, feat) in enumerate(zip(self.fp_ids, self.fp_features))
            ],
            "wap_nodes": [{"node_id": j, "mac_index": int(m)} for j, m in enumerate(self.wap_macs)],
            "edges": [[int(a), int(b), float(w)]
                      for a, b, w in zip(self.edge_fp, self.edge_wap, self.edge_weight)],
            "label": None if self.label is None else [float(v) for v in self.label],
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    def permuted(self, fp_perm=None, wap_perm=None, edge_perm=None, rng=None) -> "CommunityGraph":
        """Same graph with relabeled nodes and reordered edges.

        ``fp_perm[i]`` is the old index of new FP node ``i`` (likewise for
        WAPs).  Used to check order invariance; the target need not stay at 0.
        """
        if rng is not None:
            fp_perm = rng.permutation(self.n_fp)
            wap_perm = rng.permutation(self.n_wap)
            edge_perm = rng.permutation(self.n_edges)
        fp_perm = np.arange(self.n_fp) if fp_perm is None else np.asarray(fp_perm)
        wap_perm = np.arange(self.n_wap) if wap_perm is None else np.asarray(wap_perm)
        edge_perm = np.arange(self.n_edges) if edge_perm is None else np.asarray(edge_perm)
        fp_new = np.argsort(fp_perm)
        wap_new = np.argsort(wap_perm)
        return CommunityGraph(
            fp_ids=self.fp_ids[fp_perm],
            fp_features=self.fp_features[fp_perm],
            wap_macs=self.wap_macs[wap_perm],
            edge_fp=fp_new[self.edge_fp[edge_perm]],
            edge_wap=wap_new[self.edge_wap[edge_perm]],
            edge_weight=self.edge_weight[edge_perm],
            label=self.label,
            norm=self.norm,
        )


def build_graph(community: LocalCommunity, norm: NormalizationParams, index: WapIndex,
                labeled: bool) -> CommunityGraph:
    members = community.members
    features = np.zeros((len(members), 3))
    features[0, 2] = 1.0
    for i, fp in enumerate(members[1:], start=1):
        features[i, :2] = norm.normalize(fp.position)

    # (fp node, mac index) -> weight; several unknown MACs on one FP share
    # the bucket edge and keep the strongest weight.
    edges: dict[tuple[int, int], float] = {}
    for i, fp in enumerate(members):
        for mac, rss in fp.observations.items():
            key = (i, index.get(mac))
            w = edge_weight(rss, norm)
            if key not in edges or w > edges[key]:
                edges[key] = w

    macs = np.array(sorted({m for _, m in edges}), dtype=np.int64)
    wap_node = {int(m): j for j, m in enumerate(macs)}
    keys = sorted(edges)
    return CommunityGraph(
        fp_ids=np.array([fp.fp_id for fp in members], dtype=np.int64),
        fp_features=features,
        wap_macs=macs,
        edge_fp=np.array([i for i, _ in keys], dtype=np.int64),
        edge_wap=np.array([wap_node[m] for _, m in keys], dtype=np.int64),
        edge_weight=np.array([edges[key] for key in keys], dtype=float),
        label=tuple(community.target.position) if labeled else None,
        norm=norm,
    )
