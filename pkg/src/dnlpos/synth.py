"""Synthetic radio maps from a log-distance path-loss model.

``RSS = p0 - 10 * eta * log10(max(d, 1)) + N(0, sigma^2)`` in dBm, with
readings below the detection threshold dropped.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fingerprints import Fingerprint, write_dataset


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadioMapConfig:
    width: float = 100.0
    height: float = 80.0
    n_waps: int = 60
    n_fps: int = 2000
    p0: float = -30.0
    eta: float = 3.0
    sigma: float = 4.0
    threshold: float = -95.0
    seed: int = 0
    floor: int = 1
    grid: bool = False

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.n_waps <= 0 or self.n_fps <= 0:
            raise ValueError("extents and counts must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.threshold < self.p0:
            raise ValueError("detection threshold must be below p0")


@dataclass(frozen=True)
class Wap:
    mac: str
    x: float
    y: float


def mac_address(i: int) -> str:
    """Locally administered MAC; zero padding keeps lexicographic order = numeric order."""
    return "02:00:" + ":".join(f"{(i >> s) & 0xFF:02x}" for s in (24, 16, 8, 0))


def log_distance_rss(d, p0=-30.0, eta=3.0):
    return p0 - 10.0 * eta * np.log10(np.maximum(d, 1.0))


def _grid_positions(cfg: RadioMapConfig) -> np.ndarray:
    cols = max(1, round(math.sqrt(cfg.n_fps * cfg.width / cfg.height)))
    rows = math.ceil(cfg.n_fps / cols)
    xs = (np.arange(cols) + 0.5) * cfg.width / cols
    ys = (np.arange(rows) + 0.5) * cfg.height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])[:cfg.n_fps]


def generate(cfg: RadioMapConfig):
    """Return ``(fingerprints, waps)``; deterministic in ``cfg``.

    A fingerprint that detects nothing is redrawn (new position unless in
    grid mode, new shadowing) up to 100 times.
    """
    wap_seq, pos_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    wap_rng = np.random.default_rng(wap_seq)
    pos_rng = np.random.default_rng(pos_seq)
    noise_rng = np.random.default_rng(noise_seq)

    wap_xy = wap_rng.uniform((0.0, 0.0), (cfg.width, cfg.height), size=(cfg.n_waps, 2))
    waps = [Wap(mac_address(i), float(x), float(y)) for i, (x, y) in enumerate(wap_xy)]
    grid = _grid_positions(cfg) if cfg.grid else None

    fps = []
    for fid in range(cfg.n_fps):
        for _ in range(100):
            xy = grid[fid] if grid is not None else pos_rng.uniform((0.0, 0.0), (cfg.width, cfg.height))
            d = np.hypot(wap_xy[:, 0] - xy[0], wap_xy[:, 1] - xy[1])
            rss = log_distance_rss(d, cfg.p0, cfg.eta)
            if cfg.sigma > 0:
                rss = rss + noise_rng.normal(0.0, cfg.sigma, size=cfg.n_waps)
            seen = rss >= cfg.threshold
            if seen.any():
                break
        else:
            raise GenerationError(f"fingerprint {fid} detected no WAP in 100 attempts")
        obs = {waps[j].mac: float(rss[j]) for j in np.flatnonzero(seen)}
        fps.append(Fingerprint(fid, cfg.floor, (float(xy[0]), float(xy[1])), obs))
    return fps, waps


def write_radio_map(fps: Sequence[Fingerprint], waps: Sequence[Wap], directory) -> None:
    d = Path(directory)
    write_dataset(fps, d)
    with (d / "waps_truth.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mac", "x", "y"])
        for wap in waps:
            w.writerow([wap.mac, repr(wap.x), repr(wap.y)])


def inject_outliers(fps: Sequence[Fingerprint], fraction: float, seed: int, bounds=None):
    """Replace the labels of ``ceil(fraction * n)`` random fingerprints.

    New positions are uniform over ``bounds = (x_min, y_min, x_max, y_max)``,
    defaulting to the bounding box of the input positions.  RSS values are
    left alone.  Returns ``(corrupted_copy, corrupted_ids)``.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    fps = list(fps)
    n = len(fps)
    n_bad = min(n, math.ceil(round(fraction * n, 9)))
    if bounds is None and fps:
        pos = np.array([fp.position for fp in fps])
        bounds = (*pos.min(axis=0), *pos.max(axis=0))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    picked = np.sort(rng.choice(n, size=n_bad, replace=False)) if n_bad else np.array([], dtype=int)
    out = list(fps)
    for i in picked:
        xy = rng.uniform(bounds[:2], bounds[2:])
        out[i] = fps[i].with_position((float(xy[0]), float(xy[1])))
    return out, frozenset(fps[i].fp_id for i in picked)
