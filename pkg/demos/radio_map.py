"""
A synthetic radio map
=====================

Fingerprints are drawn uniformly over a 100 x 80 m floor.  Every WAP follows
a log-distance path-loss law with Gaussian shadowing, and readings below the
detection threshold are dropped.
"""

import numpy as np

from dnlpos import RadioMapConfig, generate

cfg = RadioMapConfig(n_fps=2000, n_waps=60, sigma=4.0, seed=42)
fps, waps = generate(cfg)
print(f"{len(fps)} fingerprints, {len(waps)} access points")

# How many WAPs does a fingerprint hear?
heard = np.array([len(f.observations) for f in fps])
print(f"WAPs per fingerprint: min {heard.min()}, median {np.median(heard):.0f}, max {heard.max()}")

# RSS against distance for one access point.  Without shadowing the points
# would sit on p0 - 10 eta log10(d).
w = waps[0]
pts = np.array([(np.hypot(f.position[0] - w.x, f.position[1] - w.y), f.observations[w.mac])
                for f in fps if w.mac in f.observations])
for lo, hi in [(1, 5), (5, 10), (10, 20), (20, 40), (40, 80)]:
    sel = pts[(pts[:, 0] >= lo) & (pts[:, 0] < hi), 1]
    model = cfg.p0 - 10 * cfg.eta * np.log10((lo + hi) / 2)
    print(f"{lo:>3}-{hi:<3} m: mean RSS {sel.mean():7.2f} dBm (law at midpoint {model:7.2f}), n={len(sel)}")
