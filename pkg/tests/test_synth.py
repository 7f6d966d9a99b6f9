import math

import numpy as np
import pytest

from dnlpos.fingerprints import write_dataset
from dnlpos.synth import RadioMapConfig, generate, inject_outliers, log_distance_rss, write_radio_map


def test_log_distance_anchors():
    assert log_distance_rss(0.3) == -30.0
    assert log_distance_rss(1.0) == -30.0
    assert log_distance_rss(10.0, -30.0, 3.0) == pytest.approx(-60.0, abs=1e-12)


def test_colocated_fp_sees_p0():
    cfg = RadioMapConfig(n_waps=1, n_fps=1, sigma=0.0, width=0.5, height=0.5, seed=3)
    fps, waps = generate(cfg)
    assert fps[0].observations[waps[0].mac] == -30.0


def test_detection_radius():
    radius = 10 ** ((-30 + 95) / 30)
    assert radius == pytest.approx(147.0, abs=0.5)
    cfg = RadioMapConfig(width=400, height=400, n_waps=10, n_fps=300, sigma=0.0, seed=9)
    fps, waps = generate(cfg)
    wxy = {w.mac: (w.x, w.y) for w in waps}
    for f in fps:
        for w in waps:
            d = math.dist(f.position, wxy[w.mac])
            assert (w.mac in f.observations) == (d <= radius + 1e-9)


def test_monotone_without_shadowing():
    fps, waps = generate(RadioMapConfig(n_fps=200, n_waps=3, sigma=0.0, seed=2))
    w = waps[0]
    pts = sorted((math.dist(f.position, (w.x, w.y)), f.observations[w.mac]) for f in fps if w.mac in f.observations)
    far = [(d, r) for d, r in pts if d > 1.0]
    assert all(r1 > r2 for (_, r1), (_, r2) in zip(far, far[1:]))


def test_every_fp_observes_something():
    fps, _ = generate(RadioMapConfig(width=500, height=500, n_waps=3, n_fps=100, seed=4))
    assert all(len(f.observations) >= 1 for f in fps)


def test_deterministic_csv(tmp_path):
    cfg = RadioMapConfig(n_fps=50, n_waps=8, seed=17)
    for d in ("a", "b"):
        write_radio_map(*generate(cfg), tmp_path / d)
    for name in ("fingerprints.csv", "observations.csv", "waps_truth.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_grid_mode():
    fps, _ = generate(RadioMapConfig(n_fps=20, n_waps=5, width=10, height=8, grid=True, seed=1))
    xs = sorted({f.position[0] for f in fps})
    assert len(fps) == 20 and len(xs) < 20


def test_outliers(small_map):
    fps, _ = small_map
    same, ids = inject_outliers(fps, 0.0, 1)
    assert same == fps and not ids
    allbad, ids = inject_outliers(fps, 1.0, 1)
    assert ids == {f.fp_id for f in fps}
    assert all(a.observations == b.observations for a, b in zip(allbad, fps))
    big = generate(RadioMapConfig(n_fps=2000, n_waps=3, seed=0))[0]
    _, ids = inject_outliers(big, 0.05, 3, (0, 0, 100, 80))
    assert len(ids) == 100
    out, ids = inject_outliers(fps, 0.1, 8, (0, 0, 100, 80))
    changed = {a.fp_id for a, b in zip(out, fps) if a.position != b.position}
    assert changed == ids and len(ids) == math.ceil(0.1 * len(fps))
    with pytest.raises(ValueError):
        inject_outliers(fps, 1.5, 0)
