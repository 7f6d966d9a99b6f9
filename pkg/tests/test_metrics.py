import math

import numpy as np
import pytest

from dnlpos.metrics import compute_report, emit_comparison, squared_error


def test_squared_error():
    assert squared_error((1, 2), (1, 2)) == 0
    assert squared_error((3, 4), (0, 0)) == 25
    assert squared_error((0, 0), (3, 4)) == 25


def test_three_four_five():
    r = compute_report([(3, 0), (0, 4), (3, 4)], [(0, 0)] * 3, "x")
    assert r.mae == pytest.approx(4.0, abs=1e-12)
    assert r.rmse == pytest.approx(math.sqrt(50 / 3), abs=1e-12)
    assert round(r.rmse, 4) == 4.0825


def test_exact_predictions():
    pts = [(1.0, 2.0), (3.0, -1.0)]
    r = compute_report(pts, pts, "x")
    assert (r.mae, r.rmse, r.cdf68, r.cdf95) == (0, 0, 0, 0)


def test_nearest_rank_on_1_to_100():
    d = np.arange(1, 101, dtype=float)
    r = compute_report(np.column_stack([d, np.zeros(100)]), np.zeros((100, 2)), "x")
    assert r.cdf68 == 68.0
    assert r.cdf95 == 95.0


def test_singleton():
    r = compute_report([(1, 1)], [(4, 5)], "x")
    assert r.mae == r.rmse == r.cdf68 == r.cdf95 == 5.0


def test_invariants(rng):
    for _ in range(30):
        n = int(rng.integers(1, 60))
        p, t = rng.normal(0, 10, (n, 2)), rng.normal(0, 10, (n, 2))
        r = compute_report(p, t, "x")
        assert r.mae <= r.rmse + 1e-12
        assert r.cdf68 <= r.cdf95
        perm = rng.permutation(n)
        r2 = compute_report(p[perm], t[perm], "x")
        assert (r.mae, r.rmse, r.cdf68, r.cdf95) == pytest.approx((r2.mae, r2.rmse, r2.cdf68, r2.cdf95), abs=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        compute_report([(0, 0)], [(0, 0), (1, 1)], "x")
    with pytest.raises(ValueError):
        compute_report(np.zeros((0, 2)), np.zeros((0, 2)), "x")


def test_emit_comparison(tmp_path):
    a = compute_report([(9.05, 0)], [(0, 0)], "KNN")
    b = compute_report([(1, 0), (2, 0)], [(0, 0), (0, 0)], "WKNN")
    md = emit_comparison([a, b], tmp_path, notes=["hello"])
    rows = [l for l in md.splitlines() if l.startswith("| ") and "Algorithm" not in l]
    assert rows[0].startswith("| KNN | 9.05 |")
    assert rows[1].startswith("| WKNN |")
    assert "hello" in (tmp_path / "report.md").read_text()
    lines = (tmp_path / "cdf.csv").read_text().splitlines()
    assert lines[0] == "algorithm,error_m,cum_fraction"
    assert lines[1:] == ["KNN,9.05,1.0", "WKNN,1.0,0.5", "WKNN,2.0,1.0"]
    with pytest.raises(ValueError):
        emit_comparison([], tmp_path)
