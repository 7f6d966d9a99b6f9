"""Positioning error statistics and Table-style comparison reports."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PERCENTILE_NOTE = (
    "68%/95% CDF values are the square root of the nearest-rank percentile "
    "(index ceil(q*n) - 1, no interpolation) of the sorted squared errors."
)


@dataclass(frozen=True)
class ErrorReport:
    name: str
    n: int
    mae: float
    rmse: float
    cdf68: float
    cdf95: float
    squared_errors: tuple = field(repr=False)

    @property
    def errors(self) -> np.ndarray:
        """Per-sample Euclidean errors in meters, ascending."""
        return np.sqrt(np.sort(np.asarray(self.squared_errors)))


def squared_error(pred, truth) -> float:
    dx = float(pred[0]) - float(truth[0])
    dy = float(pred[1]) - float(truth[1])
    return dx * dx + dy * dy


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    n = len(sorted_values)
    # q * n is rounded first so that e.g. 0.68 * 100 counts as exactly 68.
    rank = math.ceil(round(q * n, 9))
    return float(sorted_values[max(rank, 1) - 1])


def compute_report(preds, truths, name: str) -> ErrorReport:
    preds = np.asarray(preds, dtype=float).reshape(-1, 2)
    truths = np.asarray(truths, dtype=float).reshape(-1, 2)
    if preds.shape != truths.shape:
        raise ValueError(f"{len(preds)} predictions vs {len(truths)} ground-truth positions")
    if len(preds) == 0:
        raise ValueError("cannot report on zero samples")
    e = ((preds - truths) ** 2).sum(axis=1)
    s = np.sort(e)
    return ErrorReport(
        name=name,
        n=len(e),
        mae=float(np.mean(np.sqrt(e))),
        rmse=float(np.sqrt(np.mean(e))),
        cdf68=math.sqrt(nearest_rank(s, 0.68)),
        cdf95=math.sqrt(nearest_rank(s, 0.95)),
        squared_errors=tuple(float(v) for v in e),
    )


def markdown_table(reports: Sequence[ErrorReport]) -> str:
    lines = ["| Algorithm | MAE | RMSE | 68%CDF | 95%CDF |", "|---|---|---|---|---|"]
    for r in reports:
        lines.append(f"| {r.name} | {r.mae:.2f} | {r.rmse:.2f} | {r.cdf68:.2f} | {r.cdf95:.2f} |")
    return "\n".join(lines)


def emit_comparison(reports: Sequence[ErrorReport], path, title: str = "Positioning error (m)",
                    notes: Sequence[str] = ()) -> str:
    """Write ``report.md`` and ``cdf.csv`` into directory ``path``; return the markdown."""
    if not reports:
        raise ValueError("need at least one report")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    md = [f"# {title}", "", markdown_table(reports), "", f"n = {reports[0].n} test samples.", ""]
    md += [f"- {note}" for note in notes]
    md += [f"- {PERCENTILE_NOTE}", ""]
    text = "\n".join(md)
    (out / "report.md").write_text(text, encoding="utf-8")
    with (out / "cdf.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "error_m", "cum_fraction"])
        for r in reports:
            errs = r.errors
            for i, err in enumerate(errs, start=1):
                w.writerow([r.name, repr(float(err)), repr(i / len(errs))])
    return text
