"""
KNN and WKNN baselines
======================

Both baselines rank training fingerprints by Manhattan distance in signal
space.  KNN averages the positions of the k closest; WKNN weights them by
inverse distance.
"""

import numpy as np

from dnlpos import RadioMapConfig, build_wap_index, compute_report, generate, split_dataset
from dnlpos.metrics import markdown_table
from dnlpos.neighborhood import predict_all

fps, _ = generate(RadioMapConfig(seed=42))
train, val, test = split_dataset(fps, 42).select(fps)
index = build_wap_index(train)
truth = np.array([f.position for f in test])

# The neighbour count matters less than one might expect on a dense map.
reports = [compute_report(predict_all(m, test, train, k, index), truth, f"{m.upper()} k={k}")
           for k in (1, 5, 10, 20) for m in ("knn", "wknn")]
print(markdown_table(reports))
