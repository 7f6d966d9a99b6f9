"""
From a fingerprint to a community graph
=======================================

The model never sees a fingerprint alone.  It sees the fingerprint together
with its k nearest training fingerprints and every access point any of them
heard, joined by edges weighted by normalized RSS.
"""

from dnlpos import ReferenceSet, RadioMapConfig, build_graph, build_wap_index, fit_normalization, generate

fps, _ = generate(RadioMapConfig(n_fps=300, n_waps=30, seed=42))
train, target = fps[:-1], fps[-1]
index = build_wap_index(train)
norm = fit_normalization(train)
ref = ReferenceSet(train, index)

com = ref.community(target, k=10)
print("neighbour ids and signal distances:")
for fp, d in com.neighbors:
    print(f"  fp {fp.fp_id:4d}  d = {d:6.1f}  at ({fp.position[0]:5.1f}, {fp.position[1]:5.1f})")

g = build_graph(com, norm, index, labeled=False)
print(f"\n{g.n_fp} FP nodes, {g.n_wap} WAP nodes, {g.n_edges} edges")

# The target sits at node 0 with a zeroed position and the target flag set.
print("target features:", g.fp_features[0].tolist())
print("first neighbour features:", g.fp_features[1].round(3).tolist())

# Edge weights map -100..-30 dBm onto 0..1.
w = g.edge_weight
print(f"edge weights: min {w.min():.3f}, mean {w.mean():.3f}, max {w.max():.3f}")
