"""
Training the graph model
========================

Training sweeps several batch sizes.  Each run starts from a fresh seeded
initialization, cuts the learning rate tenfold after three epochs without
validation improvement, and the snapshot with the lowest validation loss
across all runs is kept.
"""

import numpy as np

from dnlpos import RadioMapConfig, TrainingConfig, compute_report, generate, split_dataset, train
from dnlpos.metrics import markdown_table

fps, _ = generate(RadioMapConfig(n_fps=600, seed=7))
train_fps, val_fps, test_fps = split_dataset(fps, 7).select(fps)

cfg = TrainingConfig(batch_sizes=(32, 64), epochs=30, seed=7)
model, log = train(train_fps, val_fps, cfg)

for bs in cfg.batch_sizes:
    recs = [r for r in log.records if r.batch_size == bs]
    cuts = [r.epoch for a, r in zip(recs, recs[1:]) if r.lr < a.lr]
    print(f"batch {bs}: final val loss {recs[-1].val_loss:.5f}, lr cut after epochs {cuts}")
print(f"kept: batch {log.best_batch_size}, epoch {log.best_epoch}, val loss {log.best_val_loss:.5f}")

pred = model.predict_many(test_fps, train_fps)
print(markdown_table([compute_report(pred, np.array([f.position for f in test_fps]), "DNL")]))
