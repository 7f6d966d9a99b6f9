"""The graph positioning network, its training loop and JSON checkpoints.

Network, for one community graph::

    FP features (x, y, is_target) -> MLP 3-8-8-8 ----\
                                                      +-> GIN -> GIN -> mean(FP) + mean(WAP) -> MLP 8-64-2
    WAP MAC index -> embedding (n_macs + 1, 8) ------/

Each GIN layer sums edge-weighted neighbor rows plus the node itself
(``eps = 0``) and applies an 8-8-8 MLP, followed by ReLU.  Graphs in a
minibatch are stacked as one disjoint graph, which gives the same loss as
averaging per-graph losses.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import nn
from .fingerprints import Fingerprint, WapIndex, build_wap_index
from .graph import CommunityGraph, NormalizationParams, build_graph, fit_normalization
from .neighborhood import ReferenceSet

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HIDDEN = 8
HEAD_HIDDEN = 64
GIN_HIDDEN = 8
GIN_EPS = 0.0
GRAD_CLIP = 5.0
EMBED_INIT_STD = 0.1


class CheckpointError(ValueError):
    pass


class TrainingFailedError(RuntimeError):
    pass


def parameter_shapes(n_macs: int) -> dict[str, tuple[int, int]]:
    h = HIDDEN
    return {
        "fp.W1": (3, h), "fp.b1": (1, h),
        "fp.W2": (h, h), "fp.b2": (1, h),
        "fp.W3": (h, h), "fp.b3": (1, h),
        "wap.embedding": (n_macs + 1, h),
        "gin1.W1": (h, GIN_HIDDEN), "gin1.b1": (1, GIN_HIDDEN),
        "gin1.W2": (GIN_HIDDEN, h), "gin1.b2": (1, h),
        "gin2.W1": (h, GIN_HIDDEN), "gin2.b1": (1, GIN_HIDDEN),
        "gin2.W2": (GIN_HIDDEN, h), "gin2.b2": (1, h),
        "head.W1": (h, HEAD_HIDDEN), "head.b1": (1, HEAD_HIDDEN),
        "head.W2": (HEAD_HIDDEN, 2), "head.b2": (1, 2),
    }


def init_params(n_macs: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = {}
    for name, shape in parameter_shapes(n_macs).items():
        if name == "wap.embedding":
            params[name] = rng.standard_normal(shape) * EMBED_INIT_STD
        elif ".W" in name:
            params[name] = nn.glorot_uniform(rng, *shape)
        else:
            params[name] = np.zeros(shape)
    return params


@dataclass
class GraphBatch:
    """Several community graphs stacked into one disjoint graph.

    Node order is every FP node (graph by graph) followed by every WAP node.
    """

    fp_features: np.ndarray
    wap_macs: np.ndarray
    agg: sp.csr_matrix
    pool: sp.csr_matrix
    labels: Optional[np.ndarray]

    @property
    def n_graphs(self) -> int:
        return self.pool.shape[0]


def collate(graphs: Sequence[CommunityGraph]) -> GraphBatch:
    n_fp = np.array([g.n_fp for g in graphs])
    n_wap = np.array([g.n_wap for g in graphs])
    fp_off = np.concatenate([[0], np.cumsum(n_fp)[:-1]])
    total_fp = int(n_fp.sum())
    wap_off = total_fp + np.concatenate([[0], np.cumsum(n_wap)[:-1]])
    n = total_fp + int(n_wap.sum())

    src = np.concatenate([g.edge_fp + o for g, o in zip(graphs, fp_off)])
    dst = np.concatenate([g.edge_wap + o for g, o in zip(graphs, wap_off)])
    w = np.concatenate([g.edge_weight for g in graphs])
    agg = nn.aggregation_matrix(n, src, dst, w, GIN_EPS)

    b = len(graphs)
    fp_features = np.concatenate([g.fp_features for g in graphs])
    gid_fp = np.repeat(np.arange(b), n_fp)
    gid_wap = np.repeat(np.arange(b), n_wap)
    fp_w = 1.0 / n_fp[gid_fp]
    rows = np.concatenate([gid_fp, gid_wap])
    vals = np.concatenate([fp_w, 1.0 / np.maximum(n_wap, 1)[gid_wap]])
    pool = sp.csr_matrix((vals, (rows, np.arange(n))), shape=(b, n))

    labels = None
    if all(g.label is not None for g in graphs):
        labels = np.array([g.norm.normalize(g.label) for g in graphs]).reshape(b, 2)
    return GraphBatch(
        fp_features=fp_features,
        wap_macs=np.concatenate([g.wap_macs for g in graphs]).astype(np.int64),
        agg=agg,
        pool=pool,
        labels=labels,
    )


def _forward(p, batch: GraphBatch):
    emb = p["wap.embedding"]
    if len(batch.wap_macs) and (batch.wap_macs.max() >= emb.shape[0] or batch.wap_macs.min() < 0):
        raise nn.ShapeError(f"MAC index outside embedding table of {emb.shape[0]} rows")
    c = {}
    x = batch.fp_features
    c["fp.z1"] = z = nn.linear_forward(x, p["fp.W1"], p["fp.b1"])
    c["fp.a1"] = a = nn.relu(z)
    c["fp.z2"] = z = nn.linear_forward(a, p["fp.W2"], p["fp.b2"])
    c["fp.a2"] = a = nn.relu(z)
    hf = nn.linear_forward(a, p["fp.W3"], p["fp.b3"])
    h = np.vstack([hf, emb[batch.wap_macs]])
    for layer in ("gin1", "gin2"):
        c[layer + ".s"] = s = nn.gin_aggregate(h, batch.agg)
        c[layer + ".u"] = u = nn.linear_forward(s, p[layer + ".W1"], p[layer + ".b1"])
        c[layer + ".r"] = r = nn.relu(u)
        c[layer + ".v"] = v = nn.linear_forward(r, p[layer + ".W2"], p[layer + ".b2"])
        h = nn.relu(v)
    c["g"] = g = np.asarray(batch.pool @ h)
    c["head.q"] = q = nn.linear_forward(g, p["head.W1"], p["head.b1"])
    c["head.a"] = a = nn.relu(q)
    out = nn.linear_forward(a, p["head.W2"], p["head.b2"])
    return out, c


def _backward(p, batch: GraphBatch, c, dout):
    grads = {}
    da, grads["head.W2"], grads["head.b2"] = nn.linear_backward(c["head.a"], p["head.W2"], dout)
    dq = nn.relu_backward(c["head.q"], da)
    dg, grads["head.W1"], grads["head.b1"] = nn.linear_backward(c["g"], p["head.W1"], dq)
    dh = np.asarray(batch.pool.T @ dg)
    for layer in ("gin2", "gin1"):
        dv = nn.relu_backward(c[layer + ".v"], dh)
        dr, grads[layer + ".W2"], grads[layer + ".b2"] = nn.linear_backward(c[layer + ".r"], p[layer + ".W2"], dv)
        du = nn.relu_backward(c[layer + ".u"], dr)
        ds, grads[layer + ".W1"], grads[layer + ".b1"] = nn.linear_backward(c[layer + ".s"], p[layer + ".W1"], du)
        dh = nn.gin_aggregate_backward(batch.agg, ds)
    n_fp = batch.fp_features.shape[0]
    dhf, dhw = dh[:n_fp], dh[n_fp:]
    demb = np.zeros_like(p["wap.embedding"])
    np.add.at(demb, batch.wap_macs, dhw)
    grads["wap.embedding"] = demb
    da, grads["fp.W3"], grads["fp.b3"] = nn.linear_backward(c["fp.a2"], p["fp.W3"], dhf)
    dz = nn.relu_backward(c["fp.z2"], da)
    da, grads["fp.W2"], grads["fp.b2"] = nn.linear_backward(c["fp.a1"], p["fp.W2"], dz)
    dz = nn.relu_backward(c["fp.z1"], da)
    _, grads["fp.W1"], grads["fp.b1"] = nn.linear_backward(batch.fp_features, p["fp.W1"], dz)
    return grads


def loss_and_grad(params, batch: GraphBatch):
    """MSE in normalized coordinates and its exact gradient for every parameter."""
    out, cache = _forward(params, batch)
    loss = nn.mse_loss(out, batch.labels)
    grads = _backward(params, batch, cache, nn.mse_backward(out, batch.labels))
    return loss, grads


def batch_loss(params, batch: GraphBatch) -> float:
    out, _ = _forward(params, batch)
    return nn.mse_loss(out, batch.labels)


@dataclass
class DnlModel:
    params: dict
    norm: NormalizationParams
    wap_index: WapIndex
    seed: int = 0
    config: dict = field(default_factory=dict)
    reference: list = field(default_factory=list)

    @classmethod
    def initialize(cls, norm, wap_index, seed, rng=None, **kw) -> "DnlModel":
        rng = rng if rng is not None else np.random.default_rng(seed)
        return cls(init_params(wap_index.size, rng), norm, wap_index, seed, **kw)

    def forward_batch(self, graphs: Sequence[CommunityGraph]) -> np.ndarray:
        out, _ = _forward(self.params, collate(graphs))
        return out

    def forward(self, g: CommunityGraph) -> np.ndarray:
        return self.forward_batch([g])[0]

    def copy(self) -> "DnlModel":
        return DnlModel({k: v.copy() for k, v in self.params.items()}, self.norm, self.wap_index,
                        self.seed, dict(self.config), list(self.reference))

    def predict(self, target: Fingerprint, train_fps) -> np.ndarray:
        return self.predict_many([target], train_fps)[0]

    def predict_many(self, targets: Sequence[Fingerprint], train_fps, batch_size: int = 256,
                     exclude_self: bool = False) -> np.ndarray:
        """Positions in meters for unlabeled scans, neighbors drawn from ``train_fps``."""
        k = int(self.config.get("k", 10))
        ref = train_fps if isinstance(train_fps, ReferenceSet) else ReferenceSet(train_fps, self.wap_index)
        out = []
        for i in range(0, len(targets), batch_size):
            graphs = [build_graph(ref.community(t, k, exclude_self), self.norm, self.wap_index, labeled=False)
                      for t in targets[i:i + batch_size]]
            out.append(self.forward_batch(graphs))
        pred = np.concatenate(out) if out else np.zeros((0, 2))
        return self.norm.denormalize(pred).reshape(-1, 2)


def forward(model: DnlModel, g: CommunityGraph) -> np.ndarray:
    return model.forward(g)


def predict(model: DnlModel, target: Fingerprint, train_fps) -> np.ndarray:
    return model.predict(target, train_fps)


# -- training -----------------------------------------------------------------

@dataclass
class TrainingConfig:
    k: int = 10
    batch_sizes: tuple = (64, 128, 256)
    epochs: int = 100
    initial_lr: float = 0.01
    seed: int = 0
    lr_factor: float = 0.1
    lr_patience: int = 3
    min_lr: float = 1e-4
    grad_clip: float = GRAD_CLIP
    jobs: int = 1

    def __post_init__(self):
        self.batch_sizes = tuple(int(b) for b in self.batch_sizes)
        if self.epochs <= 0 or self.k < 1 or not self.batch_sizes or min(self.batch_sizes) <= 0:
            raise ValueError(f"invalid training config: {self}")


@dataclass
class EpochRecord:
    epoch: int
    batch_size: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    best_val_loss: float = float("inf")
    best_batch_size: Optional[int] = None
    best_epoch: Optional[int] = None

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "batch_size", "train_loss", "val_loss", "lr"])
            for r in self.records:
                w.writerow([r.epoch, r.batch_size, repr(r.train_loss), repr(r.val_loss), repr(r.lr)])


def community_graphs(targets: Sequence[Fingerprint], reference: ReferenceSet, k: int,
                     norm: NormalizationParams, labeled: bool = True,
                     exclude_self: bool = False) -> list[CommunityGraph]:
    return [build_graph(reference.community(t, k, exclude_self), norm, reference.index, labeled)
            for t in targets]


def _run_seed(seed: int, batch_size: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(batch_size)])))


def _train_one(batch_size, train_graphs, val_batch, norm, index, cfg: TrainingConfig):
    """One fresh run at a fixed batch size.  Returns (records, best params, best loss, best epoch, error)."""
    rng = _run_seed(cfg.seed, batch_size)
    params = init_params(index.size, rng)
    adam = nn.AdamState(lr=cfg.initial_lr)
    sched = nn.PlateauScheduler(cfg.initial_lr, cfg.lr_factor, cfg.lr_patience, cfg.min_lr)
    records, best, best_loss, best_epoch = [], None, float("inf"), None
    n = len(train_graphs)
    for epoch in range(1, cfg.epochs + 1):
        lr = adam.lr
        order = rng.permutation(n)
        total = 0.0
        try:
            for i in range(0, n, batch_size):
                batch = collate([train_graphs[j] for j in order[i:i + batch_size]])
                loss, grads = loss_and_grad(params, batch)
                if not math.isfinite(loss):
                    raise nn.NumericError(f"non-finite training loss at epoch {epoch}")
                nn.clip_grad_norm(grads, cfg.grad_clip)
                nn.adam_step(params, grads, adam)
                total += loss * batch.n_graphs
            val_loss = batch_loss(params, val_batch)
            adam.lr = sched.step(val_loss)
        except (nn.NumericError, FloatingPointError) as e:
            log.warning("batch size %d aborted: %s", batch_size, e)
            return records, best, best_loss, best_epoch, str(e)
        records.append(EpochRecord(epoch, batch_size, total / n, val_loss, lr))
        log.info("bs=%d epoch=%d train=%.6g val=%.6g lr=%g", batch_size, epoch, total / n, val_loss, lr)
        if val_loss < best_loss:
            best_loss, best_epoch = val_loss, epoch
            best = {k: v.copy() for k, v in params.items()}
    return records, best, best_loss, best_epoch, None


def train(train_fps: Sequence[Fingerprint], val_fps: Sequence[Fingerprint], cfg: TrainingConfig,
          train_graphs: Optional[list] = None, val_graphs: Optional[list] = None):
    """Batch-size sweep; keeps the parameters with the lowest validation loss overall.

    Training communities draw neighbors from the rest of the training set,
    validation communities from the whole training set.  Returns
    ``(model, TrainingLog)``.
    """
    ids_train = {fp.fp_id for fp in train_fps}
    if ids_train & {fp.fp_id for fp in val_fps}:
        raise ValueError("training and validation sets overlap")
    if len(train_fps) <= cfg.k:
        raise ValueError(f"need more than k={cfg.k} training fingerprints, got {len(train_fps)}")
    index = build_wap_index(train_fps)
    norm = fit_normalization(train_fps)
    ref = ReferenceSet(train_fps, index)
    if train_graphs is None:
        train_graphs = community_graphs(train_fps, ref, cfg.k, norm, exclude_self=True)
    if val_graphs is None:
        val_graphs = community_graphs(val_fps, ref, cfg.k, norm)
    val_batch = collate(val_graphs)

    args = [(bs, train_graphs, val_batch, norm, index, cfg) for bs in cfg.batch_sizes]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_train_one, *zip(*args)))
    else:
        results = [_train_one(*a) for a in args]

    tlog = TrainingLog()
    best_params = None
    for bs, (records, params, loss, epoch, err) in zip(cfg.batch_sizes, results):
        tlog.records.extend(records)
        if err is not None:
            tlog.failures[bs] = err
        if params is not None and loss < tlog.best_val_loss:
            tlog.best_val_loss, tlog.best_batch_size, tlog.best_epoch = loss, bs, epoch
            best_params = params
    if best_params is None:
        raise TrainingFailedError(f"every training run failed: {tlog.failures}")
    config = asdict(cfg)
    config["batch_sizes"] = list(cfg.batch_sizes)
    config.pop("jobs")
    model = DnlModel(best_params, norm, index, cfg.seed, config, list(train_fps))
    return model, tlog


# -- checkpoints ----------------------------------------------------------------

ARCHITECTURE = {
    "fp_extractor": [3, HIDDEN, HIDDEN, HIDDEN],
    "wap_embedding_dim": HIDDEN,
    "gin_layers": 2,
    "gin_mlp": [HIDDEN, GIN_HIDDEN, HIDDEN],
    "gin_eps": GIN_EPS,
    "head": [HIDDEN, HEAD_HIDDEN, 2],
    "activation": "relu",
    "readout": "sum of per-kind means (fp, wap)",
}


def _fp_to_dict(fp: Fingerprint) -> dict:
    return {"fp_id": fp.fp_id, "floor": fp.floor, "position": list(fp.position),
            "observations": {m: fp.observations[m] for m in sorted(fp.observations)}}


def checkpoint_dict(model: DnlModel) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "config": {**model.config, "seed": model.seed, "architecture": ARCHITECTURE},
        "norm": model.norm.to_dict(),
        "wap_index": model.wap_index.to_dict(),
        "tensors": {name: {"shape": list(t.shape), "data": t.ravel().tolist()}
                    for name, t in model.params.items()},
        "reference": [_fp_to_dict(fp) for fp in model.reference],
    }


def save_checkpoint(model: DnlModel, path) -> None:
    # json writes floats with shortest round-trip repr, so reloading is bit-exact.
    Path(path).write_text(json.dumps(checkpoint_dict(model), indent=None, allow_nan=False), encoding="utf-8")


def model_from_dict(d: dict) -> DnlModel:
    if not isinstance(d, dict) or d.get("schema") != SCHEMA_VERSION:
        raise CheckpointError(f"unsupported checkpoint schema {d.get('schema') if isinstance(d, dict) else d!r}")
    try:
        index = WapIndex.from_dict(d["wap_index"])
        norm = NormalizationParams.from_dict(d["norm"])
        config = dict(d["config"])
        tensors = d["tensors"]
        expected = parameter_shapes(index.size)
        if set(tensors) != set(expected):
            raise CheckpointError(f"tensor names disagree with architecture: {sorted(set(tensors) ^ set(expected))}")
        params = {}
        for name, shape in expected.items():
            t = tensors[name]
            if tuple(t["shape"]) != shape:
                raise CheckpointError(f"tensor {name} has shape {t['shape']}, expected {list(shape)}")
            data = np.array(t["data"], dtype=float)
            if data.size != shape[0] * shape[1]:
                raise CheckpointError(f"tensor {name} holds {data.size} values, expected {shape[0] * shape[1]}")
            if not np.all(np.isfinite(data)):
                raise CheckpointError(f"tensor {name} has non-finite values")
            params[name] = data.reshape(shape)
        reference = [Fingerprint(r["fp_id"], r["floor"], tuple(r["position"]), r["observations"])
                     for r in d.get("reference", [])]
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from e
    config.pop("architecture", None)
    seed = int(config.get("seed", 0))
    return DnlModel(params, norm, index, seed, config, reference)


def load_checkpoint(path) -> DnlModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: truncated or invalid JSON ({e})") from e
    return model_from_dict(d)
