"""Dense float64 building blocks with hand-derived adjoints.

Tensors are plain 2-D ``numpy`` arrays.  Each ``*_forward`` has a matching
``*_backward`` that maps the upstream gradient to input/parameter gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


def _check_2d(name, a):
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")


def linear_forward(x, W, b) -> np.ndarray:
    """``x @ W + b`` with ``b`` broadcast over rows."""
    x = np.asarray(x, dtype=float)
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float).reshape(1, -1)
    _check_2d("x", x)
    _check_2d("W", W)
    if x.shape[1] != W.shape[0] or b.shape[1] != W.shape[1]:
        raise ShapeError(f"linear shapes disagree: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b


def linear_backward(x, W, grad_out):
    """Return ``(dx, dW, db)`` for ``y = x @ W + b``."""
    return grad_out @ W.T, x.T @ grad_out, grad_out.sum(axis=0, keepdims=True)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def aggregation_matrix(n: int, src, dst, weight, eps: float = 0.0) -> sp.csr_matrix:
    """Sparse ``(1 + eps) I + A`` for an undirected weighted edge list.

    Each edge contributes ``w`` at both ``(dst, src)`` and ``(src, dst)``.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight, dtype=float)
    if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise ShapeError(f"edge endpoint outside [0, {n})")
    diag = np.arange(n)
    rows = np.concatenate([dst, src, diag])
    cols = np.concatenate([src, dst, diag])
    vals = np.concatenate([weight, weight, np.full(n, 1.0 + eps)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def gin_aggregate(h, edges, eps: float = 0.0) -> np.ndarray:
    """GIN neighborhood sum: ``out_v = (1 + eps) h_v + sum_u w_uv h_u``.

    ``edges`` is a sequence of ``(u, v, w)`` triples or a prebuilt matrix from
    :func:`aggregation_matrix`.
    """
    h = np.asarray(h, dtype=float)
    _check_2d("h", h)
    if sp.issparse(edges):
        A = edges
    else:
        e = np.asarray(list(edges), dtype=float).reshape(-1, 3)
        if np.any(e[:, 0] != np.round(e[:, 0])) or np.any(e[:, 1] != np.round(e[:, 1])):
            raise ShapeError("edge endpoints must be integers")
        A = aggregation_matrix(h.shape[0], e[:, 0].astype(np.int64), e[:, 1].astype(np.int64), e[:, 2], eps)
    return np.asarray(A @ h)


def gin_aggregate_backward(A, grad_out) -> np.ndarray:
    return np.asarray(A.T @ grad_out)


def mean_readout(h, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Sum over groups of the per-group mean row.  Empty groups add nothing."""
    h = np.asarray(h, dtype=float)
    out = np.zeros(h.shape[1])
    for g in groups:
        g = np.asarray(g, dtype=np.int64)
        if len(g):
            out += h[g].mean(axis=0)
    return out


def readout_matrix(n_nodes: int, groups_per_graph) -> sp.csr_matrix:
    """Sparse pooling matrix ``R`` with ``R @ h`` = summed group means per graph.

    ``groups_per_graph`` is a list (one entry per graph) of lists of node-id
    arrays; the node ids of different graphs must be disjoint.
    """
    rows, cols, vals = [], [], []
    for gi, groups in enumerate(groups_per_graph):
        for g in groups:
            g = np.asarray(g, dtype=np.int64)
            if len(g):
                rows.append(np.full(len(g), gi))
                cols.append(g)
                vals.append(np.full(len(g), 1.0 / len(g)))
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(groups_per_graph), n_nodes))


def mse_loss(pred, target) -> float:
    """Mean of squared differences over every scalar entry."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} disagree")
    return float(np.mean((pred - target) ** 2))


def mse_backward(pred, target) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NumericError("non-finite gradient")
    if norm > max_norm:
        s = max_norm / norm
        for g in grads.values():
            g *= s
    return norm


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: Mapping[str, np.ndarray], state: AdamState):
    """One bias-corrected Adam update, in place.  Returns ``(params, state)``."""
    state.t += 1
    t = state.t
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class PlateauScheduler:
    """Cut the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    current_lr: float = 0.01
    factor: float = 0.1
    patience: int = 3
    min_lr: float = 1e-4
    best_val_loss: float = float("inf")
    epochs_since_improvement: int = 0

    def step(self, val_loss: float) -> float:
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss {val_loss}")
        if val_loss < self.best_val_loss:
            self.best_val_loss = val_loss
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
            if self.epochs_since_improvement >= self.patience:
                self.current_lr = max(self.current_lr * self.factor, self.min_lr)
                self.epochs_since_improvement = 0
        return self.current_lr


def scheduler_step(sched: PlateauScheduler, val_loss: float) -> PlateauScheduler:
    sched.step(val_loss)
    return sched
