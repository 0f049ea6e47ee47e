"""Least-squares gradient descent with gradients aggregated through the private round.

Real gradients are mapped to GF(q) by fixed point: ``round(v * scale)``,
negatives wrapping to ``q - |.|``. Summing N such values is exact as long as
``N * scale * clip < (q - 1) / 2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .field import MERSENNE_61, FieldConfig, FieldVector, vector_sum
from .protocol import run_round
from .topology import Topology


class QuantizationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuantizationConfig:
    field: FieldConfig = field(default_factory=lambda: FieldConfig(MERSENNE_61))
    scale: int = 2**16
    clip: float = 2.0**20

    def __post_init__(self):
        if self.clip <= 0:
            raise QuantizationError(f"clip must be > 0, got {self.clip}")
        if self.scale < 1:
            raise QuantizationError(f"scale must be >= 1, got {self.scale}")

    def check_headroom(self, n_summands: int) -> None:
        if n_summands * self.scale * self.clip >= (self.field.q - 1) / 2:
            raise QuantizationError(
                f"N*scale*clip = {n_summands * self.scale * self.clip:g} overflows q={self.field.q}"
            )


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    eta: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.w)):
            raise ValueError("model parameters must be finite")


@dataclass(frozen=True)
class ClientDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X, y = np.atleast_2d(np.asarray(self.X, float)), np.asarray(self.y, float).reshape(-1)
        if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"inconsistent dataset shapes {X.shape} and {y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.X.shape[0]


def quantize(v: Sequence[float], cfg: QuantizationConfig) -> FieldVector:
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) > cfg.clip):
        raise QuantizationError(f"value {np.abs(v).max():g} exceeds clip {cfg.clip:g}")
    q = cfg.field.q
    return cfg.field.vector(int(x) % q for x in np.rint(v * cfg.scale))


def dequantize(v: FieldVector, n_summands: int, cfg: QuantizationConfig) -> np.ndarray:
    q = cfg.field.q
    limit = n_summands * cfg.scale * cfg.clip
    out = []
    for x in v.values:
        c = x - q if x > q // 2 else x
        if abs(c) > limit:
            raise QuantizationError(f"entry {x} outside +-{limit:g}: wraparound")
        out.append(c)
    return np.array(out, dtype=float) / cfg.scale


def local_gradient(model: LinearModel, data: ClientDataset) -> np.ndarray:
    """Gradient of 0.5 * ||X w - y||^2."""
    if data.X.shape[1] != model.w.shape[0]:
        raise ValueError(f"feature dim {data.X.shape[1]} != model dim {model.w.shape[0]}")
    return data.X.T @ (data.X @ model.w - data.y)


def loss(model: LinearModel, datasets: Sequence[ClientDataset]) -> float:
    m = sum(ds.m for ds in datasets)
    return float(sum(np.sum((ds.X @ model.w - ds.y) ** 2) for ds in datasets) / (2 * m))


Aggregator = Callable[[Topology, list, FieldConfig, object], FieldVector]


def private_aggregate(t: Topology, grads: list, config: FieldConfig, seed) -> FieldVector:
    return run_round(t, grads, config, seed).aggregate


def plaintext_aggregate(t: Topology, grads: list, config: FieldConfig, seed) -> FieldVector:
    return vector_sum(grads, len(grads[0]), config)


def train(
    t: Topology,
    datasets: Sequence[ClientDataset],
    model0: LinearModel,
    cfg: QuantizationConfig,
    iters: int,
    seed: int = 0,
    aggregate: Aggregator = private_aggregate,
) -> list[LinearModel]:
    """Trajectory ``[w_0, ..., w_iters]`` of ``w <- w - eta/M * sum_i grad_i``."""
    if len(datasets) != t.n_clients:
        raise ValueError(f"{len(datasets)} datasets for {t.n_clients} clients")
    cfg.check_headroom(t.n_clients)
    m_total = sum(ds.m for ds in datasets)
    traj = [model0]
    model = model0
    for it in range(1, iters + 1):
        grads = [quantize(local_gradient(model, ds), cfg) for ds in datasets]
        total = aggregate(t, grads, cfg.field, f"{seed}:{it}")
        g = dequantize(total, t.n_clients, cfg)
        model = LinearModel(model.w - (model.eta / m_total) * g, model.eta)
        traj.append(model)
    return traj


def synthetic_regression(n_clients: int, d: int, samples: int, seed: int) -> list[ClientDataset]:
    rng = np.random.default_rng(seed)
    w_true = rng.normal(size=d)
    out = []
    for _ in range(n_clients):
        X = rng.normal(size=(samples, d))
        out.append(ClientDataset(X, X @ w_true + 0.01 * rng.normal(size=samples)))
    return out


def trajectory_csv(traj: Sequence[LinearModel], datasets: Sequence[ClientDataset]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = traj[0].w.shape[0]
    w.writerow(["iter", "loss"] + [f"w_{j}" for j in range(d)])
    for it, model in enumerate(traj):
        w.writerow([it, repr(loss(model, datasets))] + [repr(float(x)) for x in model.w])
    return buf.getvalue()
