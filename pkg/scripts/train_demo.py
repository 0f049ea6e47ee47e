"""Train a linear model with private aggregation and compare with plaintext aggregation."""

import argparse

import numpy as np

from hierfed.learning import (
    LinearModel,
    QuantizationConfig,
    loss,
    plaintext_aggregate,
    synthetic_regression,
    train,
)
from hierfed.topology import random_topology


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--clients", type=int, default=6)
    ap.add_argument("--stations", type=int, default=4)
    ap.add_argument("--z-bs", type=int, default=1)
    ap.add_argument("--dim", type=int, default=5)
    ap.add_argument("--iters", type=int, default=30)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    t = random_topology(args.clients, args.stations, args.z_bs, (1, args.stations - args.z_bs), args.seed)
    data = synthetic_regression(args.clients, args.dim, 16, args.seed)
    model0 = LinearModel(np.zeros(args.dim), args.eta)
    cfg = QuantizationConfig()
    private = train(t, data, model0, cfg, args.iters, args.seed)
    plain = train(t, data, model0, cfg, args.iters, args.seed, aggregate=plaintext_aggregate)
    for it in range(0, args.iters + 1, max(1, args.iters // 10)):
        print(f"iter {it:>3}  loss {loss(private[it], data):.6e}")
    same = all(np.array_equal(a.w, b.w) for a, b in zip(private, plain))
    print("private vs plaintext:", "IDENTICAL" if same else "DIFFERENT")


if __name__ == "__main__":
    main()
