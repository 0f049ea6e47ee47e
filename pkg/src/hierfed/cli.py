"""``hierfed <command> --config <path> [--broken] [--out <path>]``

Exit codes: 0 ok, 2 config/topology, 3 privacy FAIL, 4 enumeration budget,
5 numeric (quantization wraparound or an accounting mismatch).
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .cost import CostError, measure, predict, render_rational, sweep_csv, cost_sweep
from .field import FieldConfig, FieldError
from .learning import (
    ClientDataset,
    LinearModel,
    QuantizationConfig,
    QuantizationError,
    loss,
    plaintext_aggregate,
    synthetic_regression,
    train,
    trajectory_csv,
)
from .privacy import AuditError, BudgetExceeded, GradientPrior, audit_matrix
from .protocol import ProtocolError, plaintext_sum, run_round, run_round_broken_no_masks
from .sharing import SharingError
from .topology import PrivacyParams, TopologyError, build_topology, random_topology

EXIT_OK, EXIT_CONFIG, EXIT_PRIVACY, EXIT_BUDGET, EXIT_NUMERIC = 0, 2, 3, 4, 5


class CheckFailed(ArithmeticError):
    pass


def topology_from(cfg: RunConfig):
    if cfg.inline_topology:
        return build_topology(
            cfg.N, cfg.B, cfg.gamma, cfg.main_bs, PrivacyParams(cfg.z_ue, cfg.z_bs)
        )
    return random_topology(cfg.N, cfg.B, cfg.z_bs, cfg.nu, cfg.seed, z_ue=cfg.z_ue)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(cfg: RunConfig) -> int:
    t = topology_from(cfg)
    field = FieldConfig(cfg.q)
    rng = random.Random(cfg.seed)
    grads = [field.random_vector(cfg.d, rng) for _ in range(t.n_clients)]
    runner = run_round_broken_no_masks if cfg.broken else run_round
    res = runner(t, grads, field, cfg.seed)
    expected = plaintext_sum(grads, field)
    ok = res.aggregate == expected
    print(f"aggregate checksum {sum(res.aggregate.values) % cfg.q} {'OK' if ok else 'MISMATCH'}")
    got, want = measure(res.log, t), predict(t, cfg.d)
    all_ok = ok
    for name in ("c_ue", "c_bs", "c_bsf", "c_total"):
        m, p = getattr(got, name), getattr(want, name)
        all_ok &= m == p
        print(f"{name} measured {m} predicted {p} {'OK' if m == p else 'MISMATCH'}")
    ratio = got.c_total / got.c_min
    checks = {
        "c_total >= c_min": got.c_total >= got.c_min,
        "ratio < ratio_bound": ratio < got.ratio_bound,
        "loose_lower <= c_total <= loose_upper": got.loose_lower <= got.c_total <= got.loose_upper,
    }
    print(f"c_min {render_rational(got.c_min)}")
    print(f"beta {render_rational(got.beta)}")
    print(f"ratio c_total/c_min {render_rational(ratio)} bound {render_rational(got.ratio_bound)}")
    for name, passed in checks.items():
        all_ok &= passed
        print(f"{name} {'OK' if passed else 'VIOLATED'}")
    print(f"measured==predicted {'OK' if all_ok else 'FAIL'}")
    if cfg.out:
        Path(cfg.out).write_text(res.log.export())
    if not all_ok:
        raise CheckFailed("measured costs or aggregate disagree with predictions")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    lo, hi = cfg.nu
    rows = cost_sweep(cfg.N, cfg.B, cfg.z_bs, cfg.d, range(lo, hi + 1))
    _emit(sweep_csv(rows), cfg.out)
    # labeled table carries both lower-bound variants; keep stdout pure CSV when no --out
    table = sys.stdout if cfg.out else sys.stderr
    print("nu c_min c_min_curve tight_lower upper", file=table)
    for r in rows:
        print(
            r.nu,
            render_rational(r.c_min_norm),
            render_rational(r.c_min_curve_norm),
            render_rational(r.tight_lower_norm),
            render_rational(r.upper_norm),
            file=table,
        )
    return EXIT_OK


def _prior(cfg: RunConfig, n: int, d: int) -> GradientPrior:
    if cfg.prior == "uniform":
        return GradientPrior.uniform(cfg.q, n, d)
    if cfg.point is not None:
        return GradientPrior.point_mass(cfg.point)
    rng = random.Random(cfg.seed)
    return GradientPrior.point_mass([[rng.randrange(cfg.q) for _ in range(d)] for _ in range(n)])


def cmd_audit(cfg: RunConfig) -> int:
    t = topology_from(cfg)
    d = cfg.d or 1
    report = audit_matrix(t, cfg.q, d, _prior(cfg, t.n_clients, d), cfg.broken, cfg.budget)
    _emit(report.render(), cfg.out)
    worst = report.worst
    c, b = worst.adversary.label()
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict} max MI {worst.mi_bits:.9f} bits (case {worst.adversary.case}, C={c}, {b})")
    return EXIT_OK if report.passed else EXIT_PRIVACY


def _datasets(cfg: RunConfig) -> list[ClientDataset]:
    if cfg.dataset == "ones":
        return [ClientDataset(np.ones((1, cfg.d)), np.ones(1)) for _ in range(cfg.N)]
    return synthetic_regression(cfg.N, cfg.d, cfg.samples, cfg.seed)


def cmd_train(cfg: RunConfig) -> int:
    t = topology_from(cfg)
    qcfg = QuantizationConfig(FieldConfig(cfg.q), 2**cfg.scale_bits, cfg.clip)
    data = _datasets(cfg)
    model0 = LinearModel(np.zeros(cfg.d), cfg.eta)
    traj = train(t, data, model0, qcfg, cfg.iters, cfg.seed)
    _emit(trajectory_csv(traj, data), cfg.out)
    print(f"final loss {loss(traj[-1], data)!r}")
    if cfg.compare_plaintext:
        ref = train(t, data, model0, qcfg, cfg.iters, cfg.seed, aggregate=plaintext_aggregate)
        same = all(np.array_equal(a.w, b.w) for a, b in zip(traj, ref))
        print("IDENTICAL" if same else "DIFFERENT")
        if not same:
            raise CheckFailed("private and plaintext trajectories differ")
    return EXIT_OK


COMMAND_FUNCS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "audit": cmd_audit,
    "train": cmd_train,
}


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="hierfed", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMAND_FUNCS))
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--broken", action="store_true", help="drop the mask coefficients")
    ap.add_argument("--out", help="output path (overrides the config's 'out')")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"), args.command)
        if args.broken:
            cfg.broken = True
        if args.out:
            cfg.out = args.out
        return COMMAND_FUNCS[cfg.command](cfg)
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot read config: {exc}")
    except BudgetExceeded as exc:
        return _fail(EXIT_BUDGET, f"budget: {exc}")
    except (ConfigError, TopologyError, CostError, SharingError, FieldError, AuditError) as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    except (QuantizationError, CheckFailed, ProtocolError) as exc:
        return _fail(EXIT_NUMERIC, f"numeric: {exc}")


def _fail(code: int, message: str) -> int:
    print(f"hierfed: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
