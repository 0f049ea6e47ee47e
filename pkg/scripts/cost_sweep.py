"""Print the normalized cost sweep for N=1e4, B=100, z_bs=3."""

import argparse

from hierfed.cost import render_rational, sweep_csv, cost_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csv", help="write the sweep CSV here")
    ap.add_argument("--nu-max", type=int, default=25)
    args = ap.parse_args()
    rows = cost_sweep(10**4, 100, 3, 10**6, range(1, args.nu_max + 1))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(sweep_csv(rows))
    print(f"{'nu':>3} {'c_min':>11} {'c_min_curve':>11} {'tight':>11} {'upper':>11}")
    for r in rows:
        vals = (r.c_min_norm, r.c_min_curve_norm, r.tight_lower_norm, r.upper_norm)
        print(f"{r.nu:>3} " + " ".join(f"{render_rational(v, 8):>11}" for v in vals))


if __name__ == "__main__":
    main()
