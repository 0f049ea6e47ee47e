"""Run the exhaustive privacy audit over the tiny-instance family and summarize per group."""

import argparse
import time
from collections import defaultdict

from hierfed.privacy import audit_matrix, tiny_family


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=int, nargs="+", default=[3, 5])
    ap.add_argument("--max-clients", type=int, default=3)
    ap.add_argument("--broken", action="store_true", help="audit the no-mask variant instead")
    ap.add_argument("--stride", type=int, default=33,
                    help="uniform-prior enumeration stride for the largest group")
    args = ap.parse_args()
    stride = {(5, 3, 3, 1): args.stride}
    groups = defaultdict(lambda: [0, 0, 0.0])
    start = time.perf_counter()
    for case in tiny_family(qs=args.q, max_clients=args.max_clients, uniform_stride=stride):
        t = case.topology
        rep = audit_matrix(t, case.q, 1, case.prior, broken=args.broken)
        g = groups[(case.q, t.n_clients, t.n_bs, t.z_bs, case.prior_name)]
        g[0] += 1
        g[1] += not rep.passed
        g[2] = max(g[2], rep.max_mi)
    print("q N B z_bs prior instances failing max_MI_bits")
    for key in sorted(groups):
        n, fails, worst = groups[key]
        print(*key, n, fails, f"{worst:.9f}")
    print(f"elapsed {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
