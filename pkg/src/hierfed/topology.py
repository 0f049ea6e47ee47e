"""Clients, base stations, connectivity sets and main-base-station clusters.

Base stations are labelled ``1..B`` (the label doubles as the default
evaluation point); clients are addressed by position ``0..N-1``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .sharing import default_points


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class PrivacyParams:
    z_ue: int = 0
    z_bs: int = 0

    def __post_init__(self):
        if self.z_ue < 0 or self.z_bs < 0:
            raise TopologyError("collusion thresholds must be >= 0")


@dataclass(frozen=True)
class ConnectivityPattern:
    pattern: frozenset
    members: tuple

    @property
    def key(self) -> tuple:
        return tuple(sorted(self.pattern))

    @property
    def tag(self) -> str:
        return "-".join(str(k) for k in self.key)


@dataclass(frozen=True)
class Topology:
    n_clients: int
    n_bs: int
    gamma: tuple
    main_bs: tuple
    privacy: PrivacyParams = field(default_factory=PrivacyParams)
    points: Mapping[int, int] = None

    def nu(self, i: int) -> int:
        return len(self.gamma[i]) - self.privacy.z_bs

    @property
    def z_bs(self) -> int:
        return self.privacy.z_bs

    def cluster(self, m: int) -> list[int]:
        return [i for i in range(self.n_clients) if self.main_bs[i] == m]

    def clusters(self) -> dict[int, list[int]]:
        return {m: self.cluster(m) for m in range(1, self.n_bs + 1)}

    def describe(self) -> str:
        gam = "; ".join(",".join(str(k) for k in sorted(g)) for g in self.gamma)
        main = ",".join(str(m) for m in self.main_bs)
        return (
            f"N = {self.n_clients}\nB = {self.n_bs}\nz_bs = {self.privacy.z_bs}\n"
            f"z_ue = {self.privacy.z_ue}\ngamma = {gam}\nmain_bs = {main}\n"
        )


def build_topology(
    n_clients: int,
    n_bs: int,
    gamma: Sequence[Iterable[int]],
    main_bs: Sequence[int],
    privacy: PrivacyParams | None = None,
    points: Mapping[int, int] | None = None,
) -> Topology:
    privacy = privacy or PrivacyParams()
    if n_clients < 1 or n_bs < 1:
        raise TopologyError(f"need N >= 1 and B >= 1, got N={n_clients}, B={n_bs}")
    if privacy.z_bs >= n_bs:
        raise TopologyError(f"z_bs={privacy.z_bs} must be < B={n_bs}")
    if len(gamma) != n_clients or len(main_bs) != n_clients:
        raise TopologyError(f"gamma/main_bs must list exactly N={n_clients} clients")
    gam = tuple(frozenset(g) for g in gamma)
    for i, g in enumerate(gam):
        bad = [k for k in g if not 1 <= k <= n_bs]
        if bad:
            raise TopologyError(f"client {i}: base stations {bad} outside 1..{n_bs}")
        if len(g) <= privacy.z_bs:
            raise TopologyError(
                f"client {i} under-connected: |gamma|={len(g)} <= z_bs={privacy.z_bs}"
            )
        if main_bs[i] not in g:
            raise TopologyError(f"client {i}: main base station {main_bs[i]} not in gamma")
    if points is None:
        points = default_points(n_bs)
    elif set(points) != set(range(1, n_bs + 1)):
        raise TopologyError("evaluation point map must cover base stations 1..B")
    if any(a == 0 for a in points.values()) or len(set(points.values())) != n_bs:
        raise TopologyError("evaluation points must be nonzero and distinct")
    return Topology(n_clients, n_bs, gam, tuple(main_bs), privacy, dict(points))


def group_by_pattern(t: Topology) -> list[ConnectivityPattern]:
    groups: dict[frozenset, list[int]] = {}
    for i, g in enumerate(t.gamma):
        groups.setdefault(g, []).append(i)
    ordered = sorted(groups.items(), key=lambda kv: tuple(sorted(kv[0])))
    return [ConnectivityPattern(p, tuple(members)) for p, members in ordered]


def random_topology(
    n_clients: int,
    n_bs: int,
    z_bs: int,
    nu: int | tuple[int, int],
    seed: int,
    z_ue: int = 0,
) -> Topology:
    """Uniform ``(z_bs + nu)``-subsets of base stations per client.

    ``nu`` may be a ``(lo, hi)`` pair, in which case every client draws its own
    ``nu`` uniformly from that inclusive range (mixed connectivity).
    """
    lo, hi = (nu, nu) if isinstance(nu, int) else nu
    if lo < 1 or lo > hi:
        raise TopologyError(f"invalid nu range {nu}")
    if z_bs + hi > n_bs:
        raise TopologyError(f"z_bs + nu = {z_bs + hi} exceeds B = {n_bs}")
    rng = random.Random(seed)
    bs = list(range(1, n_bs + 1))
    gamma, main = [], []
    for _ in range(n_clients):
        k = z_bs + rng.randint(lo, hi)
        g = sorted(rng.sample(bs, k))
        gamma.append(g)
        main.append(rng.choice(g))
    return build_topology(n_clients, n_bs, gamma, main, PrivacyParams(z_ue, z_bs))


def canonical_topologies(n_clients: int, n_bs: int, z_bs: int, z_ue: int = 0) -> list[Topology]:
    """Every feasible topology up to relabeling of clients.

    Each client picks a (gamma, main base station) pair; client order is
    irrelevant to the protocol and to an audit over all colluding subsets, so
    only multisets of such pairs are generated.
    """
    choices = []
    for size in range(z_bs + 1, n_bs + 1):
        for g in itertools.combinations(range(1, n_bs + 1), size):
            choices.extend((g, m) for m in g)
    out = []
    for combo in itertools.combinations_with_replacement(choices, n_clients):
        out.append(
            build_topology(
                n_clients, n_bs, [c[0] for c in combo], [c[1] for c in combo],
                PrivacyParams(z_ue, z_bs),
            )
        )
    return out
