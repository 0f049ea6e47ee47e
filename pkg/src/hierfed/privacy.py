"""Exhaustive privacy audit on tiny instances.

The adversary's view is read off the message log of a protocol round (every
message incident to a colluding party) together with the colluding clients'
own gradients, keys and masks. All randomness and all gradients in the prior's
support are enumerated, giving an exact joint table of

    (view, honest gradients, colluder gradients, honest aggregate)

with integer weights. Conditional mutual information is then tested for exact
zero via ``p(x,y,z) p(z) == p(x,z) p(y,z)`` on the support, and reported in
bits.

Two enumeration routes exist. ``"direct"`` runs the protocol once per state.
``"linear"`` runs it once per unit state to recover the affine map from state
to logged symbols (checked on random states before use), then enumerates with
numpy; it is the default and the only practical route beyond a few thousand
states.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .field import FieldConfig, FieldVector
from .protocol import ClientRandomness, MessageLog, bs, execute_round, ue, FEDERATOR
from .sharing import SharingParams
from .topology import Topology, canonical_topologies

DEFAULT_BUDGET = 10**8
ZERO_TOL = 1e-9


class AuditError(ValueError):
    pass


class BudgetExceeded(AuditError):
    pass


@dataclass(frozen=True)
class AdversarySpec:
    colluding_clients: frozenset = frozenset()
    base_stations: frozenset | None = None
    federator: bool = False

    def __post_init__(self):
        object.__setattr__(self, "colluding_clients", frozenset(self.colluding_clients))
        if self.base_stations is not None:
            object.__setattr__(self, "base_stations", frozenset(self.base_stations))
        if self.federator and self.base_stations:
            raise AuditError("base stations never collude with the federator")
        if not self.federator and self.base_stations is None:
            object.__setattr__(self, "base_stations", frozenset())

    @classmethod
    def with_base_stations(cls, clients: Iterable[int] = (), stations: Iterable[int] = ()):
        return cls(frozenset(clients), frozenset(stations), False)

    @classmethod
    def with_federator(cls, clients: Iterable[int] = ()):
        return cls(frozenset(clients), None, True)

    @property
    def case(self) -> str:
        return "ii" if self.federator else "i"

    def validate(self, t: Topology) -> None:
        c = self.colluding_clients
        if any(not 0 <= i < t.n_clients for i in c):
            raise AuditError(f"colluding clients {sorted(c)} outside 0..{t.n_clients - 1}")
        if len(c) > t.privacy.z_ue:
            raise AuditError(f"{len(c)} colluding clients exceed z_ue={t.privacy.z_ue}")
        b = self.base_stations or frozenset()
        if any(not 1 <= k <= t.n_bs for k in b):
            raise AuditError(f"base stations {sorted(b)} outside 1..{t.n_bs}")
        if len(b) > t.privacy.z_bs:
            raise AuditError(f"{len(b)} colluding base stations exceed z_bs={t.privacy.z_bs}")

    def actors(self) -> set:
        out = {ue(i) for i in self.colluding_clients}
        if self.federator:
            out.add(FEDERATOR)
        else:
            out |= {bs(k) for k in self.base_stations}
        return out

    def label(self) -> tuple[str, str]:
        c = "{" + ",".join(str(i + 1) for i in sorted(self.colluding_clients)) + "}"
        if self.federator:
            return c, "F"
        return c, "BS{" + ",".join(str(k) for k in sorted(self.base_stations)) + "}"


def observe(log: MessageLog, adversary: AdversarySpec, kinds: Sequence[str] | None = None) -> list[int]:
    """Payload symbols of every message incident to the adversary, in log order."""
    out: list[int] = []
    for m in log.incident(adversary.actors()):
        if kinds is None or m.kind.value in kinds:
            out.extend(m.payload.values)
    return out


# -- priors -----------------------------------------------------------------


@dataclass(frozen=True)
class GradientPrior:
    """Distribution over the tuple of all clients' gradients (each a tuple of ints)."""

    support: tuple
    weights: tuple

    @classmethod
    def uniform(cls, q: int, n_clients: int, d: int) -> GradientPrior:
        vecs = list(itertools.product(range(q), repeat=d))
        sup = tuple(itertools.product(vecs, repeat=n_clients))
        return cls(sup, (Fraction(1, len(sup)),) * len(sup))

    @classmethod
    def point_mass(cls, gradients: Sequence[Sequence[int]]) -> GradientPrior:
        return cls((tuple(tuple(g) for g in gradients),), (Fraction(1),))

    @classmethod
    def from_dict(cls, table: dict) -> GradientPrior:
        items = [(tuple(tuple(g) for g in k), Fraction(v)) for k, v in table.items() if v]
        total = sum(v for _, v in items)
        if total != 1 or any(v < 0 for _, v in items):
            raise AuditError("prior weights must be nonnegative and sum to 1")
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    def integer_weights(self) -> list[int]:
        den = math.lcm(*(w.denominator for w in self.weights))
        return [int(w * den) for w in self.weights]


# -- linear algebra over GF(q) ----------------------------------------------


def row_basis(rows: np.ndarray, q: int) -> np.ndarray:
    """Reduced row echelon basis of the row space of ``rows`` over GF(q)."""
    m = [list(map(int, r)) for r in np.asarray(rows) % q]
    n_cols = len(m[0]) if m else 0
    basis: list[list[int]] = []
    col = 0
    while m and col < n_cols:
        piv = next((r for r in m if r[col] % q), None)
        if piv is None:
            col += 1
            continue
        m.remove(piv)
        inv = pow(piv[col], q - 2, q)
        piv = [v * inv % q for v in piv]
        m = [[(a - r[col] * b) % q for a, b in zip(r, piv)] for r in m]
        basis = [[(a - r[col] * b) % q for a, b in zip(r, piv)] for r in basis]
        basis.append(piv)
        m = [r for r in m if any(r)]
        col += 1
    return np.array(basis, dtype=np.int64).reshape(len(basis), n_cols)


def _rank(m: np.ndarray, q: int) -> int:
    if m.shape[0] == 0 or m.shape[1] == 0:
        return 0
    return row_basis(m, q).shape[0]


# -- joint distribution ------------------------------------------------------


@dataclass
class ViewDistribution:
    """Joint table over enumerated states; ``weight`` is an unnormalized int count."""

    view: np.ndarray
    honest: np.ndarray
    colluders: np.ndarray
    aggregate: np.ndarray
    weight: np.ndarray
    adversary: AdversarySpec | None = None

    @property
    def total(self) -> int:
        return int(self.weight.sum())

    def probability(self, mask: np.ndarray) -> Fraction:
        return Fraction(int(self.weight[mask].sum()), self.total)


@dataclass(frozen=True)
class MIResult:
    bits: float
    exact_zero: bool


def _compact(a: np.ndarray) -> np.ndarray:
    return np.unique(a, return_inverse=True)[1].reshape(-1).astype(np.int64)


def _dense(a: np.ndarray) -> np.ndarray:
    """Ids usable as bincount indices; compacts only when the id range is sparse."""
    if len(a) and int(a.max()) >= 4 * len(a):
        return _compact(a)
    return a


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _dense(a), _dense(b)
    return _dense(a * (int(b.max()) + 1) + b)


def _tally(ids: np.ndarray, w: np.ndarray) -> np.ndarray:
    # float64 bincount is exact for totals below 2**53
    return np.rint(np.bincount(ids, weights=w)).astype(np.int64)


def conditional_mi(x, y, z, w) -> MIResult:
    """Exact-zero test and value in bits of I(X; Y | Z) from integer-weighted samples."""
    x, y, z, w = (np.asarray(a, dtype=np.int64).reshape(-1) for a in (x, y, z, w))
    keep = w > 0
    x, y, z, w = x[keep], y[keep], z[keep], w[keep]
    if len(w) == 0:
        raise AuditError("empty distribution")
    total = int(w.sum())
    if total >= 2**53:
        raise AuditError("joint weight too large for exact tallies")
    zc = _dense(z)
    xz = _pair(x, zc)
    yz = _pair(y, zc)
    xyz = _pair(xz, y)
    wz, wxz, wyz, wxyz = _tally(zc, w), _tally(xz, w), _tally(yz, w), _tally(xyz, w)
    first = np.flatnonzero(wxyz)
    pos = np.zeros(len(wxyz), dtype=np.int64)
    pos[xyz] = np.arange(len(xyz))
    rep = pos[first]
    a = wxyz[first]
    b = wz[zc[rep]]
    c = wxz[xz[rep]]
    e = wyz[yz[rep]]
    if total < 2**31:
        exact = bool(np.all(a * b == c * e))
    else:
        exact = all(int(p) * int(s) == int(u) * int(v) for p, s, u, v in zip(a, b, c, e))
    if exact:
        return MIResult(0.0, True)
    af, bf, cf, ef = (v.astype(np.float64) for v in (a, b, c, e))
    bits = float(np.sum(af / total * np.log2(af * bf / (cf * ef))))
    return MIResult(max(bits, 0.0), False)


def mutual_information_bits(dist: ViewDistribution, conditioning: str = "none") -> float:
    """I(view; honest gradients | colluder gradients [, honest aggregate]) in bits."""
    return mutual_information(dist, conditioning).bits


def mutual_information(dist: ViewDistribution, conditioning: str = "none") -> MIResult:
    if conditioning == "none":
        z = dist.colluders
    elif conditioning == "aggregate":
        z = _pair(dist.colluders, dist.aggregate)
    else:
        raise AuditError(f"unknown conditioning {conditioning!r}")
    return conditional_mi(dist.view, dist.honest, z, dist.weight)


# -- enumeration -------------------------------------------------------------


def _as_config(q) -> FieldConfig:
    return q if isinstance(q, FieldConfig) else FieldConfig(q)


class RoundEnumerator:
    """Shared state layout and affine observation map for one (topology, q, d)."""

    def __init__(self, t: Topology, q, d: int, masked: bool = True):
        self.t = t
        self.config = _as_config(q)
        self.q = self.config.q
        self.d = d
        self.masked = masked
        if self.q <= t.n_bs:
            raise AuditError(f"field size q={self.q} must exceed B={t.n_bs}")
        self.mask_shapes = []
        for i in range(t.n_clients):
            p = SharingParams(z_bs=t.z_bs, nu=t.nu(i), d=d)
            self.mask_shapes.append((p.z_bs, p.block_len))
        self.n_grad = t.n_clients * d
        self.rand_slices = []
        pos = self.n_grad
        for z, blen in self.mask_shapes:
            key = slice(pos, pos + d)
            pos += d
            masks = [slice(pos + j * blen, pos + (j + 1) * blen) for j in range(z)]
            pos += z * blen
            self.rand_slices.append((key, masks))
        self.n_vars = pos
        self.n_rand = pos - self.n_grad
        self._map: tuple[np.ndarray, np.ndarray] | None = None

    # state <-> protocol inputs
    def run(self, state: Sequence[int]) -> MessageLog:
        cfg, d = self.config, self.d
        grads = [cfg.vector(state[i * d:(i + 1) * d]) for i in range(self.t.n_clients)]
        rnd = []
        for key, masks in self.rand_slices:
            rnd.append(
                ClientRandomness(cfg.vector(state[key]), tuple(cfg.vector(state[m]) for m in masks))
            )
        return execute_round(self.t, grads, cfg, rnd, masked=self.masked).log

    def local_vars(self, i: int) -> list[int]:
        d = self.d
        idx = list(range(i * d, (i + 1) * d))
        key, masks = self.rand_slices[i]
        idx += list(range(key.start, key.stop))
        for m in masks:
            idx += list(range(m.start, m.stop))
        return idx

    def direct_view(self, state: Sequence[int], adversary: AdversarySpec, kinds=None) -> tuple:
        obs = observe(self.run(list(state)), adversary, kinds)
        for i in sorted(adversary.colluding_clients):
            obs += [state[j] for j in self.local_vars(i)]
        return tuple(obs)

    def observation_map(self, adversary: AdversarySpec, kinds=None) -> tuple[np.ndarray, np.ndarray]:
        """``(A, offset)`` with ``view(s) = A @ s + offset (mod q)``, verified on random states."""
        zero = [0] * self.n_vars
        offset = np.array(self.direct_view(zero, adversary, kinds), dtype=np.int64)
        cols = []
        for j in range(self.n_vars):
            e = list(zero)
            e[j] = 1
            v = np.array(self.direct_view(e, adversary, kinds), dtype=np.int64)
            cols.append((v - offset) % self.q)
        a = np.stack(cols, axis=1) if cols else np.zeros((len(offset), 0), dtype=np.int64)
        rng = random.Random(0x5EED)
        for _ in range(3):
            s = [rng.randrange(self.q) for _ in range(self.n_vars)]
            got = np.array(self.direct_view(s, adversary, kinds), dtype=np.int64)
            if not np.array_equal(got, (a @ np.array(s, dtype=np.int64) + offset) % self.q):
                raise AuditError("observation map is not affine; use method='direct'")
        return a, offset

    def rank_mi(self, adversary: AdversarySpec, kinds=None) -> MIResult:
        """Exact MI under the uniform gradient prior, from ranks of the observation map.

        Given the colluders' gradients the view is ``A_H h + A_R r + c`` with ``h``
        and ``r`` uniform, so ``I = (rank[A_H | A_R] - rank A_R) log2 q``. When the
        honest aggregate is also given, ``h`` ranges over a coset of the kernel
        of the sum map, and ``A_H`` is replaced by ``A_H K``.
        """
        adversary.validate(self.t)
        a, _ = self.observation_map(adversary, kinds)
        d, q = self.d, self.q
        honest = [i for i in range(self.t.n_clients) if i not in adversary.colluding_clients]
        a_h = a[:, [i * d + c for i in honest for c in range(d)]]
        a_r = a[:, self.n_grad:]
        if adversary.federator and honest:
            # kernel of h -> sum_i h_i: e_(j,c) - e_(last,c)
            m = len(honest)
            k = np.zeros((m * d, (m - 1) * d), dtype=np.int64)
            for j in range(m - 1):
                for c in range(d):
                    k[j * d + c, j * d + c] = 1
                    k[(m - 1) * d + c, j * d + c] = q - 1
            a_h = (a_h @ k) % q
        gap = _rank(np.hstack([a_h, a_r]), q) - _rank(a_r, q)
        return MIResult(gap * math.log2(q), gap == 0)

    def n_states(self, prior: GradientPrior) -> int:
        return len(prior.support) * self.q**self.n_rand

    def _prior_arrays(self, prior: GradientPrior, adversary: AdversarySpec):
        n, d = self.t.n_clients, self.d
        for g in prior.support:
            if len(g) != n or any(len(v) != d for v in g):
                raise AuditError(f"prior support entry {g} does not match N={n}, d={d}")
        grads = np.array(
            [[x % self.q for v in g for x in v] for g in prior.support], dtype=np.int64
        ).reshape(len(prior.support), self.n_grad)
        coll = sorted(adversary.colluding_clients)
        honest = [i for i in range(n) if i not in adversary.colluding_clients]
        return grads, coll, honest, np.array(prior.integer_weights(), dtype=np.int64)

    def _encode(self, rows: np.ndarray) -> np.ndarray:
        if rows.shape[1] == 0:
            return np.zeros(rows.shape[0], dtype=np.int64)
        if self.q ** rows.shape[1] < 2**62:
            radix = self.q ** np.arange(rows.shape[1], dtype=np.int64)
            return rows @ radix
        return np.unique(rows, axis=0, return_inverse=True)[1].reshape(-1).astype(np.int64)

    def _grad_ids(self, grads, clients):
        d = self.d
        cols = [c for i in clients for c in range(i * d, (i + 1) * d)]
        return self._encode(grads[:, cols])

    def _agg_ids(self, grads, clients):
        d = self.d
        agg = np.zeros((grads.shape[0], d), dtype=np.int64)
        for i in clients:
            agg = (agg + grads[:, i * d:(i + 1) * d]) % self.q
        return self._encode(agg)

    def enumerate(
        self,
        adversary: AdversarySpec,
        prior: GradientPrior,
        budget: int = DEFAULT_BUDGET,
        method: str = "linear",
        kinds=None,
    ) -> ViewDistribution:
        adversary.validate(self.t)
        total = self.n_states(prior)
        if total > budget:
            raise BudgetExceeded(f"{total} states exceed the enumeration budget {budget}")
        grads, coll, honest, pw = self._prior_arrays(prior, adversary)
        n_g, n_r = grads.shape[0], self.q**self.n_rand
        h_ids = np.repeat(self._grad_ids(grads, honest), n_r)
        c_ids = np.repeat(self._grad_ids(grads, coll), n_r)
        a_ids = np.repeat(self._agg_ids(grads, honest), n_r)
        weight = np.repeat(pw, n_r)
        if method == "linear":
            view = self._linear_views(adversary, grads, kinds)
        elif method == "direct":
            view = self._direct_views(adversary, grads, kinds)
        else:
            raise AuditError(f"unknown method {method!r}")
        return ViewDistribution(view, h_ids, c_ids, a_ids, weight, adversary)

    def _rand_grid(self) -> np.ndarray:
        if self.n_rand == 0:
            return np.zeros((1, 0), dtype=np.int64)
        grid = np.indices((self.q,) * self.n_rand, dtype=np.int64)
        return grid.reshape(self.n_rand, -1).T

    def _linear_views(self, adversary, grads, kinds) -> np.ndarray:
        a, _ = self.observation_map(adversary, kinds)
        basis = row_basis(a, self.q) if a.shape[0] else np.zeros((0, self.n_vars), np.int64)
        bg, br = basis[:, : self.n_grad], basis[:, self.n_grad:]
        part_g = (grads @ bg.T) % self.q
        part_r = (self._rand_grid() @ br.T) % self.q
        rows = (part_g[:, None, :] + part_r[None, :, :]) % self.q
        return self._encode(rows.reshape(part_g.shape[0] * part_r.shape[0], basis.shape[0]))

    def _direct_views(self, adversary, grads, kinds) -> np.ndarray:
        ids: dict[tuple, int] = {}
        out = []
        grid = self._rand_grid()
        for g in grads:
            for r in grid:
                v = self.direct_view(list(map(int, g)) + list(map(int, r)), adversary, kinds)
                out.append(ids.setdefault(v, len(ids)))
        return np.array(out, dtype=np.int64)


def enumerate_views(
    t: Topology,
    q,
    d: int,
    adversary: AdversarySpec,
    gradient_prior: GradientPrior | None = None,
    budget: int = DEFAULT_BUDGET,
    broken: bool = False,
    method: str = "linear",
    kinds=None,
) -> ViewDistribution:
    en = RoundEnumerator(t, q, d, masked=not broken)
    prior = gradient_prior or GradientPrior.uniform(en.q, t.n_clients, d)
    return en.enumerate(adversary, prior, budget, method, kinds)


# -- audit matrix -------------------------------------------------------------


def all_adversaries(t: Topology) -> list[AdversarySpec]:
    out = []
    clients = range(t.n_clients)
    stations = range(1, t.n_bs + 1)
    for nc in range(min(t.privacy.z_ue, t.n_clients) + 1):
        for c in itertools.combinations(clients, nc):
            for nb in range(min(t.z_bs, t.n_bs) + 1):
                for b in itertools.combinations(stations, nb):
                    out.append(AdversarySpec.with_base_stations(c, b))
            out.append(AdversarySpec.with_federator(c))
    return out


@dataclass(frozen=True)
class AuditLine:
    adversary: AdversarySpec
    mi_bits: float
    exact_zero: bool

    @property
    def passed(self) -> bool:
        return self.mi_bits <= ZERO_TOL

    def render(self) -> str:
        c, b = self.adversary.label()
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.adversary.case}, {c}, {b}, {self.mi_bits:.9f}, {verdict}"


@dataclass
class AuditReport:
    lines: list = field(default_factory=list)

    @property
    def worst(self) -> AuditLine:
        return max(self.lines, key=lambda ln: ln.mi_bits)

    @property
    def max_mi(self) -> float:
        return self.worst.mi_bits if self.lines else 0.0

    @property
    def passed(self) -> bool:
        return all(ln.passed for ln in self.lines)

    def render(self) -> str:
        return "".join(ln.render() + "\n" for ln in self.lines)


def audit_matrix(
    t: Topology,
    q,
    d: int,
    prior: GradientPrior | None = None,
    broken: bool = False,
    budget: int = DEFAULT_BUDGET,
    adversaries: Sequence[AdversarySpec] | None = None,
    method: str = "enumerate",
) -> AuditReport:
    """Every adversary within the collusion bounds, both cases, exact MI each.

    ``method="rank"`` skips enumeration and uses :meth:`RoundEnumerator.rank_mi`;
    it is only valid for the uniform prior (``prior`` must be None).
    """
    en = RoundEnumerator(t, q, d, masked=not broken)
    if method == "rank":
        if prior is not None:
            raise AuditError("the rank route assumes the uniform prior")
        lines = [AuditLine(a, *_unpack(en.rank_mi(a))) for a in adversaries or all_adversaries(t)]
        return AuditReport(lines)
    if method != "enumerate":
        raise AuditError(f"unknown audit method {method!r}")
    prior = prior or GradientPrior.uniform(en.q, t.n_clients, d)
    total = en.n_states(prior)
    if total > budget:
        raise BudgetExceeded(f"{total} states exceed the enumeration budget {budget}")
    report = AuditReport()
    for adv in adversaries or all_adversaries(t):
        dist = en.enumerate(adv, prior, budget)
        res = mutual_information(dist, "aggregate" if adv.federator else "none")
        report.lines.append(AuditLine(adv, res.bits, res.exact_zero))
    return report


def _unpack(res: MIResult) -> tuple[float, bool]:
    return res.bits, res.exact_zero


# -- tiny-instance family -------------------------------------------------------


@dataclass(frozen=True)
class TinyCase:
    q: int
    topology: Topology
    prior_name: str
    prior: GradientPrior


def tiny_family(
    qs: Sequence[int] = (3, 5),
    max_clients: int = 3,
    max_bs: int = 3,
    max_z_bs: int = 1,
    z_ue: int = 1,
    uniform_stride: dict | None = None,
) -> Iterable[TinyCase]:
    """Every topology up to client relabeling, under a uniform and a point-mass prior.

    ``uniform_stride`` maps ``(q, N, B, z_bs)`` to a step; for those groups the
    uniform prior is audited only on every step-th topology (point-mass runs
    stay exhaustive). Point masses are drawn from ``random.Random(index)``.
    """
    uniform_stride = uniform_stride or {}
    for q in qs:
        for n in range(1, max_clients + 1):
            for b in range(1, min(max_bs, q - 1) + 1):
                for z in range(0, min(max_z_bs, b - 1) + 1):
                    step = uniform_stride.get((q, n, b, z), 1)
                    for idx, t in enumerate(canonical_topologies(n, b, z, z_ue)):
                        if idx % step == 0:
                            yield TinyCase(q, t, "uniform", GradientPrior.uniform(q, n, 1))
                        rng = random.Random(idx)
                        point = [[rng.randrange(q)] for _ in range(n)]
                        yield TinyCase(q, t, "point", GradientPrior.point_mass(point))
