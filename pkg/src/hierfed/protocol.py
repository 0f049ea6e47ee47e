"""One aggregation round as deterministic message passing.

Schedule (single-threaded, fixed order):

1. every client, in index order, sends one ``Share`` to each connected base
   station (ascending label);
2. every base station, in label order, sums the shares of each connectivity
   pattern it serves and sends one ``PatternAggregate`` per pattern;
3. every client sends its key vector to its main base station;
4. the cluster key sums are chained ``BS1 -> BS2 -> ... -> BSB``;
5. ``BSB`` sends the total key sum to the federator, which decodes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .field import FieldConfig, FieldVector, InterpolationError, vector_sum
from .sharing import SharingParams, check_points, draw_masks, make_shares, reconstruct_padded
from .topology import Topology, group_by_pattern

FEDERATOR = "F"
LINK_CLASSES = ("UE->BS", "BS->BS", "BS->F")


class ProtocolError(RuntimeError):
    pass


class Kind(str, Enum):
    SHARE = "Share"
    KEY_VECTOR = "KeyVector"
    PATTERN_AGGREGATE = "PatternAggregate"
    KEY_CHAIN_PARTIAL = "KeyChainPartial"
    KEY_AGGREGATE = "KeyAggregate"


def ue(i: int) -> str:
    return f"UE{i + 1}"


def bs(k: int) -> str:
    return f"BS{k}"


def bs_label(actor: str) -> int:
    return int(actor[2:])


def link_class(src: str, dst: str) -> str:
    a = "UE" if src.startswith("UE") else "BS"
    b = "F" if dst == FEDERATOR else ("UE" if dst.startswith("UE") else "BS")
    return f"{a}->{b}"


def tag_of(pattern) -> str:
    return "-".join(str(k) for k in sorted(pattern))


def pattern_of(tag: str) -> tuple[int, ...]:
    return tuple(int(k) for k in tag.split("-"))


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    kind: Kind
    payload: FieldVector
    pattern_tag: str | None = None

    def record(self) -> str:
        return f"{self.src} {self.dst} {self.kind.value} {len(self.payload)} {self.pattern_tag or '-'}"


@dataclass
class MessageLog:
    """Ordered messages plus the public round parameters the federator knows."""

    q: int
    d: int
    z_bs: int
    n_bs: int
    points: dict
    messages: list = field(default_factory=list)
    tallies: dict = field(default_factory=lambda: dict.fromkeys(LINK_CLASSES, 0))

    def append(self, msg: Message) -> None:
        n = len(msg.payload)
        if n == 0:
            raise ProtocolError(f"empty payload in {msg.record()}")
        if msg.kind in (Kind.SHARE, Kind.PATTERN_AGGREGATE):
            nu = len(pattern_of(msg.pattern_tag)) - self.z_bs
            expected = -(-self.d // nu)
        else:
            expected = self.d
        if n != expected:
            raise ProtocolError(f"{msg.kind.value} carries {n} symbols, expected {expected}")
        self.messages.append(msg)
        self.tallies[link_class(msg.src, msg.dst)] += n

    def recount(self) -> dict:
        out = dict.fromkeys(LINK_CLASSES, 0)
        for m in self.messages:
            out[link_class(m.src, m.dst)] += len(m.payload)
        return out

    def records(self) -> list[str]:
        return [m.record() for m in self.messages]

    def export(self) -> str:
        return "".join(line + "\n" for line in self.records())

    def received_by(self, actor: str) -> list[Message]:
        return [m for m in self.messages if m.dst == actor]

    def incident(self, actors: set) -> list[Message]:
        return [m for m in self.messages if m.src in actors or m.dst in actors]


def parse_records(text: str) -> list[tuple[str, str, str, int, str | None]]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        src, dst, kind, length, tag = line.split()
        out.append((src, dst, Kind(kind).value, int(length), None if tag == "-" else tag))
    return out


@dataclass
class RoundResult:
    aggregate: FieldVector
    padded_sums: dict
    key_sum: FieldVector
    log: MessageLog

    def same_outputs(self, other: RoundResult) -> bool:
        return (
            self.aggregate == other.aggregate
            and self.padded_sums == other.padded_sums
            and self.key_sum == other.key_sum
        )


@dataclass(frozen=True)
class ClientRandomness:
    key: FieldVector
    masks: tuple


def client_params(t: Topology, i: int, d: int) -> SharingParams:
    return SharingParams(z_bs=t.z_bs, nu=t.nu(i), d=d)


def draw_randomness(t: Topology, config: FieldConfig, d: int, seed) -> list[ClientRandomness]:
    """Key then mask blocks per client, in client order, from one seeded stream."""
    rng = random.Random(seed)
    out = []
    for i in range(t.n_clients):
        key = config.random_vector(d, rng)
        masks = draw_masks(client_params(t, i, d), config, rng)
        out.append(ClientRandomness(key, tuple(masks)))
    return out


def _check_inputs(t: Topology, gradients: Sequence[FieldVector], config: FieldConfig) -> int:
    if len(gradients) != t.n_clients:
        raise ProtocolError(f"expected {t.n_clients} gradients, got {len(gradients)}")
    if config.q <= t.n_bs:
        raise ProtocolError(f"field size q={config.q} must exceed B={t.n_bs}")
    check_points(t.points, config.q)
    d = len(gradients[0])
    for i, g in enumerate(gradients):
        if g.config.q != config.q:
            raise ProtocolError(f"gradient {i} lives in GF({g.config.q}), round uses GF({config.q})")
        if len(g) != d:
            raise ProtocolError(f"gradient {i} has length {len(g)}, expected {d}")
    return d


def execute_round(
    t: Topology,
    gradients: Sequence[FieldVector],
    config: FieldConfig,
    randomness: Sequence[ClientRandomness],
    masked: bool = True,
) -> RoundResult:
    """Run the round with explicit per-client randomness."""
    d = _check_inputs(t, gradients, config)
    log = MessageLog(config.q, d, t.z_bs, t.n_bs, dict(t.points))
    patterns = group_by_pattern(t)

    # phase a: shares to every connected base station
    inbox: dict[int, dict[int, FieldVector]] = {k: {} for k in range(1, t.n_bs + 1)}
    for i, g in enumerate(gradients):
        params = client_params(t, i, d)
        rnd = randomness[i]
        masks = rnd.masks if masked else tuple(config.zeros(params.block_len) for _ in rnd.masks)
        pts = {k: t.points[k] for k in sorted(t.gamma[i])}
        shares = make_shares(g, rnd.key, params, pts, masks=masks)
        tag = tag_of(t.gamma[i])
        for k in sorted(shares):
            log.append(Message(ue(i), bs(k), Kind.SHARE, shares[k], tag))
            inbox[k][i] = shares[k]

    for k in range(1, t.n_bs + 1):
        for p in patterns:
            if k not in p.pattern:
                continue
            parts = [inbox[k][i] for i in p.members]
            agg = vector_sum(parts, len(parts[0]), config)
            log.append(Message(bs(k), FEDERATOR, Kind.PATTERN_AGGREGATE, agg, p.tag))

    # phase b: key aggregation along the base-station chain
    cluster_keys = {k: config.zeros(d) for k in range(1, t.n_bs + 1)}
    for i in range(t.n_clients):
        m = t.main_bs[i]
        log.append(Message(ue(i), bs(m), Kind.KEY_VECTOR, randomness[i].key))
        cluster_keys[m] = cluster_keys[m] + randomness[i].key
    running = cluster_keys[1]
    for k in range(2, t.n_bs + 1):
        log.append(Message(bs(k - 1), bs(k), Kind.KEY_CHAIN_PARTIAL, running))
        running = running + cluster_keys[k]
    log.append(Message(bs(t.n_bs), FEDERATOR, Kind.KEY_AGGREGATE, running))

    return federator_decode(log)


def federator_decode(log: MessageLog) -> RoundResult:
    """Decode using only messages delivered to the federator."""
    config = FieldConfig(log.q)
    evals: dict[str, list[tuple[int, FieldVector]]] = {}
    key_sum = None
    for m in log.received_by(FEDERATOR):
        if m.kind is Kind.PATTERN_AGGREGATE:
            evals.setdefault(m.pattern_tag, []).append((log.points[bs_label(m.src)], m.payload))
        elif m.kind is Kind.KEY_AGGREGATE:
            key_sum = m.payload
        else:
            raise ProtocolError(f"federator received a {m.kind.value} message")
    if key_sum is None:
        raise ProtocolError("incomplete log: no KeyAggregate delivered to the federator")
    padded_sums = {}
    for tag in sorted(evals, key=pattern_of):
        pattern = pattern_of(tag)
        params = SharingParams(z_bs=log.z_bs, nu=len(pattern) - log.z_bs, d=log.d)
        if len(evals[tag]) < params.n_points:
            raise ProtocolError(
                f"incomplete log: pattern {tag} has {len(evals[tag])} of {params.n_points} evaluations"
            )
        try:
            padded_sums[tag] = reconstruct_padded(evals[tag], params)
        except InterpolationError as exc:
            raise ProtocolError(f"interpolation failed for pattern {tag}: {exc}") from exc
    total = vector_sum(list(padded_sums.values()), log.d, config)
    return RoundResult(total - key_sum, padded_sums, key_sum, log)


def run_round(
    t: Topology, gradients: Sequence[FieldVector], config: FieldConfig, seed
) -> RoundResult:
    d = _check_inputs(t, gradients, config)
    return execute_round(t, gradients, config, draw_randomness(t, config, d, seed))


def run_round_broken_no_masks(
    t: Topology, gradients: Sequence[FieldVector], config: FieldConfig, seed
) -> RoundResult:
    """Same schedule and keys as :func:`run_round`, but every mask block is zero."""
    d = _check_inputs(t, gradients, config)
    return execute_round(t, gradients, config, draw_randomness(t, config, d, seed), masked=False)


def replay(log: MessageLog) -> RoundResult:
    return federator_decode(log)


def plaintext_sum(gradients: Sequence[FieldVector], config: FieldConfig) -> FieldVector:
    return vector_sum(gradients, len(gradients[0]), config)
