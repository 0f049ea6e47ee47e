import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierfed.field import MERSENNE_31, FieldConfig
from hierfed.protocol import (
    FEDERATOR,
    Kind,
    MessageLog,
    ProtocolError,
    parse_records,
    plaintext_sum,
    replay,
    run_round,
    run_round_broken_no_masks,
)
from hierfed.topology import PrivacyParams, build_topology, random_topology


def two_pattern_topology():
    return build_topology(3, 3, [{1, 2}, {1, 2}, {2, 3}], [1, 2, 3], PrivacyParams(z_bs=1))


def test_two_clients_shared_pattern():
    F = FieldConfig(11)
    t = build_topology(2, 2, [{1, 2}, {1, 2}], [1, 2], PrivacyParams(z_bs=1))
    for seed in range(5):
        res = run_round(t, [F.vector([1, 2]), F.vector([3, 4])], F, seed)
        assert res.aggregate.to_list() == [4, 6]


def test_single_client():
    F = FieldConfig(7)
    t = build_topology(1, 2, [{1, 2}], [1], PrivacyParams(z_bs=1))
    assert run_round(t, [F.vector([5])], F, 3).aggregate.to_list() == [5]


def test_seeds_change_padded_sums_not_aggregate():
    F = FieldConfig(13)
    t = two_pattern_topology()
    rng = random.Random(1)
    g = [F.random_vector(2, rng) for _ in range(3)]
    a, b = run_round(t, g, F, 0), run_round(t, g, F, 1)
    assert a.aggregate == b.aggregate == plaintext_sum(g, F)
    assert a.padded_sums != b.padded_sums


def test_replay_and_determinism():
    F = FieldConfig(13)
    t = two_pattern_topology()
    g = [F.vector([1, 2]), F.vector([3, 4]), F.vector([5, 6])]
    res = run_round(t, g, F, 42)
    assert replay(res.log).same_outputs(res)
    again = run_round(t, g, F, 42)
    assert again.log.export() == res.log.export()
    assert [m.payload for m in again.log.messages] == [m.payload for m in res.log.messages]


def test_message_schedule():
    F = FieldConfig(13)
    t = two_pattern_topology()
    res = run_round(t, [F.vector([1, 2])] * 3, F, 0)
    kinds = [m.kind for m in res.log.messages]
    # 6 shares, 2 + 2 pattern aggregates (BS1: 1-2, BS2: 1-2 and 2-3, BS3: 2-3), 3 keys, 2 chain, 1 total
    assert kinds.count(Kind.SHARE) == 6
    assert kinds.count(Kind.PATTERN_AGGREGATE) == 4
    assert kinds.count(Kind.KEY_VECTOR) == 3
    assert kinds.count(Kind.KEY_CHAIN_PARTIAL) == 2
    assert kinds.count(Kind.KEY_AGGREGATE) == 1
    chain = [(m.src, m.dst) for m in res.log.messages if m.kind is Kind.KEY_CHAIN_PARTIAL]
    assert chain == [("BS1", "BS2"), ("BS2", "BS3")]
    assert {m.kind for m in res.log.received_by(FEDERATOR)} == {
        Kind.PATTERN_AGGREGATE, Kind.KEY_AGGREGATE
    }
    recs = parse_records(res.log.export())
    assert recs[0] == ("UE1", "BS1", "Share", 2, "1-2")
    assert recs[-1] == ("BS3", "F", "KeyAggregate", 2, None)


def test_broken_variant_same_schedule_same_aggregate():
    F = FieldConfig(13)
    t = two_pattern_topology()
    g = [F.vector([1, 2]), F.vector([3, 4]), F.vector([5, 6])]
    ok, broken = run_round(t, g, F, 9), run_round_broken_no_masks(t, g, F, 9)
    assert broken.aggregate == ok.aggregate
    assert broken.log.records() == ok.log.records()
    assert broken.key_sum == ok.key_sum


def test_incomplete_log_rejected():
    F = FieldConfig(13)
    t = two_pattern_topology()
    res = run_round(t, [F.vector([1, 2])] * 3, F, 0)
    no_key = MessageLog(res.log.q, res.log.d, res.log.z_bs, res.log.n_bs, res.log.points)
    for m in res.log.messages:
        if m.kind is not Kind.KEY_AGGREGATE:
            no_key.append(m)
    with pytest.raises(ProtocolError, match="KeyAggregate"):
        replay(no_key)
    short = MessageLog(res.log.q, res.log.d, res.log.z_bs, res.log.n_bs, res.log.points)
    dropped = False
    for m in res.log.messages:
        if m.kind is Kind.PATTERN_AGGREGATE and not dropped:
            dropped = True
            continue
        short.append(m)
    with pytest.raises(ProtocolError, match="incomplete"):
        replay(short)


def test_input_errors():
    F, G = FieldConfig(13), FieldConfig(11)
    t = two_pattern_topology()
    with pytest.raises(ProtocolError):
        run_round(t, [F.vector([1])] * 2, F, 0)
    with pytest.raises(ProtocolError):
        run_round(t, [F.vector([1]), F.vector([1]), G.vector([1])], F, 0)
    with pytest.raises(ProtocolError):
        run_round(t, [F.vector([1]), F.vector([1]), F.vector([1, 2])], F, 0)
    with pytest.raises(ProtocolError):
        run_round(t, [FieldConfig(3).vector([1])] * 3, FieldConfig(3), 0)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 8),
    b=st.integers(1, 5),
    q=st.sampled_from([101, MERSENNE_31]),
    d=st.integers(1, 9),
    data=st.data(),
)
def test_aggregate_is_plaintext_sum(n, b, q, d, data):
    z = data.draw(st.integers(0, b - 1))
    lo = data.draw(st.integers(1, b - z))
    hi = data.draw(st.integers(lo, b - z))
    seed = data.draw(st.integers(0, 2**32))
    t = random_topology(n, b, z, (lo, hi), seed)
    F = FieldConfig(q)
    rng = random.Random(seed)
    g = [F.random_vector(d, rng) for _ in range(n)]
    res = run_round(t, g, F, seed)
    assert res.aggregate == plaintext_sum(g, F)
    assert res.log.tallies == res.log.recount()
    assert replay(res.log).same_outputs(res)
