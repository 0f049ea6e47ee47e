import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierfed.field import FieldConfig, FieldError
from hierfed.privacy import (
    AdversarySpec,
    AuditError,
    BudgetExceeded,
    GradientPrior,
    RoundEnumerator,
    all_adversaries,
    audit_matrix,
    conditional_mi,
    enumerate_views,
    mutual_information,
    mutual_information_bits,
    observe,
    row_basis,
    tiny_family,
)
from hierfed.protocol import Kind, run_round
from hierfed.topology import PrivacyParams, build_topology, random_topology

LOG3 = math.log2(3)


def one_client():
    return build_topology(1, 2, [{1, 2}], [1], PrivacyParams(z_ue=0, z_bs=1))


def two_clients(z_ue=1):
    return build_topology(2, 2, [{1, 2}, {1, 2}], [1, 2], PrivacyParams(z_ue=z_ue, z_bs=1))


def brute_mi(xs, ys, zs):
    """Plain-float I(X;Y|Z) from equally weighted samples."""
    n = len(xs)
    c = {}
    for key in [("xyz", x, y, z) for x, y, z in zip(xs, ys, zs)] + [("xz", x, z) for x, z in zip(xs, zs)] \
            + [("yz", y, z) for y, z in zip(ys, zs)] + [("z", z) for z in zs]:
        c[key] = c.get(key, 0) + 1
    return sum(
        c[("xyz", x, y, z)] / n * math.log2(c[("xyz", x, y, z)] * c[("z", z)] / (c[("xz", x, z)] * c[("yz", y, z)]))
        for x, y, z in set(zip(xs, ys, zs))
    )


def test_conditional_mi_basics():
    # X = Y uniform on 3 values: log2 3 bits
    r = conditional_mi([0, 1, 2], [0, 1, 2], [0, 0, 0], [1, 1, 1])
    assert not r.exact_zero and r.bits == pytest.approx(LOG3, abs=1e-12)
    # independent product
    xs, ys = zip(*itertools.product(range(3), range(3)))
    assert conditional_mi(xs, ys, [0] * 9, [1] * 9).exact_zero
    # conditioning on Y itself removes everything
    assert conditional_mi([0, 1, 2], [0, 1, 2], [0, 1, 2], [1, 1, 1]).exact_zero
    with pytest.raises(AuditError):
        conditional_mi([0], [0], [0], [0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2)), min_size=1, max_size=40))
def test_conditional_mi_matches_brute_force(samples):
    xs, ys, zs = zip(*samples)
    r = conditional_mi(xs, ys, zs, [1] * len(xs))
    assert r.bits == pytest.approx(brute_mi(xs, ys, zs), abs=1e-9)
    assert r.exact_zero == (abs(brute_mi(xs, ys, zs)) < 1e-12)


def test_row_basis():
    rows = np.array([[1, 2, 0], [2, 4, 0], [0, 0, 3]])
    assert row_basis(rows, 5).tolist() == [[1, 2, 0], [0, 0, 1]]
    assert row_basis(np.zeros((2, 3), dtype=np.int64), 5).shape == (0, 3)


def test_single_base_station_view_is_uniform():
    t = one_client()
    for method in ("linear", "direct"):
        dist = enumerate_views(t, 3, 1, AdversarySpec.with_base_stations((), (1,)), method=method)
        # gradient, key and one mask symbol
        assert dist.total == 3**3
        assert mutual_information(dist).exact_zero
        # every (view, g) cell has the same weight: view uniform and independent of g
        counts = {}
        for v, h, w in zip(dist.view, dist.honest, dist.weight):
            counts[(v, h)] = counts.get((v, h), 0) + w
        assert len(set(counts.values())) == 1


def test_case_two_honest_is_private():
    t = two_clients(z_ue=0)
    dist = enumerate_views(t, 3, 1, AdversarySpec.with_federator())
    assert mutual_information_bits(dist, "aggregate") == 0.0


def test_federator_learns_exactly_the_sum():
    t = two_clients(z_ue=0)
    dist = enumerate_views(t, 3, 1, AdversarySpec.with_federator())
    # without conditioning it learns log2(3) bits: the sum of two uniform F_3 values
    assert mutual_information_bits(dist, "none") == pytest.approx(LOG3, abs=1e-12)
    assert mutual_information(dist, "aggregate").exact_zero
    # and the view determines the aggregate
    pairs = {}
    for v, a in zip(dist.view, dist.aggregate):
        pairs.setdefault(int(v), set()).add(int(a))
    assert all(len(s) == 1 for s in pairs.values())


def test_broken_variant_leaks_at_main_base_station():
    t = one_client()
    adv = AdversarySpec.with_base_stations((), (1,))
    dist = enumerate_views(t, 3, 1, adv, broken=True)
    assert mutual_information_bits(dist) == pytest.approx(LOG3, abs=1e-12)
    report = audit_matrix(t, 3, 1, broken=True)
    assert not report.passed
    assert report.worst.adversary == adv
    assert report.worst.mi_bits >= 1


def test_broken_station_before_main_sees_nothing():
    # main station is BS2, so BS1 gets g+r and only forwards a zero chain partial
    t = build_topology(1, 2, [{1, 2}], [2], PrivacyParams(z_bs=1))
    dist = enumerate_views(t, 3, 1, AdversarySpec.with_base_stations((), (1,)), broken=True)
    assert mutual_information(dist).exact_zero
    # BS2 gets r from the client and g+r as a share
    dist = enumerate_views(t, 3, 1, AdversarySpec.with_base_stations((), (2,)), broken=True)
    assert mutual_information_bits(dist) == pytest.approx(LOG3, abs=1e-12)


def test_linear_matches_direct():
    rng = random.Random(5)
    for _ in range(3):
        t = random_topology(2, 2, 1, 1, rng.randrange(10**6), z_ue=1)
        for adv in all_adversaries(t):
            for broken in (False, True):
                a = enumerate_views(t, 3, 1, adv, broken=broken, method="linear")
                b = enumerate_views(t, 3, 1, adv, broken=broken, method="direct")
                cond = "aggregate" if adv.federator else "none"
                assert mutual_information_bits(a, cond) == pytest.approx(
                    mutual_information_bits(b, cond), abs=1e-12
                )


def test_observe_respects_actor_incidence():
    t = two_clients()
    F = FieldConfig(5)
    log = run_round(t, [F.vector([1]), F.vector([2])], F, 0).log
    fed = observe(log, AdversarySpec.with_federator())
    received = [v for m in log.messages if m.dst == "F" for v in m.payload.values]
    assert fed == received
    keys_only = observe(log, AdversarySpec.with_base_stations((), (1,)), kinds=[Kind.KEY_VECTOR.value])
    key = next(m for m in log.messages if m.kind is Kind.KEY_VECTOR and m.dst == "BS1")
    assert keys_only == list(key.payload.values)


def test_adversary_enumeration_and_validation():
    t = two_clients(z_ue=1)
    advs = all_adversaries(t)
    # per client subset (3 of size <= 1): 3 base-station subsets + federator
    assert len(advs) == 3 * 4
    with pytest.raises(AuditError):
        AdversarySpec(frozenset(), frozenset({1}), True)
    with pytest.raises(AuditError):
        AdversarySpec.with_base_stations((0, 1), ()).validate(t)
    with pytest.raises(AuditError):
        AdversarySpec.with_base_stations((), (1, 2)).validate(t)
    assert AdversarySpec.with_base_stations((0,), (2,)).label() == ("{1}", "BS{2}")


def test_all_colluding_clients_edge_case():
    t = two_clients(z_ue=2)
    assert audit_matrix(t, 3, 1).passed


def test_non_prime_field_and_budget():
    with pytest.raises(FieldError):
        enumerate_views(one_client(), 4, 1, AdversarySpec.with_federator())
    with pytest.raises(BudgetExceeded):
        enumerate_views(one_client(), 3, 1, AdversarySpec.with_federator(), budget=10)
    with pytest.raises(BudgetExceeded):
        audit_matrix(two_clients(), 3, 2, budget=100)


def test_priors():
    p = GradientPrior.uniform(3, 2, 1)
    assert len(p.support) == 9 and sum(p.weights) == 1
    with pytest.raises(AuditError):
        GradientPrior.from_dict({((0,),): 0.5})
    pm = GradientPrior.point_mass([[1], [2]])
    report = audit_matrix(two_clients(), 3, 1, pm)
    # a point mass carries no information to leak
    assert report.passed and all(line.exact_zero for line in report.lines)


def test_nonuniform_prior_still_private():
    t = two_clients()
    table = {((a,), (b,)): (1 + a + 2 * b) for a in range(3) for b in range(3)}
    total = sum(table.values())
    from fractions import Fraction
    prior = GradientPrior.from_dict({k: Fraction(v, total) for k, v in table.items()})
    assert audit_matrix(t, 3, 1, prior).passed


def test_more_stations_never_less_leakage():
    # same colluding clients, superset of stations: the view only grows
    t = build_topology(2, 4, [{1, 2, 3}, {2, 3, 4}], [1, 3], PrivacyParams(z_ue=1, z_bs=2))
    for clients in ((), (0,)):
        for broken in (False, True):
            mi = [
                mutual_information_bits(
                    enumerate_views(t, 5, 1, AdversarySpec.with_base_stations(clients, b), broken=broken)
                )
                for b in ((), (1,), (1, 3))
            ]
            assert mi[0] <= mi[1] + 1e-12 <= mi[2] + 2e-12


def test_report_render():
    report = audit_matrix(one_client(), 3, 1)
    lines = report.render().splitlines()
    assert lines[0] == "i, {}, BS{}, 0.000000000, PASS"
    assert len(lines) == len(all_adversaries(one_client()))


def test_tiny_family_shape():
    cases = list(tiny_family(qs=(3,), max_clients=2, max_bs=2))
    assert {c.q for c in cases} == {3}
    assert {c.prior_name for c in cases} == {"uniform", "point"}
    assert all(c.topology.n_bs < c.q for c in cases)


@pytest.mark.parametrize("seed", range(3))
def test_random_small_instances_pass(seed):
    t = random_topology(2, 2, 1, 1, seed, z_ue=1)
    assert audit_matrix(t, 3, 1).passed
    assert not audit_matrix(t, 3, 1, broken=True).passed


def test_enumerator_rejects_small_field():
    with pytest.raises(AuditError):
        RoundEnumerator(build_topology(1, 3, [{1, 2, 3}], [1]), 3, 1)


def test_rank_route_matches_enumeration():
    rng = random.Random(11)
    checked = 0
    for _ in range(6):
        n, b = rng.randint(1, 2), rng.randint(1, 2)
        z = rng.randint(0, b - 1)
        t = random_topology(n, b, z, (1, b - z), rng.randrange(10**6), z_ue=1)
        for broken in (False, True):
            a = audit_matrix(t, 3, 1, broken=broken)
            r = audit_matrix(t, 3, 1, broken=broken, method="rank")
            for x, y in zip(a.lines, r.lines):
                assert x.adversary == y.adversary
                assert x.mi_bits == pytest.approx(y.mi_bits, abs=1e-9)
                assert x.exact_zero == y.exact_zero
                checked += 1
    assert checked > 20


def test_rank_route_d2_and_errors():
    t = build_topology(2, 2, [{1, 2}, {1, 2}], [1, 1], PrivacyParams(z_ue=1, z_bs=1))
    a = audit_matrix(t, 3, 2, broken=True)
    r = audit_matrix(t, 3, 2, broken=True, method="rank")
    assert [x.mi_bits for x in a.lines] == pytest.approx([y.mi_bits for y in r.lines], abs=1e-9)
    with pytest.raises(AuditError):
        audit_matrix(t, 3, 1, GradientPrior.point_mass([[0], [0]]), method="rank")
    with pytest.raises(AuditError):
        audit_matrix(t, 3, 1, method="magic")
