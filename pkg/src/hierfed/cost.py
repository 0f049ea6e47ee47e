"""Closed-form communication costs, bounds, and measurement of message logs.

Everything is exact: counts are ints, bounds are :class:`fractions.Fraction`.
Share sizes are padded (``ceil(d / nu)`` symbols per share) unless
``padded=False`` is requested, which returns the unpadded rational formula.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterable

from .protocol import MessageLog
from .topology import Topology, group_by_pattern


class CostError(ValueError):
    pass


def _share_cost(size: int, z: int, d: int, padded: bool):
    nu = size - z
    if padded:
        return size * -(-d // nu)
    return Fraction(d * size, nu)


def predict_c_ue(t: Topology, d: int, padded: bool = True):
    z = t.z_bs
    return sum(_share_cost(len(g), z, d, padded) for g in t.gamma) + d * t.n_clients


def predict_c_bs(t: Topology, d: int) -> int:
    return d * (t.n_bs - 1)


def predict_c_bsf(t: Topology, d: int, padded: bool = True):
    z = t.z_bs
    return d + sum(_share_cost(len(p.pattern), z, d, padded) for p in group_by_pattern(t))


def _weights(t: Topology) -> list[Fraction]:
    z = t.z_bs
    return [Fraction(len(g), len(g) - z) for g in t.gamma]


def predict_c_min(t: Topology, d: int) -> Fraction:
    w = _weights(t)
    return d * (max(w) + sum(w))


def predict_c_min_curve(t: Topology, d: int) -> Fraction:
    """Alternative lower-bound curve ``d * (sum_i w_i + B)``.

    Under uniform connectivity, normalized by ``N d``, this is
    ``(z+nu)/nu + B/N`` rather than the ``(z+nu)/nu * (N+1)/N`` of
    :func:`predict_c_min`.
    """
    return d * (sum(_weights(t)) + t.n_bs)


def predict_loose_bounds(n: int, b: int, z: int, d: int) -> tuple[Fraction, Fraction]:
    if z >= b:
        raise CostError(f"z={z} must be < B={b}")
    lower = d * (n + b + Fraction((n + 1) * b, b - z))
    upper = Fraction(d * (n + b + 2 * n * (z + 1)))
    return lower, upper


def ratio_bound(n: int, b: int, z: int) -> Fraction:
    return 3 + Fraction(b - z, n + 1)


def _share_sum(t: Topology, d: int) -> int:
    z = t.z_bs
    return sum(len(g) * -(-d // (len(g) - z)) for g in t.gamma)


def compute_beta(t: Topology, measured: CostReport, d: int) -> Fraction:
    """Ratio of the sharing cost to the UE->BS share traffic.

    ``beta = (c_total - dN - dB) / (d * sum_i |G_i| / nu_i)``, using padded
    share sizes in the denominator so measured logs stay exact.
    """
    n, b = t.n_clients, t.n_bs
    beta = Fraction(measured.c_total - d * n - d * b, _share_sum(t, d))
    if not Fraction(n + 1, n) <= beta <= 2:
        raise CostError(f"beta={beta} outside [(N+1)/N, 2]: accounting bug")
    return beta


@dataclass
class CostReport:
    c_ue: int = 0
    c_bs: int = 0
    c_bsf: int = 0
    c_min: Fraction | None = None
    loose_lower: Fraction | None = None
    loose_upper: Fraction | None = None
    beta: Fraction | None = None
    tight_value: Fraction | None = None
    ratio_bound: Fraction | None = None

    @property
    def c_total(self) -> int:
        return self.c_ue + self.c_bs + self.c_bsf


def measure(log: MessageLog, t: Topology | None = None) -> CostReport:
    """Tally symbols per link class; with a topology, fill in bounds and beta."""
    tallies = log.recount()
    rep = CostReport(tallies["UE->BS"], tallies["BS->BS"], tallies["BS->F"])
    if t is None or not log.messages:
        return rep
    d = log.d
    rep.c_min = predict_c_min(t, d)
    rep.loose_lower, rep.loose_upper = predict_loose_bounds(t.n_clients, t.n_bs, t.z_bs, d)
    rep.beta = compute_beta(t, rep, d)
    rep.tight_value = d * (t.n_clients + t.n_bs) + rep.beta * _share_sum(t, d)
    rep.ratio_bound = ratio_bound(t.n_clients, t.n_bs, t.z_bs)
    return rep


def predict(t: Topology, d: int) -> CostReport:
    return CostReport(predict_c_ue(t, d), predict_c_bs(t, d), predict_c_bsf(t, d))


@dataclass(frozen=True)
class SweepRow:
    nu: int
    c_min_norm: Fraction
    c_min_curve_norm: Fraction
    tight_lower_norm: Fraction
    upper_norm: Fraction


def cost_sweep(n: int, b: int, z: int, d: int, nu_range: Iterable[int]) -> list[SweepRow]:
    """Uniform-connectivity costs normalized by ``N d`` for each ``nu``.

    ``upper`` takes beta = 2, ``tight_lower`` takes beta = (N+1)/N. The
    normalized values do not depend on ``d``.
    """
    if d < 1:
        raise CostError("d must be >= 1")
    rows = []
    for nu in nu_range:
        if nu < 1 or nu + z > b:
            raise CostError(f"nu={nu} infeasible: need 1 <= nu and nu + z_bs <= B={b}")
        w = Fraction(z + nu, nu)
        base = 1 + Fraction(b, n)
        rows.append(
            SweepRow(
                nu=nu,
                c_min_norm=w * Fraction(n + 1, n),
                c_min_curve_norm=w + Fraction(b, n),
                tight_lower_norm=base + Fraction(n + 1, n) * w,
                upper_norm=base + 2 * w,
            )
        )
    return rows


def render_rational(x: Fraction, digits: int = 15) -> str:
    """Exact decimal when it terminates, else ``digits`` significant digits."""
    x = Fraction(x)
    den = x.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    with localcontext() as ctx:
        if den == 1:
            ctx.prec = 200
            out = Decimal(x.numerator) / Decimal(x.denominator)
        else:
            ctx.prec = digits
            out = Decimal(x.numerator) / Decimal(x.denominator)
    text = format(out.normalize(), "f")
    return text


SWEEP_HEADER = ("nu", "c_min_norm", "tight_lower_norm", "upper_norm")


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(
            [r.nu, render_rational(r.c_min_norm), render_rational(r.tight_lower_norm),
             render_rational(r.upper_norm)]
        )
    return buf.getvalue()
