"""Prime-field arithmetic, vectors over GF(q), and polynomial evaluation/interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

MERSENNE_31 = 2**31 - 1
MERSENNE_61 = 2**61 - 1


class FieldError(ValueError):
    pass


class ModulusMismatch(FieldError):
    pass


class InterpolationError(FieldError):
    pass


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for every n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldConfig:
    q: int = MERSENNE_31

    def __post_init__(self):
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise FieldError(f"modulus must be an integer, got {self.q!r}")
        if not is_prime(self.q):
            raise FieldError(f"modulus q={self.q} is not prime")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self)

    def vector(self, values: Iterable[int]) -> FieldVector:
        return FieldVector(tuple(int(v) % self.q for v in values), self)

    def zeros(self, n: int) -> FieldVector:
        return FieldVector((0,) * n, self)

    def random_vector(self, n: int, rng) -> FieldVector:
        return FieldVector(tuple(rng.randrange(self.q) for _ in range(n)), self)


def _check(a_cfg: FieldConfig, b_cfg: FieldConfig) -> None:
    if a_cfg.q != b_cfg.q:
        raise ModulusMismatch(f"modulus mismatch: {a_cfg.q} vs {b_cfg.q}")


@dataclass(frozen=True)
class FieldElement:
    value: int
    config: FieldConfig

    def __post_init__(self):
        if not 0 <= self.value < self.config.q:
            raise FieldError(f"{self.value} is not a residue mod {self.config.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            _check(self.config, other.config)
            return other.value
        if isinstance(other, int):
            return other % self.config.q
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value + v) % self.config.q, self.config)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value - v) % self.config.q, self.config)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((v - self.value) % self.config.q, self.config)

    def __neg__(self):
        return FieldElement(-self.value % self.config.q, self.config)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value * v % self.config.q, self.config)

    __rmul__ = __mul__

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return self * ff_inv(FieldElement(v, self.config))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.config.q})"


@dataclass(frozen=True)
class FieldVector:
    """Immutable vector over GF(q); values are stored as plain ints in [0, q)."""

    values: tuple
    config: FieldConfig

    def __post_init__(self):
        q = self.config.q
        for v in self.values:
            if not 0 <= v < q:
                raise FieldError(f"{v} is not a residue mod {q}")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[FieldElement]:
        return (FieldElement(v, self.config) for v in self.values)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return FieldVector(self.values[idx], self.config)
        return FieldElement(self.values[idx], self.config)

    def _other(self, other: FieldVector) -> tuple:
        _check(self.config, other.config)
        if len(other) != len(self):
            raise FieldError(f"length mismatch: {len(self)} vs {len(other)}")
        return other.values

    def __add__(self, other: FieldVector) -> FieldVector:
        q = self.config.q
        return FieldVector(
            tuple((a + b) % q for a, b in zip(self.values, self._other(other))), self.config
        )

    def __sub__(self, other: FieldVector) -> FieldVector:
        q = self.config.q
        return FieldVector(
            tuple((a - b) % q for a, b in zip(self.values, self._other(other))), self.config
        )

    def scale(self, c) -> FieldVector:
        if isinstance(c, FieldElement):
            _check(self.config, c.config)
            c = c.value
        q = self.config.q
        return FieldVector(tuple(v * c % q for v in self.values), self.config)

    def concat(self, other: FieldVector) -> FieldVector:
        _check(self.config, other.config)
        return FieldVector(self.values + other.values, self.config)

    def to_list(self) -> list[int]:
        return list(self.values)


def vector_sum(vectors: Sequence[FieldVector], length: int, config: FieldConfig) -> FieldVector:
    acc = [0] * length
    q = config.q
    for v in vectors:
        _check(config, v.config)
        if len(v) != length:
            raise FieldError(f"length mismatch: {len(v)} vs {length}")
        for j, x in enumerate(v.values):
            acc[j] = (acc[j] + x) % q
    return FieldVector(tuple(acc), config)


def ff_add(a: FieldElement, b: FieldElement) -> FieldElement:
    _check(a.config, b.config)
    return a + b


def ff_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    _check(a.config, b.config)
    return a * b


def ff_inv(a: FieldElement) -> FieldElement:
    if a.value == 0:
        raise ZeroDivisionError("zero has no inverse")
    q = a.config.q
    return FieldElement(pow(a.value, q - 2, q), a.config)


def poly_eval(coeffs: FieldVector, x: FieldElement) -> FieldElement:
    """Horner evaluation; ``coeffs[j]`` multiplies ``x**j``."""
    if len(coeffs) == 0:
        raise FieldError("empty coefficient vector")
    _check(coeffs.config, x.config)
    q = coeffs.config.q
    acc = 0
    for c in reversed(coeffs.values):
        acc = (acc * x.value + c) % q
    return FieldElement(acc, coeffs.config)


def interpolation_matrix(xs: Sequence[int], q: int) -> list[list[int]]:
    """Inverse Vandermonde via Lagrange basis polynomials.

    Row ``j`` holds the weights turning the values at ``xs`` into the coefficient
    of ``x**j`` of the unique polynomial of degree < len(xs).
    """
    n = len(xs)
    if len(set(x % q for x in xs)) != n:
        raise InterpolationError(f"duplicate evaluation points: {list(xs)}")
    rows = [[0] * n for _ in range(n)]
    for k, xk in enumerate(xs):
        # basis = prod_{m != k} (x - x_m) / (x_k - x_m), built low degree first
        basis = [1]
        denom = 1
        for m, xm in enumerate(xs):
            if m == k:
                continue
            nxt = [0] * (len(basis) + 1)
            for j, c in enumerate(basis):
                nxt[j] = (nxt[j] - c * xm) % q
                nxt[j + 1] = (nxt[j + 1] + c) % q
            basis = nxt
            denom = denom * (xk - xm) % q
        inv = pow(denom, q - 2, q)
        for j in range(n):
            rows[j][k] = basis[j] * inv % q
    return rows


def lagrange_interpolate(
    points: Sequence[tuple[FieldElement, FieldElement]], degree_bound: int
) -> FieldVector:
    """Coefficients of the polynomial of degree < ``degree_bound`` through ``points``.

    Extra points beyond ``degree_bound`` are checked for consistency.
    """
    if degree_bound < 1:
        raise InterpolationError("degree_bound must be >= 1")
    if len(points) < degree_bound:
        raise InterpolationError(f"need {degree_bound} points, got {len(points)}")
    config = points[0][0].config
    for x, y in points:
        _check(config, x.config)
        _check(config, y.config)
    q = config.q
    xs = [p[0].value for p in points]
    if len(set(xs)) != len(xs):
        raise InterpolationError(f"duplicate x-coordinates: {xs}")
    head = points[:degree_bound]
    mat = interpolation_matrix([p[0].value for p in head], q)
    ys = [p[1].value for p in head]
    coeffs = config.vector(sum(w * y for w, y in zip(row, ys)) % q for row in mat)
    for x, y in points[degree_bound:]:
        if poly_eval(coeffs, x).value != y.value:
            raise InterpolationError(f"point ({x.value}, {y.value}) inconsistent with interpolant")
    return coeffs
