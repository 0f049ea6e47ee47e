"""Packed (ramp) secret sharing of a key-padded gradient.

The share polynomial of a client holds its ``nu`` data blocks in degrees
``0..nu-1`` and ``z_bs`` uniformly random mask blocks in degrees
``nu..nu+z_bs-1``. Any ``z_bs`` evaluations are independent of the data;
any ``z_bs + nu`` evaluations determine it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

from .field import FieldConfig, FieldError, FieldVector, InterpolationError, interpolation_matrix


class SharingError(ValueError):
    pass


def padded_length(d: int, nu: int) -> int:
    return nu * -(-d // nu)


@dataclass(frozen=True)
class SharingParams:
    z_bs: int
    nu: int
    d: int

    def __post_init__(self):
        if self.z_bs < 0:
            raise SharingError(f"z_bs must be >= 0, got {self.z_bs}")
        if self.nu < 1:
            raise SharingError(f"nu must be >= 1, got {self.nu}")
        if self.d < 1:
            raise SharingError(f"d must be >= 1, got {self.d}")

    @property
    def d_pad(self) -> int:
        return padded_length(self.d, self.nu)

    @property
    def block_len(self) -> int:
        return self.d_pad // self.nu

    @property
    def n_points(self) -> int:
        return self.z_bs + self.nu


# base-station index -> share vector f(alpha_k)
ShareBundle = Dict[int, FieldVector]
# base-station index -> evaluation point alpha_k (nonzero, pairwise distinct)
EvaluationPointMap = Mapping[int, int]


def default_points(n_bs: int) -> dict[int, int]:
    return {k: k for k in range(1, n_bs + 1)}


def check_points(points: Mapping[int, int], q: int) -> None:
    residues = [a % q for a in points.values()]
    if any(a == 0 for a in residues):
        raise SharingError("evaluation points must be nonzero mod q")
    if len(set(residues)) != len(residues):
        raise SharingError(f"evaluation points not distinct mod q={q}: {dict(points)}")


def pad_and_split(v: FieldVector, nu: int) -> list[FieldVector]:
    if nu < 1:
        raise SharingError(f"nu must be >= 1, got {nu}")
    d_pad = padded_length(len(v), nu)
    vals = v.values + (0,) * (d_pad - len(v))
    size = d_pad // nu
    return [FieldVector(vals[j * size:(j + 1) * size], v.config) for j in range(nu)]


def evaluate_blocks(blocks: Sequence[FieldVector], alpha: int, config: FieldConfig) -> FieldVector:
    """Evaluate ``sum_j x**j * blocks[j]`` at ``alpha``, coordinate-wise (Horner)."""
    q = config.q
    size = len(blocks[0])
    acc = [0] * size
    for block in reversed(blocks):
        vals = block.values
        for c in range(size):
            acc[c] = (acc[c] * alpha + vals[c]) % q
    return FieldVector(tuple(acc), config)


def draw_masks(params: SharingParams, config: FieldConfig, rng) -> list[FieldVector]:
    return [config.random_vector(params.block_len, rng) for _ in range(params.z_bs)]


def make_shares(
    g: FieldVector,
    r: FieldVector,
    params: SharingParams,
    points: EvaluationPointMap,
    rng=None,
    masks: Sequence[FieldVector] | None = None,
) -> ShareBundle:
    """Shares ``f(alpha_k)`` of ``g + r`` for every base station ``k`` in ``points``.

    Mask blocks come from ``masks`` when given, otherwise they are drawn from
    ``rng`` (anything with ``randrange``).
    """
    config = g.config
    if len(g) != params.d or len(r) != params.d:
        raise SharingError(f"vector lengths {len(g)}, {len(r)} do not match d={params.d}")
    if len(points) < params.n_points:
        raise SharingError(f"need {params.n_points} evaluation points, got {len(points)}")
    check_points(points, config.q)
    if masks is None:
        if rng is None:
            raise SharingError("either rng or masks must be supplied")
        masks = draw_masks(params, config, rng)
    if len(masks) != params.z_bs or any(len(t) != params.block_len for t in masks):
        raise SharingError(f"expected {params.z_bs} masks of length {params.block_len}")
    blocks = pad_and_split(g + r, params.nu) + list(masks)
    return {k: evaluate_blocks(blocks, alpha % config.q, config) for k, alpha in points.items()}


def decode_blocks(
    evals: Sequence[tuple[int, FieldVector]], n_coeffs: int, config: FieldConfig
) -> list[FieldVector]:
    """Interpolate all ``n_coeffs`` coefficient blocks from vector evaluations.

    Evaluations beyond ``n_coeffs`` must agree with the interpolant.
    """
    if len(evals) < n_coeffs:
        raise SharingError(f"need {n_coeffs} evaluations, got {len(evals)}")
    q = config.q
    xs = [a % q for a, _ in evals]
    if len(set(xs)) != len(xs):
        raise InterpolationError(f"duplicate evaluation points: {xs}")
    size = len(evals[0][1])
    if any(len(v) != size for _, v in evals):
        raise SharingError("evaluations have different lengths")
    mat = interpolation_matrix(xs[:n_coeffs], q)
    ys = [v.values for _, v in evals[:n_coeffs]]
    blocks = []
    for row in mat:
        blocks.append(
            FieldVector(
                tuple(sum(w * y[c] for w, y in zip(row, ys)) % q for c in range(size)), config
            )
        )
    for a, v in evals[n_coeffs:]:
        if evaluate_blocks(blocks, a % q, config) != v:
            raise InterpolationError(f"evaluation at {a} inconsistent with interpolant")
    return blocks


def reconstruct_padded(
    evals: Sequence[tuple[int, FieldVector]], params: SharingParams
) -> FieldVector:
    """Recover ``g + r`` (or a sum of such, for summed shares) truncated to length d."""
    if not evals:
        raise SharingError("no evaluations")
    config = evals[0][1].config
    for _, v in evals:
        if v.config.q != config.q:
            raise FieldError("evaluations over different fields")
    blocks = decode_blocks(evals, params.n_points, config)
    data = FieldVector((), config)
    for block in blocks[: params.nu]:
        data = data.concat(block)
    return data[: params.d]
