"""Exact permutation-null moments of the within-sample kernel averages.

For one block with ``B = B1 + B2`` pooled points and kernel matrix ``k``,
``alpha`` (``beta``) is the mean off-diagonal kernel value among the B1 (B2)
points labelled X (Y). Under uniform relabelling the first two moments of
``alpha``, ``beta`` and of the derived statistics

    W = (B1/B) alpha + (B2/B) beta
    D = B1 (B1 - 1) alpha - B2 (B2 - 1) beta

have closed forms in four kernel sums R0..R3, which are computed in O(B^2).

All functions accept scalars or arrays that broadcast over a leading batch
of blocks with the same ``(B1, B2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BlockTooSmall, InvalidData, NumericalError

# relative slack below zero tolerated for a variance before it is an error
_NEG_VAR_RTOL = 1e-8
# relative size under which a variance counts as zero
_ZERO_VAR_RTOL = 1e-12
# relative error allowed in R2/R3 before falling back to exact sums
_SUM_RTOL = 1e-12
_EPS = np.finfo(np.float64).eps / 2


@dataclass(frozen=True)
class KernelSums:
    r0: np.ndarray | float
    r1: np.ndarray | float
    r2: np.ndarray | float
    r3: np.ndarray | float
    size: int


@dataclass(frozen=True)
class BlockMoments:
    e_alpha: np.ndarray | float
    var_alpha: np.ndarray | float
    var_beta: np.ndarray | float
    cov_ab: np.ndarray | float
    e_w: np.ndarray | float
    var_w: np.ndarray | float
    e_d: np.ndarray | float
    var_d: np.ndarray | float
    b1: int
    b2: int


def _offdiag(k: np.ndarray) -> np.ndarray:
    k = np.array(k, dtype=np.float64, copy=True)
    idx = np.arange(k.shape[-1])
    k[..., idx, idx] = 0.0
    return k


def _check_square(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim < 2 or k.shape[-1] != k.shape[-2]:
        raise InvalidData(f"kernel matrix must be square, got shape {k.shape}")
    return k


def _exact_sums(k: np.ndarray) -> tuple[float, float, float, float]:
    """R0..R3 of one off-diagonal kernel matrix, exact up to the final rounding.

    Entries are written as integers times a common power of two, so every
    sum and product is carried out in exact integer arithmetic.
    """
    mant, expo = np.frexp(k)
    mant = (mant * 2.0**53).astype(np.int64)
    nz = mant != 0
    if not nz.any():
        return 0.0, 0.0, 0.0, 0.0
    base = int(expo[nz].min()) - 53
    shift = np.where(nz, expo - 53 - base, 0)
    rows = [[int(a) << int(b) for a, b in zip(mr, sr)] for mr, sr in zip(mant.tolist(), shift.tolist())]
    d = [sum(row) for row in rows]
    r0 = sum(d)
    r1 = sum(v * v for row in rows for v in row)
    r2 = sum(du * du for du in d) - r1
    r3 = r0 * r0 - 2 * r1 - 4 * r2

    def scaled(value, power):
        return float(Fraction(value) * Fraction(2) ** power)

    return scaled(r0, base), scaled(r1, 2 * base), scaled(r2, 2 * base), scaled(r3, 2 * base)


def kernel_sums(block_kernel, check: bool = True) -> KernelSums:
    """R0..R3 of a block kernel matrix (or a stack of them).

    ``R0 = sum_{u!=v} k_uv`` and ``R1 = sum_{u!=v} k_uv^2``. The triple and
    quadruple sums over distinct indices follow from the row sums
    ``d_u = sum_{v!=u} k_uv``::

        R2 = sum_u d_u^2 - R1
        R3 = R0^2 - 2 R1 - 4 R2

    Both differences can cancel badly (e.g. a narrow Gaussian kernel where
    one pair dominates). A first-order rounding-error bound is computed
    alongside, and any matrix whose R2 or R3 may be off by more than
    ``1e-12`` relative is recomputed exactly.
    """
    k = _check_square(block_kernel)
    size = k.shape[-1]
    if size < 4:
        raise BlockTooSmall(f"block needs at least 4 points, got {size}")
    if check and not np.allclose(k, np.swapaxes(k, -1, -2), rtol=1e-12, atol=1e-12):
        raise InvalidData("kernel matrix is not symmetric")
    k = _offdiag(k)
    d = k.sum(axis=-1)
    r0 = d.sum(axis=-1)
    r1 = np.einsum("...uv,...uv->...", k, k)
    sq = np.einsum("...u,...u->...", d, d)
    r2 = sq - r1
    r3 = r0 * r0 - 2.0 * r1 - 4.0 * r2

    # first-order error bounds for the float path
    u = _EPS * (2.0 * math.log2(size) + 4.0)
    row_abs = np.abs(k).sum(axis=-1)
    err_sq = u * (sq + 2.0 * np.einsum("...u,...u->...", np.abs(d), row_abs))
    err_r1 = u * r1
    err_r2 = err_sq + err_r1 + _EPS * np.abs(r2)
    err_r0 = u * row_abs.sum(axis=-1)
    err_r3 = (2.0 * np.abs(r0) * err_r0 + _EPS * r0 * r0 + 2.0 * err_r1 + 4.0 * err_r2
              + _EPS * (r0 * r0 + 2.0 * r1 + 4.0 * np.abs(r2)))
    shaky = (err_r2 > _SUM_RTOL * np.abs(r2)) | (err_r3 > _SUM_RTOL * np.abs(r3))
    if np.any(shaky):
        if np.ndim(r0) == 0:
            r0, r1, r2, r3 = _exact_sums(k)
        else:
            r0, r1, r2, r3 = (np.array(a, dtype=np.float64) for a in (r0, r1, r2, r3))
            for idx in zip(*np.nonzero(shaky)):
                r0[idx], r1[idx], r2[idx], r3[idx] = _exact_sums(k[idx])
    if np.ndim(r0) == 0:
        r0, r1, r2, r3 = float(r0), float(r1), float(r2), float(r3)
    return KernelSums(r0, r1, r2, r3, size)


def _falling(x: int, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= x - j
    return out


def _check_sizes(b1: int, b2: int) -> None:
    if b1 < 2 or b2 < 2:
        raise BlockTooSmall(f"each sample needs at least 2 points per block, got B1={b1}, B2={b2}")


def _first_index(mask) -> int | None:
    flat = np.flatnonzero(np.atleast_1d(mask))
    return int(flat[0]) if flat.size else None


def _clamp_variance(raw, second_moment, constant, name):
    raw = np.asarray(raw, dtype=np.float64)
    scale = np.abs(np.asarray(second_moment)) + _ZERO_VAR_RTOL
    bad = (raw < -_NEG_VAR_RTOL * scale) & ~constant
    if np.any(bad):
        i = _first_index(bad)
        raise NumericalError(f"{name} is negative beyond roundoff for a non-constant kernel (block {i})")
    return np.where(constant, 0.0, np.maximum(raw, 0.0))


def permutation_moments(sums: KernelSums, b1: int, b2: int):
    """``(E alpha, Var alpha, Var beta, Cov(alpha, beta))`` under the permutation null.

    ``E beta`` equals ``E alpha``. Roundoff-negative variances are clamped
    to zero, and a constant kernel gets exactly zero variances (the
    standardisation step then rejects the block).
    """
    b1, b2 = int(b1), int(b2)
    _check_sizes(b1, b2)
    big = b1 + b2
    if sums.size != big:
        raise InvalidData(f"block has {sums.size} points but B1 + B2 = {big}")
    r0, r1, r2, r3 = sums.r0, sums.r1, sums.r2, sums.r3

    pairs = _falling(big, 2)
    e_alpha = np.asarray(r0) / pairs
    p1 = _falling(b1, 2) / pairs
    p2 = _falling(b1, 3) / _falling(big, 3)
    p3 = _falling(b1, 4) / _falling(big, 4)
    q1 = _falling(b2, 2) / pairs
    q2 = _falling(b2, 3) / _falling(big, 3)
    q3 = _falling(b2, 4) / _falling(big, 4)

    ea2 = (2.0 * r1 * p1 + 4.0 * r2 * p2 + r3 * p3) / _falling(b1, 2) ** 2
    eb2 = (2.0 * r1 * q1 + 4.0 * r2 * q2 + r3 * q3) / _falling(b2, 2) ** 2
    e2 = e_alpha * e_alpha
    cov = np.asarray(r3) / _falling(big, 4) - e2

    # Cauchy-Schwarz: R0^2 <= B(B-1) R1 with equality iff the kernel is constant
    constant = np.asarray(pairs * r1 - r0 * r0) <= _ZERO_VAR_RTOL * np.abs(pairs * r1) + 1e-300
    var_alpha = _clamp_variance(ea2 - e2, ea2, constant, "Var(alpha)")
    var_beta = _clamp_variance(eb2 - e2, eb2, constant, "Var(beta)")
    cov = np.where(constant, 0.0, cov)
    return _maybe_scalar(e_alpha), _maybe_scalar(var_alpha), _maybe_scalar(var_beta), _maybe_scalar(cov)


def _maybe_scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def wd_moments(moments, b1: int, b2: int):
    """``(E W, Var W, E D, Var D)`` by linearity from the alpha/beta moments."""
    e_alpha, var_alpha, var_beta, cov = moments
    b1, b2 = int(b1), int(b2)
    _check_sizes(b1, b2)
    big = b1 + b2
    a, c = b1 / big, b2 / big
    p, q = b1 * (b1 - 1.0), b2 * (b2 - 1.0)
    e_w = np.asarray(e_alpha)
    var_w = a * a * var_alpha + c * c * var_beta + 2.0 * a * c * cov
    e_d = (p - q) * e_alpha
    var_d = p * p * var_alpha + q * q * var_beta - 2.0 * p * q * cov
    var_w = np.maximum(var_w, 0.0)
    var_d = np.maximum(var_d, 0.0)
    return _maybe_scalar(e_w), _maybe_scalar(var_w), _maybe_scalar(e_d), _maybe_scalar(var_d)


def block_moments(sums: KernelSums, b1: int, b2: int) -> BlockMoments:
    ab = permutation_moments(sums, b1, b2)
    e_w, var_w, e_d, var_d = wd_moments(ab, b1, b2)
    return BlockMoments(*ab, e_w, var_w, e_d, var_d, int(b1), int(b2))


def alpha_beta(block_kernel, labels):
    """Within-X and within-Y mean off-diagonal kernel values.

    ``labels[u]`` is 0 for an X point and 1 for a Y point.
    """
    k = _check_square(block_kernel)
    g = np.asarray(labels)
    if g.shape[-1] != k.shape[-1]:
        raise InvalidData(f"{g.shape[-1]} labels for a block of {k.shape[-1]} points")
    if not np.isin(g, (0, 1)).all():
        raise InvalidData("labels must be 0 (X) or 1 (Y)")
    y_mask = (g == 1).astype(np.float64)
    x_mask = 1.0 - y_mask
    n_y = y_mask.sum(axis=-1)
    n_x = x_mask.sum(axis=-1)
    if np.any(n_x < 2) or np.any(n_y < 2):
        raise BlockTooSmall("each group needs at least 2 points")
    k = _offdiag(k)
    alpha = np.einsum("...u,...uv,...v->...", x_mask, k, x_mask) / (n_x * (n_x - 1))
    beta = np.einsum("...u,...uv,...v->...", y_mask, k, y_mask) / (n_y * (n_y - 1))
    return _maybe_scalar(alpha), _maybe_scalar(beta)


def w_and_d(alpha, beta, b1: int, b2: int):
    big = b1 + b2
    w = (b1 / big) * np.asarray(alpha) + (b2 / big) * np.asarray(beta)
    d = b1 * (b1 - 1.0) * np.asarray(alpha) - b2 * (b2 - 1.0) * np.asarray(beta)
    return _maybe_scalar(w), _maybe_scalar(d)
