"""Block counts, per-sample block sizes and row-to-block assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidSpec, SampleTooSmall


class BlockScheme(str, Enum):
    """``NEW`` uses every observation; A1-A3 use equal block sizes and drop remainders."""

    NEW = "new"
    A1 = "a1"
    A2 = "a2"
    A3 = "a3"

    @classmethod
    def parse(cls, value) -> "BlockScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidSpec(f"unknown block scheme {value!r}; expected one of new, a1, a2, a3") from None


@dataclass(frozen=True)
class BlockPartition:
    b: int
    sizes_x: np.ndarray
    sizes_y: np.ndarray
    x_indices: tuple[np.ndarray, ...]
    y_indices: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> np.ndarray:
        return self.sizes_x + self.sizes_y


_TOO_SMALL = "; use the quadratic MMD_u test (method 'mmd-u') for samples this small"


def _sizes(total: int, b: int, spread_remainder: bool) -> np.ndarray:
    base = total // b
    sizes = np.full(b, base, dtype=np.int64)
    if spread_remainder:
        r = total - b * base
        if r:
            sizes[b - r:] += 1
    return sizes


def make_partition(m: int, n: int, scheme=BlockScheme.NEW) -> tuple[int, np.ndarray, np.ndarray]:
    """Number of blocks and the X/Y block sizes for ``scheme``.

    If the nominal block count would leave a block with fewer than two rows
    from either sample, the count is lowered to the largest feasible value.
    """
    scheme = BlockScheme.parse(scheme)
    m, n = int(m), int(n)
    if m < 4 or n < 4:
        raise SampleTooSmall(f"need m >= 4 and n >= 4, got m={m}, n={n}" + _TOO_SMALL)

    if scheme is BlockScheme.NEW:
        b = math.isqrt((m + n) // 2)
    elif scheme is BlockScheme.A1:
        b1, b2 = math.isqrt(m), math.isqrt(n)
        b = min(m // b1, n // b2)
    elif scheme is BlockScheme.A2:
        b = math.isqrt(min(m, n))
    else:
        b = math.isqrt(max(m, n))

    # floor(m / b) >= 2  <=>  b <= m // 2
    b = min(b, m // 2, n // 2)
    if b < 2:
        raise SampleTooSmall(f"no feasible block count >= 2 for m={m}, n={n}" + _TOO_SMALL)

    if scheme is BlockScheme.A1:
        sizes_x = np.full(b, math.isqrt(m), dtype=np.int64)
        sizes_y = np.full(b, math.isqrt(n), dtype=np.int64)
    else:
        spread = scheme is BlockScheme.NEW
        sizes_x = _sizes(m, b, spread)
        sizes_y = _sizes(n, b, spread)
    return b, sizes_x, sizes_y


def _split(order: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, ...]:
    ends = np.cumsum(sizes)
    return tuple(order[e - s:e] for s, e in zip(sizes, ends))


def assign_blocks(
    m: int,
    n: int,
    sizes_x,
    sizes_y,
    shuffle: bool = True,
    seed: int = 0,
) -> BlockPartition:
    """Map rows of X and Y to blocks.

    With ``shuffle`` the rows of each sample are permuted first (independent
    permutations spawned from ``seed``); unused rows are the trailing ones of
    the resulting order.
    """
    sizes_x = np.asarray(sizes_x, dtype=np.int64)
    sizes_y = np.asarray(sizes_y, dtype=np.int64)
    if sizes_x.shape != sizes_y.shape or sizes_x.ndim != 1:
        raise InvalidSpec("sizes_x and sizes_y must be 1-D and of equal length")
    if sizes_x.sum() > m or sizes_y.sum() > n:
        raise InvalidSpec("block sizes exceed the sample sizes")
    if shuffle:
        rng_x, rng_y = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        order_x = rng_x.permutation(m)
        order_y = rng_y.permutation(n)
    else:
        order_x = np.arange(m)
        order_y = np.arange(n)
    return BlockPartition(
        b=int(sizes_x.size),
        sizes_x=sizes_x,
        sizes_y=sizes_y,
        x_indices=_split(order_x, sizes_x),
        y_indices=_split(order_y, sizes_y),
    )


def partition(m: int, n: int, scheme=BlockScheme.NEW, shuffle: bool = True, seed: int = 0) -> BlockPartition:
    b, sx, sy = make_partition(m, n, scheme)
    return assign_blocks(m, n, sx, sy, shuffle=shuffle, seed=seed)
