"""Squared distances, Gaussian kernel matrices and the median heuristic.

The kernel is ``k(x, y) = exp(-||x - y||^2 / (2 sigma^2))``. By default
``sigma = median / sqrt(2)`` where ``median`` is the median pairwise
Euclidean distance of the pooled sample, i.e. the effective kernel is
``exp(-||x - y||^2 / median^2)``. For N(0, I_d) data this puts sigma near
``sqrt(d)``. Set ``MedianHeuristic(scale=1.0)`` for ``sigma = median``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import (
    DegenerateBandwidth,
    InsufficientData,
    InvalidBandwidth,
    InvalidData,
)

DEFAULT_SUBSAMPLE = 1000
DEFAULT_MEDIAN_SCALE = 1.0 / math.sqrt(2.0)


def _check_sigma(sigma) -> float:
    try:
        sigma = float(sigma)
    except (TypeError, ValueError):
        raise InvalidBandwidth(f"bandwidth must be a real number, got {sigma!r}") from None
    if not math.isfinite(sigma) or sigma <= 0:
        raise InvalidBandwidth(f"bandwidth must be positive and finite, got {sigma}")
    return sigma


@dataclass(frozen=True)
class MedianHeuristic:
    """Bandwidth = ``scale`` x median pairwise distance of at most ``subsample_size`` rows.

    ``seed=None`` defers to the seed of the calling test.
    """

    subsample_size: int = DEFAULT_SUBSAMPLE
    seed: int | None = None
    scale: float = DEFAULT_MEDIAN_SCALE

    def __post_init__(self):
        if self.subsample_size < 2:
            raise InvalidBandwidth(f"subsample_size must be >= 2, got {self.subsample_size}")
        _check_sigma(self.scale)


@dataclass(frozen=True)
class Fixed:
    sigma: float

    def __post_init__(self):
        _check_sigma(self.sigma)


@dataclass(frozen=True)
class KernelConfig:
    bandwidth: Union[MedianHeuristic, Fixed] = MedianHeuristic()
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise InvalidBandwidth(f"unsupported kernel family {self.family!r}")

    @classmethod
    def fixed(cls, sigma: float) -> "KernelConfig":
        return cls(bandwidth=Fixed(float(sigma)))

    @classmethod
    def median(
        cls, subsample_size: int = DEFAULT_SUBSAMPLE, seed: int | None = None, scale: float = DEFAULT_MEDIAN_SCALE
    ) -> "KernelConfig":
        return cls(bandwidth=MedianHeuristic(subsample_size, seed, scale))


def as_dataset(points, name: str = "data") -> np.ndarray:
    """Coerce to a finite 2-D float64 array (1-D input is one column)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidData(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidData(f"{name} is empty (shape {arr.shape})")
    if not np.isfinite(arr).all():
        row, col = np.argwhere(~np.isfinite(arr))[0]
        raise InvalidData(f"{name} has a non-finite entry at row {row}, column {col}")
    return arr


def _sq_dists_batched(z: np.ndarray) -> np.ndarray:
    """Squared distances within each stacked point set, shape (..., B, B).

    Rows are centred per set first so the Gram expansion does not lose
    precision to a large common offset.
    """
    z = z - z.mean(axis=-2, keepdims=True)
    sq = np.einsum("...ij,...ij->...i", z, z)
    gram = z @ np.swapaxes(z, -1, -2)
    d2 = sq[..., :, None] + sq[..., None, :] - 2.0 * gram
    d2 = 0.5 * (d2 + np.swapaxes(d2, -1, -2))
    np.maximum(d2, 0.0, out=d2)
    idx = np.arange(z.shape[-2])
    d2[..., idx, idx] = 0.0
    return d2


def pairwise_sq_distances(points) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances between rows."""
    return _sq_dists_batched(as_dataset(points, "points"))


def gaussian_kernel_from_sq(d2: np.ndarray, sigma: float) -> np.ndarray:
    sigma = _check_sigma(sigma)
    return np.exp(d2 * (-0.5 / (sigma * sigma)))


def gaussian_kernel_matrix(points, sigma: float) -> np.ndarray:
    """``exp(-||z_u - z_v||^2 / (2 sigma^2))`` for every pair of rows."""
    sigma = _check_sigma(sigma)
    return gaussian_kernel_from_sq(pairwise_sq_distances(points), sigma)


@lru_cache(maxsize=8)
def _upper_flat(n: int) -> np.ndarray:
    rows, cols = np.triu_indices(n, k=1)
    return rows * n + cols


def median_heuristic(pooled, subsample_size: int = DEFAULT_SUBSAMPLE, seed: int = 0) -> float:
    """Median pairwise Euclidean distance.

    Uses all rows when there are at most ``subsample_size`` of them, otherwise
    a uniform subsample drawn without replacement with ``seed``. For an even
    number of pairs the lower of the two central values is returned.
    """
    pooled = as_dataset(pooled, "pooled")
    n = pooled.shape[0]
    if n < 2:
        raise InsufficientData(f"median heuristic needs at least 2 rows, got {n}")
    if subsample_size < 2:
        raise InvalidBandwidth(f"subsample_size must be >= 2, got {subsample_size}")
    if n > subsample_size:
        rows = np.random.default_rng(seed).choice(n, size=subsample_size, replace=False)
        pooled = pooled[np.sort(rows)]
        n = subsample_size
    z = pooled - pooled.mean(axis=0)
    sq = np.einsum("ij,ij->i", z, z)
    d2 = sq[:, None] + sq[None, :]
    d2 -= 2.0 * (z @ z.T)
    vals = d2.ravel()[_upper_flat(n)]
    k = (vals.size - 1) // 2
    med2 = max(float(np.partition(vals, k)[k]), 0.0)
    if not med2 > 0:
        raise DegenerateBandwidth("median pairwise distance is zero; rows are (mostly) identical")
    return float(math.sqrt(med2))


def resolve_bandwidth(config: KernelConfig | None, pooled, seed: int = 0) -> float:
    """Turn a kernel config into a concrete sigma for ``pooled`` data."""
    config = config or KernelConfig()
    bw = config.bandwidth
    if isinstance(bw, Fixed):
        return _check_sigma(bw.sigma)
    med = median_heuristic(pooled, bw.subsample_size, seed if bw.seed is None else bw.seed)
    return bw.scale * med
