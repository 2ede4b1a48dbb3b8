"""MMD-family reference tests: quadratic MMD_u, linear-time MMD and the B-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm

from .errors import DegenerateStatistic, SampleTooSmall, UnbalancedNotSupported, InvalidData, ConfigError
from .kernel import (
    KernelConfig,
    _sq_dists_batched,
    as_dataset,
    gaussian_kernel_from_sq,
    resolve_bandwidth,
)


@dataclass
class MmdResult:
    statistic: float
    p_value: float | None
    method: str  # "mmd-u" | "mmd-linear" | "mmd-b"
    null_calibration: dict = field(default_factory=dict)
    bandwidth: float | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "null_calibration": dict(self.null_calibration),
            "bandwidth": self.bandwidth,
        }


def _pair(x, y):
    x = as_dataset(x, "x")
    y = as_dataset(y, "y")
    if x.shape[1] != y.shape[1]:
        raise InvalidData(f"dimension mismatch: x has {x.shape[1]} columns, y has {y.shape[1]}")
    return x, y


def mmd_u_from_kernel(k_xx: np.ndarray, k_yy: np.ndarray, k_xy: np.ndarray) -> float:
    m = k_xx.shape[0]
    n = k_yy.shape[0]
    a = (k_xx.sum() - np.trace(k_xx)) / (m * (m - 1))
    b = (k_yy.sum() - np.trace(k_yy)) / (n * (n - 1))
    g = k_xy.sum() / (m * n)
    return float(a + b - 2.0 * g)


def mmd_u(x, y, kernel: KernelConfig | None = None, seed: int = 0, sigma: float | None = None) -> float:
    """Unbiased squared MMD: within-X mean + within-Y mean - 2 * between mean.

    Quadratic in ``m + n``.
    """
    x, y = _pair(x, y)
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise SampleTooSmall("mmd_u needs at least 2 rows per sample")
    if sigma is None:
        sigma = resolve_bandwidth(kernel, np.vstack([x, y]), seed)
    k = gaussian_kernel_from_sq(_sq_dists_batched(np.vstack([x, y])), sigma)
    m = x.shape[0]
    return mmd_u_from_kernel(k[:m, :m], k[m:, m:], k[:m, m:])


def _gaussian_rows(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    diff = a - b
    return np.exp(-np.einsum("ij,ij->i", diff, diff) / (2.0 * sigma * sigma))


def _z_pvalue(values: np.ndarray) -> tuple[float, float]:
    """Studentised mean ``sqrt(n) mean / sd`` and its upper-tail normal p-value.

    All-zero values (a constant kernel) give a statistic of exactly 0; any
    other zero-spread input has no normal calibration.
    """
    n = values.size
    if not np.any(values):
        return 0.0, float(norm.sf(0.0))
    sd = float(np.std(values, ddof=1))
    if not sd > 1e-15 * max(1.0, float(np.max(np.abs(values)))):
        raise DegenerateStatistic("per-pair/per-block values have zero spread; normal calibration undefined")
    stat = math.sqrt(n) * float(np.mean(values)) / sd
    return stat, float(norm.sf(stat))


def mmd_linear(
    x,
    y,
    kernel: KernelConfig | None = None,
    seed: int = 0,
    shuffle: bool = False,
    sigma: float | None = None,
) -> MmdResult:
    """Linear-time MMD over consecutive disjoint pairs.

    ``h_i = k(x_{2i-1}, x_{2i}) + k(y_{2i-1}, y_{2i}) - k(x_{2i-1}, y_{2i}) - k(x_{2i}, y_{2i-1})``;
    the statistic is ``sqrt(#pairs) * mean(h) / sd(h)`` with a one-sided
    normal p-value.
    """
    x, y = _pair(x, y)
    m, n = x.shape[0], y.shape[0]
    if m != n:
        raise UnbalancedNotSupported(f"linear MMD needs m == n, got m={m}, n={n}")
    if m < 4:
        raise SampleTooSmall("linear MMD needs at least 4 rows per sample")
    if sigma is None:
        sigma = resolve_bandwidth(kernel, np.vstack([x, y]), seed)
    if shuffle:
        rng = np.random.default_rng(seed)
        x = x[rng.permutation(m)]
        y = y[rng.permutation(n)]
    half = m // 2
    x1, x2 = x[0:2 * half:2], x[1:2 * half:2]
    y1, y2 = y[0:2 * half:2], y[1:2 * half:2]
    h = (
        _gaussian_rows(x1, x2, sigma)
        + _gaussian_rows(y1, y2, sigma)
        - _gaussian_rows(x1, y2, sigma)
        - _gaussian_rows(x2, y1, sigma)
    )
    stat, p = _z_pvalue(h)
    return MmdResult(stat, p, "mmd-linear", {"kind": "gaussian-clt", "n_pairs": int(half)}, sigma)


def mmd_block(
    x,
    y,
    kernel: KernelConfig | None = None,
    block_size: int | None = None,
    seed: int = 0,
    sigma: float | None = None,
) -> MmdResult:
    """B-test: MMD_u on consecutive blocks, studentised across blocks.

    The default block size is ``floor(sqrt(m))``. Leftover rows are unused.
    """
    x, y = _pair(x, y)
    m, n = x.shape[0], y.shape[0]
    if m != n:
        raise UnbalancedNotSupported(f"block MMD needs m == n, got m={m}, n={n}")
    if block_size is None:
        block_size = math.isqrt(m)
    if block_size < 2:
        raise ConfigError(f"block_size must be >= 2, got {block_size}")
    n_blocks = m // block_size
    if n_blocks < 2:
        raise SampleTooSmall(f"block MMD needs at least 2 blocks, got {n_blocks}")
    if sigma is None:
        sigma = resolve_bandwidth(kernel, np.vstack([x, y]), seed)
    used = n_blocks * block_size
    xb = x[:used].reshape(n_blocks, block_size, -1)
    yb = y[:used].reshape(n_blocks, block_size, -1)
    k = gaussian_kernel_from_sq(_sq_dists_batched(np.concatenate([xb, yb], axis=1)), sigma)
    s = block_size
    kxx, kyy, kxy = k[:, :s, :s], k[:, s:, s:], k[:, :s, s:]
    diag = s * 1.0  # Gaussian kernel has unit diagonal
    within = (kxx.sum(axis=(1, 2)) - diag) / (s * (s - 1)) + (kyy.sum(axis=(1, 2)) - diag) / (s * (s - 1))
    values = within - 2.0 * kxy.sum(axis=(1, 2)) / (s * s)
    stat, p = _z_pvalue(values)
    return MmdResult(
        stat, p, "mmd-b", {"kind": "gaussian-clt", "n_blocks": int(n_blocks), "block_size": int(block_size)}, sigma
    )


def permutation_pvalue(
    x,
    y,
    statistic_fn: Callable[[np.ndarray, np.ndarray], float],
    n_perms: int = 199,
    seed: int = 0,
) -> float:
    """Monte-Carlo permutation p-value ``(1 + #{T_perm >= T_obs}) / (1 + n_perms)``."""
    if n_perms < 99:
        raise ConfigError(f"n_perms must be >= 99, got {n_perms}")
    x, y = _pair(x, y)
    m = x.shape[0]
    pooled = np.vstack([x, y])
    observed = statistic_fn(x, y)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perms):
        perm = rng.permutation(pooled.shape[0])
        if statistic_fn(pooled[perm[:m]], pooled[perm[m:]]) >= observed:
            hits += 1
    return (1 + hits) / (1 + n_perms)


def mmd_u_test(
    x,
    y,
    kernel: KernelConfig | None = None,
    n_perms: int = 199,
    seed: int = 0,
) -> MmdResult:
    """Quadratic MMD_u with a permutation p-value.

    The kernel matrix is computed once and relabelled per permutation.
    """
    x, y = _pair(x, y)
    m, n = x.shape[0], y.shape[0]
    if m < 2 or n < 2:
        raise SampleTooSmall("mmd_u needs at least 2 rows per sample")
    if n_perms < 99:
        raise ConfigError(f"n_perms must be >= 99, got {n_perms}")
    pooled = np.vstack([x, y])
    sigma = resolve_bandwidth(kernel, pooled, seed)
    k = gaussian_kernel_from_sq(_sq_dists_batched(pooled), sigma)

    def stat(idx):
        ix, iy = idx[:m], idx[m:]
        return mmd_u_from_kernel(k[np.ix_(ix, ix)], k[np.ix_(iy, iy)], k[np.ix_(ix, iy)])

    observed = stat(np.arange(m + n))
    rng = np.random.default_rng(seed)
    hits = sum(stat(rng.permutation(m + n)) >= observed for _ in range(n_perms))
    p = (1 + hits) / (1 + n_perms)
    return MmdResult(observed, p, "mmd-u", {"kind": "permutation", "n_perms": int(n_perms), "seed": int(seed)}, sigma)
