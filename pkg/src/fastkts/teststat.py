"""Block Z-scores, aggregation, p-values and the end-to-end test."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .blocking import BlockPartition, BlockScheme, make_partition, assign_blocks
from .errors import ConfigError, DegenerateBlock, InvalidData, SampleTooSmall
from .kernel import KernelConfig, _sq_dists_batched, as_dataset, gaussian_kernel_from_sq, resolve_bandwidth
from .moments import BlockMoments, block_moments, kernel_sums, w_and_d

SCHEMA_VERSION = "1.0"

# blocks per work item; fixed so results do not depend on the thread count
_CHUNK = 16


@dataclass(frozen=True)
class BlockZ:
    z_w: float
    z_d: float
    block_index: int


@dataclass
class TestResult:
    stat_w: float
    stat_d: float
    p_w: float
    p_d: float
    p_combined: float
    reject: bool
    alpha_level: float
    b: int
    bandwidth_used: float
    scheme: str
    sizes_x: list[int]
    sizes_y: list[int]
    seed: int
    combine: str = "bonferroni"
    elapsed_ms: float = 0.0
    per_block: list[BlockZ] | None = field(default=None, repr=False)

    __test__ = False  # not a pytest class

    def to_dict(self, include_blocks: bool = False) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "method": "new",
            "stat_w": self.stat_w,
            "stat_d": self.stat_d,
            "p_w": self.p_w,
            "p_d": self.p_d,
            "p_combined": self.p_combined,
            "reject": self.reject,
            "alpha_level": self.alpha_level,
            "combine": self.combine,
            "b": self.b,
            "block_sizes": {"x": list(self.sizes_x), "y": list(self.sizes_y)},
            "bandwidth": self.bandwidth_used,
            "scheme": self.scheme,
            "seed": self.seed,
            "elapsed_ms": self.elapsed_ms,
        }
        if include_blocks and self.per_block is not None:
            doc["per_block"] = [asdict(z) for z in self.per_block]
        return doc


def _standardise(stat, mean, var, name, offset=0):
    var = np.asarray(var)
    bad = ~(var > 0)
    if np.any(bad):
        i = int(np.flatnonzero(np.atleast_1d(bad))[0]) + offset
        raise DegenerateBlock(f"Var({name}) is zero in block {i}; the block kernel carries no information", block_index=i)
    return (np.asarray(stat) - mean) / np.sqrt(var)


def block_z_scores(alpha, beta, moments: BlockMoments, block_index: int = 0):
    """Standardised W and D for one block (or a batch sharing ``(B1, B2)``).

    Scalar inputs give a :class:`BlockZ`; array inputs give ``(z_w, z_d)``
    arrays with block indices counted from ``block_index``.
    """
    w, d = w_and_d(alpha, beta, moments.b1, moments.b2)
    z_w = _standardise(w, moments.e_w, moments.var_w, "W", block_index)
    z_d = _standardise(d, moments.e_d, moments.var_d, "D", block_index)
    if np.ndim(z_w) == 0:
        return BlockZ(float(z_w), float(z_d), int(block_index))
    return z_w, z_d


def block_statistics(block_kernel, b1: int, b2: int, block_index: int = 0) -> BlockZ:
    """Z-scores of a single block whose first ``b1`` rows are the X points."""
    k = np.asarray(block_kernel, dtype=np.float64)
    sums = kernel_sums(k)
    alpha, beta = _alpha_beta_sorted(k, b1)
    return block_z_scores(alpha, beta, block_moments(sums, b1, b2), block_index)


def _alpha_beta_sorted(k: np.ndarray, b1: int):
    """alpha/beta when rows are ordered X first; off-diagonals only."""
    kx = k[..., :b1, :b1]
    ky = k[..., b1:, b1:]
    b2 = k.shape[-1] - b1
    tx = kx.sum(axis=(-1, -2)) - np.trace(kx, axis1=-2, axis2=-1)
    ty = ky.sum(axis=(-1, -2)) - np.trace(ky, axis1=-2, axis2=-1)
    alpha = tx / (b1 * (b1 - 1.0))
    beta = ty / (b2 * (b2 - 1.0))
    if np.ndim(alpha) == 0:
        return float(alpha), float(beta)
    return alpha, beta


def aggregate(blocks: Sequence[BlockZ]) -> tuple[float, float]:
    """``sqrt(b)`` times the mean block Z-score, for W and D."""
    b = len(blocks)
    if b < 2:
        raise SampleTooSmall(f"aggregation needs at least 2 blocks, got {b}")
    ordered = sorted(blocks, key=lambda z: z.block_index)
    sum_w = 0.0
    sum_d = 0.0
    for z in ordered:
        sum_w += z.z_w
        sum_d += z.z_d
    root = math.sqrt(b)
    return root * (sum_w / b), root * (sum_d / b)


def combine_pvalues(p_w: float, p_d: float, combine: str = "bonferroni") -> float:
    if combine == "bonferroni":
        return min(1.0, 2.0 * min(p_w, p_d))
    if combine == "simes":
        # experimental: exact level unknown since the two statistics are dependent
        lo, hi = sorted((p_w, p_d))
        return min(1.0, 2.0 * lo, hi)
    raise ConfigError(f"unknown combination rule {combine!r}")


def p_values(stat_w: float, stat_d: float, combine: str = "bonferroni") -> tuple[float, float, float]:
    """One-sided upper p-value for W, two-sided for D, and their combination."""
    p_w = float(norm.sf(stat_w))
    p_d = float(min(1.0, 2.0 * norm.sf(abs(stat_d))))
    return p_w, p_d, combine_pvalues(p_w, p_d, combine)


def _chunk_z(xb: np.ndarray, yb: np.ndarray, sigma: float, offset: int):
    """Z-scores for a stack of blocks that share ``(B1, B2)``."""
    b1 = xb.shape[1]
    b2 = yb.shape[1]
    z = np.concatenate([xb, yb], axis=1)
    k = gaussian_kernel_from_sq(_sq_dists_batched(z), sigma)
    big = b1 + b2
    idx = np.arange(big)
    k[:, idx, idx] = 0.0
    # Z-scores are invariant to shifting the off-diagonal kernel values, and
    # centring them on the block mean removes cancellation in the variances.
    mu = k.sum(axis=(1, 2)) / (big * (big - 1.0))
    k -= mu[:, None, None]
    k[:, idx, idx] = 0.0
    sums = kernel_sums(k, check=False)
    alpha, beta = _alpha_beta_sorted(k, b1)
    return block_z_scores(np.atleast_1d(alpha), np.atleast_1d(beta), block_moments(sums, b1, b2), offset)


def block_zscores_for_partition(
    x: np.ndarray, y: np.ndarray, part: BlockPartition, sigma: float, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Per-block ``(z_w, z_d)`` arrays in block order."""
    b = part.b
    z_w = np.empty(b)
    z_d = np.empty(b)
    jobs = []
    shapes = np.stack([part.sizes_x, part.sizes_y], axis=1)
    for shape in np.unique(shapes, axis=0):
        members = np.flatnonzero((shapes == shape).all(axis=1))
        for start in range(0, members.size, _CHUNK):
            jobs.append(members[start:start + _CHUNK])

    def run(members):
        xb = x[np.stack([part.x_indices[i] for i in members])]
        yb = y[np.stack([part.y_indices[i] for i in members])]
        try:
            return members, _chunk_z(xb, yb, sigma, 0)
        except DegenerateBlock as exc:
            i = int(members[exc.block_index])
            raise DegenerateBlock(f"zero permutation variance in block {i}; the block kernel is constant", block_index=i) from None

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for members, (zw, zd) in results:
        z_w[members] = zw
        z_d[members] = zd
    return z_w, z_d


def run_test(
    x,
    y,
    kernel: KernelConfig | None = None,
    scheme=BlockScheme.NEW,
    assign: str = "shuffle",
    alpha_level: float = 0.05,
    seed: int = 0,
    threads: int = 1,
    combine: str = "bonferroni",
    keep_blocks: bool = False,
) -> TestResult:
    """Block-averaged kernel two-sample test of ``x`` against ``y``.

    Parameters
    ----------
    x, y : array_like
        Samples with observations in rows; same number of columns.
    kernel : KernelConfig, optional
        Gaussian kernel bandwidth rule; median heuristic by default.
    scheme : BlockScheme or str
        Block layout: ``new`` (default), ``a1``, ``a2`` or ``a3``.
    assign : {"shuffle", "seq"}
        Whether rows are shuffled before being cut into blocks.
    alpha_level : float
        Significance level for the reject decision.
    seed : int
        Drives the row shuffle and, unless the kernel config has its own
        seed, the median-heuristic subsample.
    threads : int
        Worker threads for the per-block work; results are identical for any
        value.
    combine : {"bonferroni", "simes"}
        How p_W and p_D are combined.
    """
    start = time.perf_counter()
    if not 0.0 < alpha_level < 1.0:
        raise ConfigError(f"alpha_level must lie in (0, 1), got {alpha_level}")
    if assign not in ("shuffle", "seq"):
        raise ConfigError(f"assign must be 'shuffle' or 'seq', got {assign!r}")
    x = as_dataset(x, "x")
    y = as_dataset(y, "y")
    if x.shape[1] != y.shape[1]:
        raise InvalidData(f"dimension mismatch: x has {x.shape[1]} columns, y has {y.shape[1]}")
    scheme = BlockScheme.parse(scheme)
    m, n = x.shape[0], y.shape[0]

    b, sizes_x, sizes_y = make_partition(m, n, scheme)
    sigma = resolve_bandwidth(kernel, np.vstack([x, y]), seed)
    part = assign_blocks(m, n, sizes_x, sizes_y, shuffle=(assign == "shuffle"), seed=seed)
    z_w, z_d = block_zscores_for_partition(x, y, part, sigma, threads)
    blocks = [BlockZ(float(a), float(c), i) for i, (a, c) in enumerate(zip(z_w, z_d))]
    stat_w, stat_d = aggregate(blocks)
    p_w, p_d, p_comb = p_values(stat_w, stat_d, combine)
    return TestResult(
        stat_w=stat_w,
        stat_d=stat_d,
        p_w=p_w,
        p_d=p_d,
        p_combined=p_comb,
        reject=p_comb < alpha_level,
        alpha_level=alpha_level,
        b=b,
        bandwidth_used=sigma,
        scheme=scheme.value,
        sizes_x=[int(s) for s in sizes_x],
        sizes_y=[int(s) for s in sizes_y],
        seed=int(seed),
        combine=combine,
        elapsed_ms=(time.perf_counter() - start) * 1e3,
        per_block=blocks if keep_blocks else None,
    )
