"""Sub-quadratic kernel two-sample tests built from block-averaged W/D statistics."""

from .baselines import MmdResult, mmd_block, mmd_linear, mmd_u, mmd_u_test, permutation_pvalue
from .blocking import BlockPartition, BlockScheme, assign_blocks, make_partition
from .kernel import (
    Fixed,
    KernelConfig,
    MedianHeuristic,
    gaussian_kernel_matrix,
    median_heuristic,
    pairwise_sq_distances,
)
from .moments import alpha_beta, kernel_sums, permutation_moments, wd_moments
from .teststat import BlockZ, TestResult, aggregate, block_z_scores, p_values, run_test

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "BlockScheme",
    "BlockZ",
    "Fixed",
    "KernelConfig",
    "MedianHeuristic",
    "MmdResult",
    "TestResult",
    "aggregate",
    "alpha_beta",
    "assign_blocks",
    "block_z_scores",
    "gaussian_kernel_matrix",
    "kernel_sums",
    "make_partition",
    "median_heuristic",
    "mmd_block",
    "mmd_linear",
    "mmd_u",
    "mmd_u_test",
    "pairwise_sq_distances",
    "p_values",
    "permutation_moments",
    "permutation_pvalue",
    "run_test",
    "wd_moments",
]
