"""Synthetic settings and seeded Monte-Carlo experiments.

Seeding
-------
Replication ``r`` of an experiment with master seed ``s`` draws its data from
``SeedSequence(s, spawn_key=(r, 0))`` and passes the first 63 bits of
``SeedSequence(s, spawn_key=(r, 1))`` to the test as its seed. Replications
are therefore independent of execution order and of how they are split
across workers. Normals come from numpy's PCG64 generator
(``Generator.standard_normal``, ziggurat method).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import binom, kstest

from .baselines import mmd_block, mmd_linear, mmd_u_test
from .blocking import BlockScheme
from .errors import FastKTSError, InvalidSpec, NumericalError, ConfigError
from .kernel import DEFAULT_MEDIAN_SCALE, DEFAULT_SUBSAMPLE, KernelConfig, median_heuristic
from .teststat import SCHEMA_VERSION, run_test

FAMILIES = ("gmd", "gvd", "null", "lognormal")
METHODS = ("new", "new-a1", "new-a2", "new-a3", "mmd-u", "mmd-linear", "mmd-b")


@dataclass(frozen=True)
class SyntheticSpec:
    """One synthetic two-sample setting.

    ``param`` is the GMD shift, the GVD variance of coordinate 1, or the
    log-normal mean offset ``a``; it is ignored for ``null``.
    """

    family: str
    d: int
    m: int
    n: int
    param: float = 0.0
    rho: float = 0.4

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.d < 1 or self.m < 1 or self.n < 1:
            raise InvalidSpec("d, m and n must be positive")
        if self.family == "gvd" and not self.param > 0:
            raise InvalidSpec("GVD variance must be positive")
        if self.family == "lognormal" and not 0.0 < self.rho < 1.0:
            raise InvalidSpec("log-normal rho must lie in (0, 1)")

    @classmethod
    def gmd(cls, d, m, n, shift=0.8):
        return cls("gmd", d, m, n, shift)

    @classmethod
    def gvd(cls, d, m, n, scale=2.0):
        return cls("gvd", d, m, n, scale)

    @classmethod
    def null(cls, d, m, n):
        return cls("null", d, m, n)

    @classmethod
    def lognormal(cls, d, m, n, a=0.0, rho=0.4):
        return cls("lognormal", d, m, n, a, rho)

    def with_sizes(self, m: int, n: int) -> "SyntheticSpec":
        return SyntheticSpec(self.family, self.d, m, n, self.param, self.rho)


def gen_gaussian(spec: SyntheticSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """X ~ N(0, I); Y per family (shifted, rescaled or identical first coordinate)."""
    if spec.family not in ("gmd", "gvd", "null"):
        raise InvalidSpec(f"gen_gaussian does not handle family {spec.family!r}")
    rng = np.random.default_rng(rng)
    x = rng.standard_normal((spec.m, spec.d))
    y = rng.standard_normal((spec.n, spec.d))
    if spec.family == "gmd":
        y[:, 0] += spec.param
    elif spec.family == "gvd":
        y[:, 0] *= math.sqrt(spec.param)
    return x, y


@lru_cache(maxsize=16)
def _ar1_cholesky(d: int, rho: float) -> np.ndarray:
    lags = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
    cov = rho ** lags
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of the AR(1) covariance failed (d={d}, rho={rho})") from exc


def gen_lognormal_normals(spec: SyntheticSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """Underlying normals before exponentiation."""
    if spec.family != "lognormal":
        raise InvalidSpec(f"gen_lognormal needs the lognormal family, got {spec.family!r}")
    rng = np.random.default_rng(rng)
    chol_t = _ar1_cholesky(spec.d, float(spec.rho)).T
    x = rng.standard_normal((spec.m, spec.d)) @ chol_t
    y = rng.standard_normal((spec.n, spec.d)) @ chol_t + spec.param
    return x, y


def gen_lognormal(spec: SyntheticSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    """exp(N(0, S)) against exp(N(a 1, S)) with ``S_ij = rho^|i-j|``."""
    x, y = gen_lognormal_normals(spec, rng)
    return np.exp(x), np.exp(y)


def generate(spec: SyntheticSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    if spec.family == "lognormal":
        return gen_lognormal(spec, rng)
    return gen_gaussian(spec, rng)


def rep_seeds(master_seed: int, rep: int) -> tuple[np.random.SeedSequence, int]:
    """Data seed sequence and integer test seed for one replication."""
    data = np.random.SeedSequence(master_seed, spawn_key=(rep, 0))
    test = np.random.SeedSequence(master_seed, spawn_key=(rep, 1))
    return data, int(test.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def run_method(
    method: str,
    x,
    y,
    kernel: KernelConfig | None,
    alpha_level: float,
    seed: int,
    assign: str = "shuffle",
    n_perms: int = 199,
    combine: str = "bonferroni",
) -> tuple[bool, float]:
    """Run one named method; return (reject, p-value)."""
    if method == "new" or method.startswith("new-"):
        scheme = BlockScheme.NEW if method == "new" else BlockScheme.parse(method[4:])
        res = run_test(x, y, kernel, scheme, assign, alpha_level, seed, combine=combine)
        return res.reject, res.p_combined
    if method == "mmd-linear":
        res = mmd_linear(x, y, kernel, seed=seed)
    elif method == "mmd-b":
        res = mmd_block(x, y, kernel, seed=seed)
    elif method == "mmd-u":
        res = mmd_u_test(x, y, kernel, n_perms=n_perms, seed=seed)
    else:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    return res.p_value < alpha_level, res.p_value


@dataclass
class MethodSummary:
    rejection_rate: float
    std_error: float
    mean_elapsed_ms: float
    rejections: list[bool] = field(repr=False)
    p_values: list[float] = field(repr=False)


@dataclass
class ExperimentReport:
    spec: SyntheticSpec
    n_reps: int
    alpha_level: float
    master_seed: int
    methods: list[str]
    per_method: dict[str, MethodSummary]
    bandwidth: str = "median"

    @property
    def rejection_rate(self) -> float:
        return self.per_method[self.methods[0]].rejection_rate

    @property
    def std_error(self) -> float:
        return self.per_method[self.methods[0]].std_error

    @property
    def mean_elapsed_ms(self) -> float:
        return self.per_method[self.methods[0]].mean_elapsed_ms

    def to_dict(self, include_reps: bool = False) -> dict:
        per = {}
        for name, s in self.per_method.items():
            entry = {
                "rejection_rate": s.rejection_rate,
                "std_error": s.std_error,
                "mean_elapsed_ms": s.mean_elapsed_ms,
            }
            if include_reps:
                entry["rejections"] = [bool(r) for r in s.rejections]
                entry["p_values"] = list(s.p_values)
            per[name] = entry
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "experiment",
            "spec": asdict(self.spec),
            "n_reps": self.n_reps,
            "alpha_level": self.alpha_level,
            "master_seed": self.master_seed,
            "bandwidth": self.bandwidth,
            "rejection_rate": self.rejection_rate,
            "std_error": self.std_error,
            "mean_elapsed_ms": self.mean_elapsed_ms,
            "per_method": per,
        }


def binomial_se(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n)


def _map_reps(fn, n_reps: int, threads: int):
    if threads > 1 and n_reps > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_reps)))
    return [fn(r) for r in range(n_reps)]


def estimate_power(
    spec: SyntheticSpec,
    method: str | Sequence[str] = "new",
    alpha_level: float = 0.05,
    n_reps: int = 100,
    master_seed: int = 0,
    kernel: KernelConfig | None = None,
    assign: str = "shuffle",
    threads: int = 1,
    n_perms: int = 199,
    combine: str = "bonferroni",
) -> ExperimentReport:
    """Rejection rate of one or more methods over ``n_reps`` seeded datasets.

    Several methods are run on the same (paired) datasets.
    """
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    methods = [method] if isinstance(method, str) else list(method)
    for name in methods:
        if name not in METHODS:
            raise ConfigError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")

    def one(rep):
        data_seed, test_seed = rep_seeds(master_seed, rep)
        x, y = generate(spec, data_seed)
        out = []
        for name in methods:
            t0 = time.perf_counter()
            try:
                reject, p = run_method(name, x, y, kernel, alpha_level, test_seed, assign, n_perms, combine)
            except FastKTSError as exc:
                raise type(exc)(f"replication {rep}, method {name}: {exc}") from exc
            out.append((reject, p, (time.perf_counter() - t0) * 1e3))
        return out

    rows = _map_reps(one, n_reps, threads)
    per = {}
    for j, name in enumerate(methods):
        rejections = [bool(r[j][0]) for r in rows]
        rate = sum(rejections) / n_reps
        per[name] = MethodSummary(
            rejection_rate=rate,
            std_error=binomial_se(rate, n_reps),
            mean_elapsed_ms=float(np.mean([r[j][2] for r in rows])),
            rejections=rejections,
            p_values=[float(r[j][1]) for r in rows],
        )
    bw = kernel.bandwidth if kernel is not None else None
    label = f"fixed:{bw.sigma}" if hasattr(bw, "sigma") else "median"
    return ExperimentReport(spec, n_reps, alpha_level, master_seed, methods, per, label)


def null_zscore_sample(
    spec: SyntheticSpec,
    n_reps: int,
    master_seed: int = 0,
    kernel: KernelConfig | None = None,
    scheme=BlockScheme.NEW,
    assign: str = "shuffle",
    threads: int = 1,
) -> np.ndarray:
    """Aggregated ``(stat_w, stat_d)`` for ``n_reps`` null datasets, shape (n_reps, 2)."""
    if spec.family not in ("null",) and not (spec.family == "lognormal" and spec.param == 0.0):
        raise InvalidSpec("null_zscore_sample needs a null setting")

    def one(rep):
        data_seed, test_seed = rep_seeds(master_seed, rep)
        x, y = generate(spec, data_seed)
        res = run_test(x, y, kernel, scheme, assign, 0.05, test_seed)
        return res.stat_w, res.stat_d

    return np.array(_map_reps(one, n_reps, threads), dtype=np.float64).reshape(n_reps, 2)


def average_median_heuristic(
    spec: SyntheticSpec,
    n_trials: int = 100,
    master_seed: int = 0,
    subsample_size: int = DEFAULT_SUBSAMPLE,
    scale: float = DEFAULT_MEDIAN_SCALE,
) -> float:
    """Median-heuristic bandwidth (``scale`` x median distance) averaged over ``n_trials`` datasets."""
    vals = []
    for rep in range(n_trials):
        data_seed, test_seed = rep_seeds(master_seed, rep)
        x, y = generate(spec, data_seed)
        vals.append(scale * median_heuristic(np.vstack([x, y]), subsample_size, test_seed))
    return float(np.mean(vals))


def bandwidth_sweep(
    spec: SyntheticSpec,
    bandwidths: Sequence[float],
    alpha_level: float = 0.05,
    n_reps: int = 100,
    master_seed: int = 0,
    assign: str = "shuffle",
    threads: int = 1,
) -> list[tuple[float, float]]:
    """Power of the block test at each fixed bandwidth, on shared datasets."""
    if len(bandwidths) == 0:
        raise ConfigError("bandwidth list is empty")
    out = []
    for sigma in bandwidths:
        rep = estimate_power(spec, "new", alpha_level, n_reps, master_seed, KernelConfig.fixed(sigma),
                             assign=assign, threads=threads)
        out.append((float(sigma), rep.rejection_rate))
    return out


def ks_distance_normal(sample) -> float:
    """Kolmogorov-Smirnov sup-distance between a sample and N(0, 1)."""
    return float(kstest(np.asarray(sample, dtype=np.float64), "norm").statistic)


def binomial_band(alpha_level: float, n_reps: int, coverage: float = 0.99) -> tuple[float, float]:
    """Central ``coverage`` interval of the rejection rate under level ``alpha_level``."""
    lo, hi = binom.interval(coverage, n_reps, alpha_level)
    return float(lo) / n_reps, float(hi) / n_reps
