"""Wall-clock benchmark of a test across sample sizes."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .simulate import METHODS, SyntheticSpec, gen_gaussian, run_method
from .teststat import SCHEMA_VERSION


def scaling_exponent(sizes: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of log(time) against log(size)."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, float)), np.log(np.asarray(times, float)), 1)
    return float(slope)


def bench_runtime(
    sizes: Sequence[tuple[int, int]],
    d: int = 100,
    method: str = "new",
    n_runs: int = 5,
    seed: int = 0,
    alpha_level: float = 0.05,
) -> dict:
    """Time the full test (bandwidth + statistic + p-value) on null Gaussian data.

    Data generation is excluded from the timings. The headline figure per
    size is the minimum over ``n_runs``; the mean is reported alongside.
    """
    if n_runs < 3:
        raise ConfigError(f"n_runs must be >= 3, got {n_runs}")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    rows = []
    for i, (m, n) in enumerate(sizes):
        x, y = gen_gaussian(SyntheticSpec.null(d, m, n), np.random.SeedSequence(seed, spawn_key=(i,)))
        run_method(method, x, y, None, alpha_level, seed)  # warm-up
        times = []
        for _ in range(n_runs):
            t0 = time.perf_counter()
            run_method(method, x, y, None, alpha_level, seed)
            times.append(time.perf_counter() - t0)
        rows.append({
            "m": int(m),
            "n": int(n),
            "mean_s": float(np.mean(times)),
            "min_s": float(np.min(times)),
            "times_s": [float(t) for t in times],
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "bench",
        "method": method,
        "d": int(d),
        "n_runs": int(n_runs),
        "seed": int(seed),
        "results": rows,
    }
    if len(rows) >= 2:
        doc["scaling_exponent"] = scaling_exponent([r["m"] + r["n"] for r in rows], [r["min_s"] for r in rows])
    else:
        doc["scaling_exponent"] = None
    return doc
