import numpy as np
import pytest

from fastkts.errors import ConfigError, InvalidSpec
from fastkts.simulate import (
    SyntheticSpec,
    average_median_heuristic,
    bandwidth_sweep,
    binomial_band,
    estimate_power,
    gen_gaussian,
    gen_lognormal,
    gen_lognormal_normals,
    ks_distance_normal,
    null_zscore_sample,
    rep_seeds,
)


def test_null_generator_moments():
    m = 50_000
    x, y = gen_gaussian(SyntheticSpec.null(3, m, m), 0)
    for s in (x, y):
        assert np.all(np.abs(s.mean(axis=0)) < 4 * np.sqrt(1 / m))
        assert np.all(np.abs(s.var(axis=0) - 1) < 4 * np.sqrt(2 / m))


def test_gmd_and_gvd_touch_only_first_coordinate():
    m = 20_000
    _, y = gen_gaussian(SyntheticSpec.gmd(4, 10, m, shift=0.8), 1)
    assert abs(y[:, 0].mean() - 0.8) < 0.05
    assert np.all(np.abs(y[:, 1:].mean(axis=0)) < 0.05)
    _, y = gen_gaussian(SyntheticSpec.gvd(4, 10, m, scale=2.0), 1)
    assert abs(y[:, 0].var() - 2.0) < 0.1
    assert np.all(np.abs(y[:, 1:].var(axis=0) - 1) < 0.05)


def test_lognormal_covariance_and_shift():
    spec = SyntheticSpec.lognormal(4, 40_000, 40_000, a=0.3, rho=0.4)
    x, y = gen_lognormal_normals(spec, 2)
    np.testing.assert_allclose(np.cov(x.T), 0.4 ** np.abs(np.subtract.outer(range(4), range(4))), atol=0.03)
    np.testing.assert_allclose(y.mean(axis=0), 0.3, atol=0.03)
    ex, _ = gen_lognormal(spec, 2)
    np.testing.assert_array_equal(ex, np.exp(x))


def test_generators_deterministic():
    spec = SyntheticSpec.lognormal(5, 30, 20, a=0.1)
    a = gen_lognormal(spec, np.random.SeedSequence(3))
    b = gen_lognormal(spec, np.random.SeedSequence(3))
    for u, v in zip(a, b):
        assert u.tobytes() == v.tobytes()


@pytest.mark.parametrize("kwargs", [
    dict(family="cauchy", d=2, m=5, n=5),
    dict(family="gmd", d=0, m=5, n=5),
    dict(family="gvd", d=2, m=5, n=5, param=-1.0),
    dict(family="lognormal", d=2, m=5, n=5, rho=1.0),
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        SyntheticSpec(**kwargs)


def test_gen_gaussian_rejects_lognormal():
    with pytest.raises(InvalidSpec):
        gen_gaussian(SyntheticSpec.lognormal(2, 5, 5), 0)


def test_rep_seeds_distinct_and_stable():
    seeds = [rep_seeds(2024, r)[1] for r in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [rep_seeds(2024, r)[1] for r in range(100)]
    assert all(0 <= s < 2**63 for s in seeds)


def test_estimate_power_null_level():
    rep = estimate_power(SyntheticSpec.null(5, 200, 200), "new", 0.05, 300, master_seed=1)
    lo, hi = binomial_band(0.05, 300)
    assert lo <= rep.rejection_rate <= hi
    assert rep.std_error == pytest.approx(np.sqrt(rep.rejection_rate * (1 - rep.rejection_rate) / 300))


def test_estimate_power_independent_of_threads():
    spec = SyntheticSpec.gmd(5, 100, 100, shift=0.4)
    a = estimate_power(spec, ["new", "mmd-linear"], 0.05, 20, master_seed=3, threads=1)
    b = estimate_power(spec, ["new", "mmd-linear"], 0.05, 20, master_seed=3, threads=3)
    assert a.per_method["new"].p_values == b.per_method["new"].p_values
    assert a.per_method["mmd-linear"].rejections == b.per_method["mmd-linear"].rejections


def test_estimate_power_unknown_method():
    with pytest.raises(ConfigError):
        estimate_power(SyntheticSpec.null(2, 20, 20), "t-test", n_reps=2)


def test_estimate_power_error_names_replication():
    with pytest.raises(Exception, match="replication 0"):
        estimate_power(SyntheticSpec.null(2, 20, 30), "mmd-linear", n_reps=2)


def test_null_zscore_sample_shape_and_spread():
    z = null_zscore_sample(SyntheticSpec.null(5, 100, 100), 200, master_seed=0)
    assert z.shape == (200, 2)
    assert abs(z[:, 0].mean()) < 4 / np.sqrt(200)
    assert 0.7 < z[:, 0].var() < 1.3
    with pytest.raises(InvalidSpec):
        null_zscore_sample(SyntheticSpec.gmd(5, 100, 100), 2)


def test_average_median_heuristic_gaussian():
    med = average_median_heuristic(SyntheticSpec.null(100, 300, 300), n_trials=3, scale=1.0)
    assert abs(med - np.sqrt(200)) < 0.5


def test_bandwidth_sweep_null_level():
    out = bandwidth_sweep(SyntheticSpec.null(5, 200, 200), [0.5, 2.0, 8.0], 0.05, 200, master_seed=2)
    lo, hi = binomial_band(0.05, 200)
    assert [s for s, _ in out] == [0.5, 2.0, 8.0]
    for _, rate in out:
        assert lo <= rate <= hi
    with pytest.raises(ConfigError):
        bandwidth_sweep(SyntheticSpec.null(5, 20, 20), [])


def test_ks_distance():
    z = np.random.default_rng(0).standard_normal(5000)
    assert ks_distance_normal(z) < 0.03
    assert ks_distance_normal(z + 1) > 0.3


def test_binomial_band():
    lo, hi = binomial_band(0.05, 1000)
    assert lo < 0.05 < hi
    assert isinstance(lo, float)
