import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from fastkts import KernelConfig, gaussian_kernel_matrix, median_heuristic, pairwise_sq_distances
from fastkts.errors import DegenerateBandwidth, InsufficientData, InvalidBandwidth, InvalidData
from fastkts.kernel import DEFAULT_MEDIAN_SCALE, resolve_bandwidth


def test_distances_345_triangle():
    np.testing.assert_array_equal(pairwise_sq_distances([[0, 0], [3, 4]]), [[0, 25], [25, 0]])


def test_distances_single_row():
    np.testing.assert_array_equal(pairwise_sq_distances([[1, 2, 3]]), [[0]])


def test_distances_match_double_loop():
    pts = np.random.default_rng(3).normal(size=(5, 4))
    np.testing.assert_allclose(pairwise_sq_distances(pts), oracles.sq_dists(pts), rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 5)),
              elements=st.floats(-50, 50, allow_nan=False)))
def test_distances_properties(pts):
    d2 = pairwise_sq_distances(pts)
    assert (d2 >= 0).all()
    np.testing.assert_array_equal(d2, d2.T)
    np.testing.assert_array_equal(np.diag(d2), 0.0)
    ref = oracles.sq_dists(pts)
    np.testing.assert_allclose(d2, ref, atol=1e-9 * max(1.0, ref.max()))


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_distances_reject_non_finite(bad):
    with pytest.raises(InvalidData):
        pairwise_sq_distances([[0.0, 1.0], [bad, 2.0]])


def test_kernel_identical_rows_is_ones():
    k = gaussian_kernel_matrix(np.ones((4, 3)), 0.3)
    np.testing.assert_array_equal(k, np.ones((4, 4)))


def test_kernel_at_distance_sqrt2_sigma():
    sigma = 1.3
    k = gaussian_kernel_matrix([[0.0], [sigma * math.sqrt(2)]], sigma)
    assert k[0, 1] == pytest.approx(math.exp(-1), rel=1e-12)
    assert k[0, 1] == pytest.approx(0.367879, abs=1e-6)


def test_kernel_matches_oracle():
    pts = np.random.default_rng(11).normal(size=(6, 3))
    np.testing.assert_allclose(gaussian_kernel_matrix(pts, 1.7), oracles.gaussian_kernel(pts, 1.7), atol=1e-12)


@pytest.mark.parametrize("sigma", [0.0, -1.0, np.nan, np.inf])
def test_kernel_bad_sigma(sigma):
    with pytest.raises(InvalidBandwidth):
        gaussian_kernel_matrix([[0.0], [1.0]], sigma)


def test_median_small_enumeration():
    assert median_heuristic([[0.0], [1.0], [2.0]]) == 1.0


def test_median_lower_median_for_even_pair_count():
    # distances {1, 2, 3, 1, 2, 1}: sorted 1,1,1,2,2,3 -> lower median 1
    assert median_heuristic([[0.0], [1.0], [2.0], [3.0]]) == 1.0
    # 0, 1, 5, 9: sorted distances 1,4,4,5,8,9 -> 4
    assert median_heuristic([[0.0], [1.0], [5.0], [9.0]]) == 4.0


def test_median_identical_rows():
    with pytest.raises(DegenerateBandwidth):
        median_heuristic([[1.0, 2.0], [1.0, 2.0]])


def test_median_needs_two_rows():
    with pytest.raises(InsufficientData):
        median_heuristic([[1.0, 2.0]])


def test_median_matches_full_enumeration():
    pts = np.random.default_rng(5).normal(size=(60, 7))
    assert median_heuristic(pts, subsample_size=1000) == pytest.approx(oracles.median_distance(pts), rel=1e-12)


def test_median_gaussian_d100():
    pts = np.random.default_rng(0).standard_normal((2000, 100))
    med = median_heuristic(pts, subsample_size=2000)
    assert abs(med - math.sqrt(200)) < 0.5
    sub = pts[np.random.default_rng(1).choice(2000, 500, replace=False)]
    assert med == pytest.approx(oracles.median_distance(sub), abs=0.1)


def test_median_subsample_deterministic():
    pts = np.random.default_rng(2).normal(size=(300, 4))
    a = median_heuristic(pts, subsample_size=50, seed=9)
    b = median_heuristic(pts, subsample_size=50, seed=9)
    c = median_heuristic(pts, subsample_size=50, seed=10)
    assert a == b
    assert a != c


def test_resolve_bandwidth():
    pts = np.random.default_rng(4).normal(size=(40, 3))
    assert resolve_bandwidth(KernelConfig.fixed(2.5), pts) == 2.5
    med = median_heuristic(pts, 1000, 0)
    assert resolve_bandwidth(None, pts) == pytest.approx(DEFAULT_MEDIAN_SCALE * med)
    assert resolve_bandwidth(KernelConfig.median(scale=1.0), pts) == pytest.approx(med)


def test_config_validation():
    with pytest.raises(InvalidBandwidth):
        KernelConfig.fixed(-1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_translation_invariance(seed, offset):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 4))
    shift = pts + offset * rng.normal(size=4)
    np.testing.assert_allclose(pairwise_sq_distances(shift), pairwise_sq_distances(pts), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(gaussian_kernel_matrix(shift, 1.5), gaussian_kernel_matrix(pts, 1.5), rtol=1e-9)
    assert median_heuristic(shift) == pytest.approx(median_heuristic(pts), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_row_permutation(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(10, 3))
    perm = rng.permutation(10)
    k = gaussian_kernel_matrix(pts, 0.8)
    np.testing.assert_allclose(gaussian_kernel_matrix(pts[perm], 0.8), k[np.ix_(perm, perm)], atol=1e-14)
    assert median_heuristic(pts[perm]) == pytest.approx(median_heuristic(pts), rel=1e-12)


def test_kernel_monotone_in_distance():
    pts = np.random.default_rng(6).normal(size=(30, 2))
    d2 = pairwise_sq_distances(pts).ravel()
    k = gaussian_kernel_matrix(pts, 1.0).ravel()
    order = np.argsort(d2)
    assert np.all(np.diff(k[order]) <= 1e-15)
