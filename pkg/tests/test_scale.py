import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from msh.exceptions import DegenerateScale
from msh.scale import ikose, ikose_batch

import oracles


def test_gaussian_scale_recovery():
    r = np.abs(np.random.default_rng(0).normal(scale=2.0, size=10_000))
    est = ikose(r, K=1000, E=2.5)
    assert 1.6 <= est.scale <= 2.4


def test_all_zero_is_degenerate():
    with pytest.raises(DegenerateScale):
        ikose(np.zeros(10), K=2)


def test_small_worked_example():
    est = ikose([0.1, 0.2, 0.3, 5, 6], K=2, E=2.5)
    assert est.inlier_count == 3
    assert est.scale == pytest.approx(0.2 / norm.ppf(5 / 6), rel=1e-12)
    assert est.scale == pytest.approx(0.2068, abs=1e-4)


def test_matches_loop_oracle():
    rng = np.random.default_rng(1)
    R = np.abs(rng.normal(size=(40, 200))) * rng.uniform(0.5, 3, size=(40, 1))
    R[:, 150:] += 20
    s, nu, _, ok = ikose_batch(R, K=15, E=2.5)
    for i in range(len(R)):
        want_s, want_nu = oracles.ikose(R[i].tolist(), 15, 2.5)
        assert ok[i]
        assert s[i] == pytest.approx(want_s, rel=1e-12)
        assert nu[i] == want_nu


def test_invalid_arguments():
    with pytest.raises(ValueError):
        ikose([1.0, 2.0], K=3)
    with pytest.raises(ValueError):
        ikose([1.0, 2.0], K=1, E=0)


residual_lists = st.lists(st.floats(0.01, 100.0), min_size=10, max_size=80)


@settings(max_examples=200, deadline=None)
@given(r=residual_lists, c=st.floats(0.01, 100.0), K=st.integers(1, 5))
def test_scale_equivariance(r, c, K):
    r = np.array(r)
    try:
        a = ikose(r, K)
    except DegenerateScale:
        return
    b = ikose(c * r, K)
    assert b.scale == pytest.approx(c * a.scale, rel=1e-9)
    assert a.inlier_count == b.inlier_count


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(50, 400),
       sigma=st.floats(0.01, 100.0), frac=st.floats(0.02, 0.3),
       extra=st.lists(st.floats(0.0, 1e6), min_size=1, max_size=50))
def test_far_residuals_keep_the_fixed_point(seed, n, sigma, frac, extra):
    # Residuals beyond E*s leave (s, nu) a fixed point of the iteration:
    # the K-th residual and the inlier count at s are unchanged.
    r = np.abs(np.random.default_rng(seed).normal(scale=sigma, size=n))
    K = max(1, int(frac * n))
    try:
        a = ikose(r, K)
    except DegenerateScale:
        return
    aug = np.concatenate([r, 2.5 * a.scale * (1.0 + 1e-9) + np.array(extra)])
    nu = np.count_nonzero(aug <= 2.5 * a.scale)
    assert nu == a.inlier_count
    s = np.sort(aug)[K - 1] / norm.ppf(0.5 * (1 + K / nu))
    assert s == pytest.approx(a.scale, rel=1e-12)


def test_far_residual_can_change_the_fixed_point():
    # A residual above the converged cutoff but inside an early iterate's
    # cutoff steers the iteration to another fixed point.
    r = np.array([1.0] * 7 + [0.0625, 0.03125, 0.01])
    a = ikose(r, K=1)
    b = ikose(np.append(r, 2 * 2.5 * a.scale), K=1)
    assert b.scale > a.scale


def _anchor(est, K):
    # the K-th residual implied by the returned scale and inlier count
    return est.scale * norm.ppf(0.5 * (1.0 + K / est.inlier_count))


@settings(max_examples=200, deadline=None)
@given(r=residual_lists, K=st.integers(1, 4))
def test_kth_residual_monotone_in_k(r, K):
    r = np.array(r)
    try:
        a, b = ikose(r, K), ikose(r, K + 1)
    except DegenerateScale:
        return
    assert _anchor(a, K) <= _anchor(b, K + 1) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(r=residual_lists, K=st.integers(1, 5))
def test_inlier_count_at_least_k(r, K):
    try:
        est = ikose(np.array(r), K)
    except DegenerateScale:
        return
    assert est.scale > 0 and est.inlier_count >= K
