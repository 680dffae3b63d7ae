import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from msh.exceptions import Degenerate, DimensionMismatch
from msh.geometry import (
    ModelKind,
    ModelParams,
    fit_least_squares,
    fit_minimal,
    params_valid,
    residual,
    residuals,
)


def _camera_pair(rng):
    K = np.array([[500.0, 0, 320], [0, 500, 240], [0, 0, 1]])
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(0.05, 0.2)
    Kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + np.sin(ang) * Kx + (1 - np.cos(ang)) * Kx @ Kx
    t = rng.normal(size=3)
    t /= np.linalg.norm(t)
    tx = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])
    Kinv = np.linalg.inv(K)
    F = Kinv.T @ tx @ R @ Kinv
    return K, R, t, F / np.linalg.norm(F)


def _correspondences(rng, n):
    K, R, t, F = _camera_pair(rng)
    Xw = rng.uniform([-2, -2, 5], [2, 2, 9], size=(n, 3))
    x1 = Xw @ K.T
    x2 = (Xw @ R.T + t) @ K.T
    return np.hstack([x1[:, :2] / x1[:, 2:], x2[:, :2] / x2[:, 2:]]), F


def _homography_correspondences(rng, n, H=None):
    if H is None:
        H = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        H[2, :2] *= 0.01
    src = rng.uniform(0, 100, size=(n, 2))
    dst = np.c_[src, np.ones(n)] @ H.T
    return np.hstack([src, dst[:, :2] / dst[:, 2:]]), H


# --- minimal solvers -------------------------------------------------------


def test_line2d_axis_example():
    p = fit_minimal("line2d", [(0, 0), (1, 0)])
    assert np.allclose(np.abs(p.theta), [0, 1, 0])
    assert residual(p, (3, 2)) == pytest.approx(2.0)


def test_circle_example():
    p = fit_minimal("circle2d", [(1, 0), (0, 1), (-1, 0)])
    assert np.allclose(p.theta, [0, 0, 1], atol=1e-12)
    assert residual(ModelParams(ModelKind.CIRCLE2D, [0, 0, 1]), (2, 0)) == pytest.approx(1.0)


def test_homography_identity():
    src = np.array([[0, 0], [1, 0], [0, 1], [1, 1.5]])
    p = fit_minimal("homography", np.hstack([src, src]))
    H = p.matrix / p.matrix[2, 2]
    assert np.allclose(H, np.eye(3), atol=1e-9)


def test_fundamental_recovers_generating_matrix():
    rng = np.random.default_rng(3)
    X, F0 = _correspondences(rng, 8)
    F = fit_minimal("fundamental", X).matrix
    F = F * np.sign(np.vdot(F, F0))
    assert np.linalg.norm(F - F0) / np.linalg.norm(F0) < 1e-6


def test_fundamental_residual_zero_on_epipolar_constraint():
    rng = np.random.default_rng(4)
    X, F0 = _correspondences(rng, 20)
    r = residuals(ModelParams(ModelKind.FUNDAMENTAL, F0.ravel()), X)
    assert np.all(r < 1e-9)


@pytest.mark.parametrize("kind,subset", [
    ("line2d", [(1, 1), (1, 1)]),
    ("line3d", [(1, 2, 3), (1, 2, 3)]),
    ("circle2d", [(0, 0), (1, 1), (2, 2)]),
    ("homography", [(0, 0, 0, 0), (1, 0, 1, 0), (2, 0, 2, 0), (0, 1, 0, 1)]),
])
def test_degenerate_subsets_raise(kind, subset):
    with pytest.raises(Degenerate):
        fit_minimal(kind, subset)


def test_fundamental_rank_deficient_raises():
    X = np.zeros((8, 4))
    X[:, 0] = np.arange(8)
    with pytest.raises(Degenerate):
        fit_minimal("fundamental", X)


def test_wrong_dimension_raises():
    with pytest.raises(DimensionMismatch):
        fit_minimal("circle2d", np.zeros((3, 4)))


# --- invariants over random minimal subsets -------------------------------


def _random_subset(kind, rng):
    kind = ModelKind.parse(kind)
    if kind is ModelKind.FUNDAMENTAL:
        return _correspondences(rng, 8)[0]
    if kind is ModelKind.HOMOGRAPHY:
        return np.hstack([rng.uniform(0, 100, (4, 2)), rng.uniform(0, 100, (4, 2))])
    return rng.uniform(-50, 50, size=(kind.minimal_size, kind.dim))


@pytest.mark.parametrize("kind", [k.value for k in ModelKind])
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_minimal_fit_interpolates_subset(kind, seed):
    rng = np.random.default_rng(seed)
    S = _random_subset(kind, rng)
    try:
        p = fit_minimal(kind, S)
    except Degenerate:
        return
    assert params_valid(p)
    assert residuals(p, S).max() <= 1e-7


@pytest.mark.parametrize("kind", [k.value for k in ModelKind])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_subset_order_does_not_matter(kind, seed):
    rng = np.random.default_rng(seed)
    S = _random_subset(kind, rng)
    probe = _random_subset(kind, rng)
    try:
        a = fit_minimal(kind, S)
        b = fit_minimal(kind, S[rng.permutation(len(S))])
    except Degenerate:
        return
    ra, rb = residuals(a, probe), residuals(b, probe)
    assert np.allclose(ra, rb, rtol=1e-9, atol=1e-9 * max(1.0, ra.max()))


@pytest.mark.parametrize("kind", ["line2d", "line3d"])
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_line_residual_translation_equivariant(kind, seed):
    rng = np.random.default_rng(seed)
    k = ModelKind.parse(kind)
    S = rng.uniform(-10, 10, size=(2, k.dim))
    q = rng.uniform(-10, 10, size=k.dim)
    shift = rng.uniform(-100, 100, size=k.dim)
    try:
        a = fit_minimal(kind, S)
        b = fit_minimal(kind, S + shift)
    except Degenerate:
        return
    assert residual(a, q) == pytest.approx(residual(b, q + shift), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_fundamental_epipolar_constraint_and_rank(seed):
    rng = np.random.default_rng(seed)
    X, _ = _correspondences(rng, 8)
    try:
        F = fit_minimal("fundamental", X).matrix
    except Degenerate:
        return
    x1 = np.c_[X[:, :2], np.ones(8)]
    x2 = np.c_[X[:, 2:], np.ones(8)]
    # normalize by the point scale so the check is unit-free
    s = np.diag([1 / 500, 1 / 500, 1])
    Fn = np.linalg.inv(s).T @ F @ np.linalg.inv(s)
    alg = np.einsum("ni,ij,nj->n", x2 @ s.T, Fn / np.linalg.norm(Fn), x1 @ s.T)
    assert np.abs(alg).max() <= 1e-7
    assert abs(np.linalg.det(F)) <= 1e-9


def test_residuals_nonnegative_and_zero_on_model():
    rng = np.random.default_rng(0)
    p = ModelParams(ModelKind.LINE3D, [1, 2, 3, 0, 0, 1])
    X = rng.normal(size=(50, 3))
    assert np.all(residuals(p, X) >= 0)
    assert residual(p, (1, 2, 40)) == 0


# --- homography Sampson residual against a symbolic derivation -----------


def _symbolic_sampson():
    x, y, u, v = sp.symbols("x y u v")
    h = sp.symbols("h0:9")
    H = sp.Matrix(3, 3, h)
    p = H * sp.Matrix([x, y, 1])
    eps = sp.Matrix([-p[1] + v * p[2], p[0] - u * p[2]])
    J = eps.jacobian([x, y, u, v])
    r2 = (eps.T * (J * J.T).inv() * eps)[0, 0]
    return sp.lambdify((x, y, u, v, *h), r2, "mpmath")


def test_homography_sampson_matches_symbolic_form():
    import mpmath

    mpmath.mp.dps = 40
    f = _symbolic_sampson()
    rng = np.random.default_rng(11)
    X, H = _homography_correspondences(rng, 30)
    X = X + rng.normal(scale=0.7, size=X.shape)
    p = ModelParams(ModelKind.HOMOGRAPHY, (H / np.linalg.norm(H)).ravel())
    got = residuals(p, X)
    want = [float(mpmath.sqrt(f(*row, *p.theta))) for row in X]
    assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_homography_residual_zero_on_exact_mapping():
    rng = np.random.default_rng(2)
    X, H = _homography_correspondences(rng, 20)
    p = ModelParams(ModelKind.HOMOGRAPHY, (H / np.linalg.norm(H)).ravel())
    assert residuals(p, X).max() < 1e-9


# --- least squares refits ---------------------------------------------------


def test_least_squares_line_recovers_noisy_line():
    rng = np.random.default_rng(0)
    t = rng.uniform(-50, 50, 200)
    X = np.c_[t, 0.5 * t + 3] + rng.normal(scale=0.1, size=(200, 2))
    p = fit_least_squares("line2d", X)
    assert residuals(p, X).mean() < 0.2


def test_least_squares_needs_enough_points():
    with pytest.raises(Degenerate):
        fit_least_squares("circle2d", np.zeros((2, 2)))


def test_model_params_roundtrip_and_readonly():
    p = ModelParams(ModelKind.LINE2D, [0, 1, 0])
    assert ModelParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        p.theta[0] = 2.0
    with pytest.raises(ValueError):
        ModelParams(ModelKind.LINE2D, [1, 2])


def test_kind_aliases():
    assert ModelKind.parse("circle") is ModelKind.CIRCLE2D
    assert ModelKind.parse("F") is ModelKind.FUNDAMENTAL
    assert [k.minimal_size for k in ModelKind] == [2, 3, 2, 4, 8]
