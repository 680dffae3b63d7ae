"""Model families, minimal-subset solvers and residual functions.

Every solver and residual has a batched form operating on stacks of subsets
or parameter vectors; the scalar helpers (`fit_minimal`, `residual`) wrap
the batched code so both paths share one implementation.

Parameter layouts (``ModelParams.theta``):

==============  ==============================================
line2d          ``(a, b, c)`` with ``a**2 + b**2 == 1``
circle2d        ``(cx, cy, r)`` with ``r > 0``
line3d          ``(px, py, pz, dx, dy, dz)``, unit direction
homography      3x3 matrix, row-major, unit Frobenius norm
fundamental     3x3 rank-2 matrix, row-major, unit Frobenius norm
==============  ==============================================
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import Degenerate, DimensionMismatch

__all__ = [
    "ModelKind",
    "ModelParams",
    "fit_minimal",
    "fit_minimal_batch",
    "fit_least_squares",
    "residual",
    "residuals",
    "residuals_batch",
    "params_valid",
]

# relative tolerance for the degeneracy tests (sine of an angle, or a ratio
# of singular values)
_DEGENERACY_TOL = 1e-9
# hypotheses per chunk when evaluating batched residuals
_RESIDUAL_CHUNK = 512


class ModelKind(Enum):
    LINE2D = "line2d"
    CIRCLE2D = "circle2d"
    LINE3D = "line3d"
    HOMOGRAPHY = "homography"
    FUNDAMENTAL = "fundamental"

    @property
    def minimal_size(self):
        return _MINIMAL_SIZE[self]

    @property
    def dim(self):
        """Ambient dimension of one data point."""
        return _DIM[self]

    @property
    def n_params(self):
        return _N_PARAMS[self]

    @classmethod
    def parse(cls, name):
        """Resolve a kind from its value or a short alias (``"line"``, ``"h"``...)."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown model kind {name!r}") from None


_MINIMAL_SIZE = {
    ModelKind.LINE2D: 2,
    ModelKind.CIRCLE2D: 3,
    ModelKind.LINE3D: 2,
    ModelKind.HOMOGRAPHY: 4,
    ModelKind.FUNDAMENTAL: 8,
}
_DIM = {
    ModelKind.LINE2D: 2,
    ModelKind.CIRCLE2D: 2,
    ModelKind.LINE3D: 3,
    ModelKind.HOMOGRAPHY: 4,
    ModelKind.FUNDAMENTAL: 4,
}
_N_PARAMS = {
    ModelKind.LINE2D: 3,
    ModelKind.CIRCLE2D: 3,
    ModelKind.LINE3D: 6,
    ModelKind.HOMOGRAPHY: 9,
    ModelKind.FUNDAMENTAL: 9,
}
_ALIASES = {
    "line2d": ModelKind.LINE2D,
    "line": ModelKind.LINE2D,
    "circle2d": ModelKind.CIRCLE2D,
    "circle": ModelKind.CIRCLE2D,
    "line3d": ModelKind.LINE3D,
    "homography": ModelKind.HOMOGRAPHY,
    "h": ModelKind.HOMOGRAPHY,
    "fundamental": ModelKind.FUNDAMENTAL,
    "f": ModelKind.FUNDAMENTAL,
}


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Parameters of one model instance."""

    kind: ModelKind
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size != self.kind.n_params:
            raise ValueError(
                f"{self.kind.value} expects {self.kind.n_params} parameters, "
                f"got {theta.size}"
            )
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def matrix(self):
        """3x3 matrix view for homography / fundamental models."""
        if self.kind not in (ModelKind.HOMOGRAPHY, ModelKind.FUNDAMENTAL):
            raise AttributeError(f"{self.kind.value} has no matrix form")
        return self.theta.reshape(3, 3)

    def to_dict(self):
        return {"kind": self.kind.value, "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(ModelKind.parse(d["kind"]), np.asarray(d["theta"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash((self.kind, self.theta.tobytes()))

    def __repr__(self):
        vals = ", ".join(f"{v:.6g}" for v in self.theta)
        return f"ModelParams({self.kind.value}, [{vals}])"


def params_valid(params, tol=1e-9):
    """Check the normalization invariants of ``params``."""
    t = params.theta
    if not np.all(np.isfinite(t)):
        return False
    kind = params.kind
    if kind is ModelKind.LINE2D:
        return abs(t[0] ** 2 + t[1] ** 2 - 1.0) <= tol
    if kind is ModelKind.CIRCLE2D:
        return t[2] > 0
    if kind is ModelKind.LINE3D:
        return abs(np.dot(t[3:], t[3:]) - 1.0) <= tol
    fro_ok = abs(np.linalg.norm(t) - 1.0) <= tol
    if kind is ModelKind.FUNDAMENTAL:
        return fro_ok and abs(np.linalg.det(t.reshape(3, 3))) <= tol
    return fro_ok


def _check_dim(kind, X):
    if X.ndim < 1 or X.shape[-1] != kind.dim:
        raise DimensionMismatch(
            f"{kind.value} needs {kind.dim}-dimensional points, "
            f"got shape {X.shape}"
        )


# ---------------------------------------------------------------------------
# Minimal solvers (batched)
# ---------------------------------------------------------------------------


def _fit_line2d(S):
    p1, p2 = S[:, 0], S[:, 1]
    d = p2 - p1
    length = np.hypot(d[:, 0], d[:, 1])
    scale = np.maximum(np.abs(S).max(axis=(1, 2)), 1.0)
    ok = length > _DEGENERACY_TOL * scale
    length = np.where(ok, length, 1.0)
    a = -d[:, 1] / length
    b = d[:, 0] / length
    c = -(a * p1[:, 0] + b * p1[:, 1])
    return np.column_stack([a, b, c]), ok


def _fit_line3d(S):
    p1, p2 = S[:, 0], S[:, 1]
    d = p2 - p1
    length = np.linalg.norm(d, axis=1)
    scale = np.maximum(np.abs(S).max(axis=(1, 2)), 1.0)
    ok = length > _DEGENERACY_TOL * scale
    d = d / np.where(ok, length, 1.0)[:, None]
    return np.column_stack([p1, d]), ok


def _fit_circle2d(S):
    a = S[:, 0]
    b = S[:, 1] - a
    c = S[:, 2] - a
    cross = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
    nb = np.einsum("ij,ij->i", b, b)
    nc = np.einsum("ij,ij->i", c, c)
    # |sin| of the angle at the first vertex, plus coincident-point guard
    ok = (nb > 0) & (nc > 0)
    ok &= np.abs(cross) > _DEGENERACY_TOL * np.sqrt(np.where(ok, nb * nc, 1.0))
    d = 2.0 * np.where(ok, cross, 1.0)
    ux = (c[:, 1] * nb - b[:, 1] * nc) / d
    uy = (b[:, 0] * nc - c[:, 0] * nb) / d
    r = np.hypot(ux, uy)
    return np.column_stack([a[:, 0] + ux, a[:, 1] + uy, r]), ok


def _normalizing_transform(P):
    """Similarity transforms (B, 3, 3) taking each point set to centroid 0 and
    mean distance sqrt(2)."""
    centroid = P.mean(axis=1)
    dist = np.linalg.norm(P - centroid[:, None, :], axis=2).mean(axis=1)
    s = np.sqrt(2.0) / np.where(dist > 0, dist, 1.0)
    T = np.zeros((P.shape[0], 3, 3))
    T[:, 0, 0] = s
    T[:, 1, 1] = s
    T[:, 0, 2] = -s * centroid[:, 0]
    T[:, 1, 2] = -s * centroid[:, 1]
    T[:, 2, 2] = 1.0
    return T


def _apply(T, P):
    return P * T[:, None, 0, 0][..., None] + T[:, None, :2, 2]


def _collinear_triples(P):
    """True where any three points of each (B, 4, 2) set are collinear."""
    bad = np.zeros(P.shape[0], dtype=bool)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        u = P[:, j] - P[:, i]
        v = P[:, k] - P[:, i]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        bad |= np.abs(cross) <= _DEGENERACY_TOL * nu * nv
        bad |= (nu == 0) | (nv == 0)
    return bad


def _frobenius_normalize(M):
    norm = np.linalg.norm(M, axis=(1, 2))
    ok = norm > 0
    M = M / np.where(ok, norm, 1.0)[:, None, None]
    # fix the overall sign so that the largest-magnitude entry is positive
    flat = M.reshape(M.shape[0], -1)
    idx = np.abs(flat).argmax(axis=1)
    sign = np.sign(flat[np.arange(len(flat)), idx])
    sign[sign == 0] = 1.0
    return M * sign[:, None, None], ok


def _dlt_homography(src, dst):
    """Normalized DLT over stacked correspondence sets (B, m, 2), m >= 4."""
    T1 = _normalizing_transform(src)
    T2 = _normalizing_transform(dst)
    x = _apply(T1, src)
    xp = _apply(T2, dst)
    B, m, _ = x.shape
    one = np.ones((B, m))
    zero = np.zeros((B, m, 3))
    xh = np.concatenate([x, one[..., None]], axis=2)
    r1 = np.concatenate([zero, -xh, xp[..., 1:2] * xh], axis=2)
    r2 = np.concatenate([xh, zero, -xp[..., 0:1] * xh], axis=2)
    A = np.concatenate([r1, r2], axis=1)
    _, s, vt = np.linalg.svd(A)
    Hn = vt[:, -1].reshape(B, 3, 3)
    H = np.linalg.inv(T2) @ Hn @ T1
    H, ok = _frobenius_normalize(H)
    # a one-dimensional null space is needed for a unique solution
    ok &= s[:, 7] > _DEGENERACY_TOL * s[:, 0]
    return H.reshape(B, 9), ok


def _fit_homography(S):
    src, dst = S[..., :2], S[..., 2:]
    H, ok = _dlt_homography(src, dst)
    ok &= ~_collinear_triples(src) & ~_collinear_triples(dst)
    return H, ok


def _rank2(F):
    u, s, vt = np.linalg.svd(F)
    s[:, 2] = 0.0
    return u @ (s[:, :, None] * vt)


def _eight_point(src, dst):
    """Normalized eight-point algorithm over stacked sets (B, m, 2), m >= 8."""
    T1 = _normalizing_transform(src)
    T2 = _normalizing_transform(dst)
    x = _apply(T1, src)
    xp = _apply(T2, dst)
    B, m, _ = x.shape
    A = np.stack(
        [
            xp[..., 0] * x[..., 0],
            xp[..., 0] * x[..., 1],
            xp[..., 0],
            xp[..., 1] * x[..., 0],
            xp[..., 1] * x[..., 1],
            xp[..., 1],
            x[..., 0],
            x[..., 1],
            np.ones((B, m)),
        ],
        axis=2,
    )
    _, s, vt = np.linalg.svd(A)
    Fn = _rank2(vt[:, -1].reshape(B, 3, 3))
    F = np.transpose(T2, (0, 2, 1)) @ Fn @ T1
    F, ok = _frobenius_normalize(F)
    F = _rank2(F)
    ok &= s[:, 7] > _DEGENERACY_TOL * s[:, 0]
    return F.reshape(B, 9), ok


def _fit_fundamental(S):
    return _eight_point(S[..., :2], S[..., 2:])


_MINIMAL_SOLVERS = {
    ModelKind.LINE2D: _fit_line2d,
    ModelKind.CIRCLE2D: _fit_circle2d,
    ModelKind.LINE3D: _fit_line3d,
    ModelKind.HOMOGRAPHY: _fit_homography,
    ModelKind.FUNDAMENTAL: _fit_fundamental,
}


def fit_minimal_batch(kind, subsets):
    """Fit one model per minimal subset.

    Parameters
    ----------
    kind : ModelKind
    subsets : array-like of shape (B, kind.minimal_size, kind.dim)

    Returns
    -------
    thetas : ndarray of shape (B, kind.n_params)
        Parameter vectors; rows where ``ok`` is False are meaningless.
    ok : ndarray of bool, shape (B,)
        False for degenerate subsets.
    """
    kind = ModelKind.parse(kind)
    S = np.asarray(subsets, dtype=float)
    if S.ndim != 3 or S.shape[1] != kind.minimal_size:
        raise ValueError(
            f"{kind.value} needs subsets of shape (B, {kind.minimal_size}, "
            f"{kind.dim}), got {S.shape}"
        )
    _check_dim(kind, S)
    thetas, ok = _MINIMAL_SOLVERS[kind](S)
    ok &= np.all(np.isfinite(thetas), axis=1)
    return thetas, ok


def fit_minimal(kind, subset):
    """Fit a model exactly through a minimal subset.

    Raises
    ------
    Degenerate
        If the subset does not determine a unique model (coincident points,
        collinear circle triple, collinear homography triple, rank-deficient
        eight-point design).
    """
    kind = ModelKind.parse(kind)
    S = np.asarray(subset, dtype=float)[None]
    thetas, ok = fit_minimal_batch(kind, S)
    if not ok[0]:
        raise Degenerate(f"degenerate minimal subset for {kind.value}")
    return ModelParams(kind, thetas[0])


# ---------------------------------------------------------------------------
# Residuals (batched over hypotheses)
# ---------------------------------------------------------------------------


def _res_line2d(T, X):
    return np.abs(T[:, :2] @ X.T + T[:, 2:3])


def _res_circle2d(T, X):
    dx = X[None, :, 0] - T[:, 0:1]
    dy = X[None, :, 1] - T[:, 1:2]
    return np.abs(np.hypot(dx, dy) - T[:, 2:3])


def _res_line3d(T, X):
    # |(x - p) x d| component by component
    dx = X[None, :, 0] - T[:, 0:1]
    dy = X[None, :, 1] - T[:, 1:2]
    dz = X[None, :, 2] - T[:, 2:3]
    ux, uy, uz = T[:, 3:4], T[:, 4:5], T[:, 5:6]
    cx = dy * uz
    cx -= dz * uy
    cy = dz * ux
    cy -= dx * uz
    dx *= uy
    dy *= ux
    dx -= dy
    cx *= cx
    cy *= cy
    dx *= dx
    cx += cy
    cx += dx
    return np.sqrt(cx, out=cx)


def _homogeneous(P):
    return np.concatenate([P, np.ones(P.shape[:-1] + (1,))], axis=-1)


def _res_fundamental(T, X):
    F = T.reshape(-1, 3, 3)
    x = _homogeneous(X[:, :2])
    xp = _homogeneous(X[:, 2:])
    Fx = np.einsum("vij,nj->vni", F, x)
    Ftxp = np.einsum("vji,nj->vni", F, xp)
    num = np.abs(np.einsum("vni,ni->vn", Fx, xp))
    den = np.sqrt(Fx[..., 0] ** 2 + Fx[..., 1] ** 2 + Ftxp[..., 0] ** 2 + Ftxp[..., 1] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(num == 0, 0.0, np.where(np.isfinite(r), r, np.inf))


def _res_homography(T, X):
    H = T.reshape(-1, 3, 3)
    x = _homogeneous(X[:, :2])
    u, v = X[None, :, 2], X[None, :, 3]
    Hx = np.einsum("vij,nj->vni", H, x)
    w = Hx[..., 2]
    e1 = -Hx[..., 1] + v * w
    e2 = Hx[..., 0] - u * w
    h = H[:, None]
    # Jacobian rows of (e1, e2) w.r.t. (x, y, u, v)
    j1x = -h[..., 1, 0] + v * h[..., 2, 0]
    j1y = -h[..., 1, 1] + v * h[..., 2, 1]
    j2x = h[..., 0, 0] - u * h[..., 2, 0]
    j2y = h[..., 0, 1] - u * h[..., 2, 1]
    a = j1x**2 + j1y**2 + w**2
    c = j2x**2 + j2y**2 + w**2
    b = j1x * j2x + j1y * j2y
    det = a * c - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = (c * e1**2 - 2.0 * b * e1 * e2 + a * e2**2) / det
    r = np.sqrt(np.maximum(r2, 0.0))
    exact = (e1 == 0) & (e2 == 0)
    return np.where(exact, 0.0, np.where(np.isfinite(r), r, np.inf))


_RESIDUALS = {
    ModelKind.LINE2D: _res_line2d,
    ModelKind.CIRCLE2D: _res_circle2d,
    ModelKind.LINE3D: _res_line3d,
    ModelKind.HOMOGRAPHY: _res_homography,
    ModelKind.FUNDAMENTAL: _res_fundamental,
}


def residuals_batch(kind, thetas, X):
    """Residual matrix of shape (V, n) for V parameter vectors and n points.

    Line residuals are orthogonal distances, the circle residual is the
    unsigned radial deviation, and the two-view models use Sampson
    distances.
    """
    kind = ModelKind.parse(kind)
    X = np.asarray(X, dtype=float)
    _check_dim(kind, X)
    T = np.atleast_2d(np.asarray(thetas, dtype=float))
    func = _RESIDUALS[kind]
    if len(T) <= _RESIDUAL_CHUNK:
        return func(T, X)
    out = np.empty((len(T), len(X)))
    for start in range(0, len(T), _RESIDUAL_CHUNK):
        stop = start + _RESIDUAL_CHUNK
        out[start:stop] = func(T[start:stop], X)
    return out


def residuals(params, X):
    """Residuals of every row of ``X`` to one model."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return residuals_batch(params.kind, params.theta[None], X)[0]


def residual(params, point):
    """Residual of a single data point."""
    return float(residuals(params, np.asarray(point, dtype=float)[None])[0])


# ---------------------------------------------------------------------------
# Least-squares refits (used by the optional refinement step)
# ---------------------------------------------------------------------------


def fit_least_squares(kind, X):
    """Fit a model to an arbitrary number (>= minimal size) of points.

    Lines use total least squares, circles the algebraic (Kasa) fit, and the
    two-view models the normalized DLT / eight-point solvers.
    """
    kind = ModelKind.parse(kind)
    X = np.asarray(X, dtype=float)
    _check_dim(kind, X)
    if len(X) < kind.minimal_size:
        raise Degenerate(
            f"{kind.value} needs at least {kind.minimal_size} points, got {len(X)}"
        )
    if kind is ModelKind.LINE2D:
        mu = X.mean(axis=0)
        _, _, vt = np.linalg.svd(X - mu)
        a, b = vt[-1]
        theta = np.array([a, b, -(a * mu[0] + b * mu[1])])
    elif kind is ModelKind.LINE3D:
        mu = X.mean(axis=0)
        _, _, vt = np.linalg.svd(X - mu)
        theta = np.concatenate([mu, vt[0]])
    elif kind is ModelKind.CIRCLE2D:
        A = np.column_stack([2 * X, np.ones(len(X))])
        rhs = (X**2).sum(axis=1)
        (cx, cy, k), *_ = np.linalg.lstsq(A, rhs, rcond=None)
        r2 = k + cx**2 + cy**2
        if r2 <= 0:
            raise Degenerate("algebraic circle fit produced a non-positive radius")
        theta = np.array([cx, cy, np.sqrt(r2)])
    elif kind is ModelKind.HOMOGRAPHY:
        H, ok = _dlt_homography(X[None, :, :2], X[None, :, 2:])
        if not ok[0]:
            raise Degenerate("homography least-squares fit is degenerate")
        theta = H[0]
    else:
        F, ok = _eight_point(X[None, :, :2], X[None, :, 2:])
        if not ok[0]:
            raise Degenerate("fundamental least-squares fit is degenerate")
        theta = F[0]
    if not np.all(np.isfinite(theta)):
        raise Degenerate(f"{kind.value} least-squares fit is not finite")
    return ModelParams(kind, theta)
