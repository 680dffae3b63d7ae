"""Per-hypothesis inlier scale estimation (IKOSE).

The K-th smallest residual is normalized by the Gaussian quantile of the
fraction ``K / nu`` of points it represents, where ``nu`` is the current
inlier count.  The inlier count is then re-estimated as the number of
residuals within ``E`` scales and the two steps alternate until ``nu``
stops changing.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .exceptions import DegenerateScale

__all__ = ["ScaleEstimate", "ikose", "ikose_batch", "DEFAULT_K", "DEFAULT_E"]

DEFAULT_K = 10
DEFAULT_E = 2.5
MAX_ITER = 50


@dataclass(frozen=True)
class ScaleEstimate:
    scale: float
    inlier_count: int
    iterations: int


def ikose_batch(R, K=DEFAULT_K, E=DEFAULT_E, max_iter=MAX_ITER):
    """Run IKOSE independently on every row of a residual matrix.

    Parameters
    ----------
    R : ndarray of shape (V, n)
        Nonnegative residuals, one row per hypothesis.
    K : int
        Order of the residual used as the scale anchor.
    E : float
        Inlier threshold in units of the estimated scale.

    Returns
    -------
    scale : ndarray of shape (V,)
    inlier_count : ndarray of int, shape (V,)
    iterations : ndarray of int, shape (V,)
    ok : ndarray of bool, shape (V,)
        False where the estimate is degenerate (zero K-th residual, or the
        inlier count fell below K).
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    V, n = R.shape
    if not 1 <= K <= n:
        raise ValueError(f"K must be in [1, {n}], got {K}")
    if E <= 0:
        raise ValueError(f"E must be positive, got {E}")

    r_k = np.partition(R, K - 1, axis=1)[:, K - 1]
    nu = np.full(V, n, dtype=np.int64)
    scale = np.zeros(V)
    iterations = np.zeros(V, dtype=np.int64)
    ok = np.isfinite(r_k) & (r_k > 0)
    active = ok.copy()

    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        q = ndtri(0.5 * (1.0 + K / nu[idx]))
        with np.errstate(divide="ignore"):
            s = r_k[idx] / q
        good = np.isfinite(s) & (s > 0)
        scale[idx] = np.where(good, s, 0.0)
        new_nu = np.count_nonzero(R[idx] <= (E * scale[idx])[:, None], axis=1)
        iterations[idx] += 1
        ok[idx[~good]] = False
        fell = good & (new_nu < K)
        ok[idx[fell]] = False
        converged = new_nu == nu[idx]
        nu[idx] = new_nu
        active[idx[~good | fell | converged]] = False

    ok &= nu >= K
    return scale, nu, iterations, ok


def ikose(residuals, K=DEFAULT_K, E=DEFAULT_E, max_iter=MAX_ITER):
    """Estimate the inlier scale of one hypothesis from its residuals.

    Raises
    ------
    DegenerateScale
        If the K-th smallest residual is zero or the inlier count drops
        below ``K``.
    """
    r = np.asarray(residuals, dtype=float).reshape(1, -1)
    scale, nu, it, ok = ikose_batch(r, K, E, max_iter)
    if not ok[0]:
        raise DegenerateScale(
            f"degenerate scale (K-th residual {np.partition(r[0], K - 1)[K - 1]:.3g}, "
            f"inlier count {nu[0]})"
        )
    return ScaleEstimate(float(scale[0]), int(nu[0]), int(it[0]))
