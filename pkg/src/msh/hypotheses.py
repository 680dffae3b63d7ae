"""Minimal-subset sampling and the raw hypothesis pool."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import GenerationExhausted, InsufficientPoints
from .geometry import ModelKind, ModelParams, fit_minimal_batch

__all__ = [
    "SamplerConfig",
    "default_proximity_sigma",
    "proximity_sample",
    "proximity_sample_batch",
    "generate_hypotheses",
    "generate_hypothesis_array",
]

# hypotheses per independently seeded partition; fixed so that results do
# not depend on the number of workers
PARTITION_SIZE = 1024


@dataclass
class SamplerConfig:
    """Settings for hypothesis generation.

    ``proximity_sigma=None`` selects 0.1 times the diagonal of the data
    bounding box.
    """

    hypothesis_count: int = 5000
    proximity_sigma: Optional[float] = None
    rng_seed: int = 0
    max_resample_attempts: int = 100

    def __post_init__(self):
        if self.hypothesis_count < 1:
            raise ValueError("hypothesis_count must be >= 1")
        if self.proximity_sigma is not None and not self.proximity_sigma > 0:
            raise ValueError("proximity_sigma must be positive")
        if self.max_resample_attempts < 1:
            raise ValueError("max_resample_attempts must be >= 1")


def default_proximity_sigma(points):
    X = np.asarray(points, dtype=float)
    diag = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    return 0.1 * diag if diag > 0 else 1.0


def _gumbel_top_k(logits, k, rng):
    """Indices of ``k`` draws without replacement, each successive draw
    proportional to ``exp(logits)`` among the remaining entries."""
    keys = logits - np.log(-np.log(rng.random(logits.shape)))
    part = np.argpartition(-keys, k - 1, axis=-1)[..., :k] if k < logits.shape[-1] else None
    if part is None:
        part = np.broadcast_to(np.arange(logits.shape[-1]), logits.shape).copy()
    order = np.argsort(-np.take_along_axis(keys, part, axis=-1), axis=-1, kind="stable")
    return np.take_along_axis(part, order, axis=-1)


def proximity_sample_batch(points, m, sigma, rng, size):
    """Draw ``size`` proximity-sampled subsets of ``m`` indices.

    The first index of each subset is uniform; the remaining ``m - 1`` are
    drawn without replacement with probability proportional to
    ``exp(-d**2 / sigma**2)``, ``d`` being the distance to the first point.
    """
    X = np.asarray(points, dtype=float)
    n = len(X)
    if m > n:
        raise InsufficientPoints(f"cannot draw {m} distinct points from {n}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    first = rng.integers(0, n, size=size)
    out = np.empty((size, m), dtype=np.int64)
    out[:, 0] = first
    if m == 1:
        return out
    sq = (X**2).sum(axis=1)
    d2 = np.maximum(sq[first][:, None] + sq[None, :] - 2.0 * X[first] @ X.T, 0.0)
    logits = -d2 / sigma**2
    logits[np.arange(size), first] = -np.inf
    out[:, 1:] = _gumbel_top_k(logits, m - 1, rng)
    return out


def proximity_sample(points, m, sigma, rng):
    """Draw one proximity-sampled minimal subset; returns ``m`` distinct indices."""
    return proximity_sample_batch(points, m, sigma, rng, 1)[0]


def _generate_partition(X, kind, count, sigma, seed, part, max_attempts):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(part,)))
    m = kind.minimal_size
    thetas = np.empty((count, kind.n_params))
    subsets = np.empty((count, m), dtype=np.int64)
    pending = np.arange(count)
    attempts = np.zeros(count, dtype=np.int64)
    while len(pending):
        idx = proximity_sample_batch(X, m, sigma, rng, len(pending))
        th, ok = fit_minimal_batch(kind, X[idx])
        done = pending[ok]
        thetas[done] = th[ok]
        subsets[done] = idx[ok]
        pending = pending[~ok]
        attempts[pending] += 1
        if len(pending) and attempts[pending].max() >= max_attempts:
            raise GenerationExhausted(
                f"{max_attempts} consecutive degenerate draws for {kind.value}"
            )
    return thetas, subsets


def generate_hypothesis_array(points, kind, config, n_jobs=None):
    """Generate ``config.hypothesis_count`` non-degenerate hypotheses.

    Returns
    -------
    thetas : ndarray of shape (hypothesis_count, kind.n_params)
    subsets : ndarray of shape (hypothesis_count, kind.minimal_size)
        Indices of the minimal subset behind each hypothesis.
    """
    kind = ModelKind.parse(kind)
    X = np.asarray(points, dtype=float)
    if len(X) < kind.minimal_size:
        raise InsufficientPoints(
            f"{kind.value} needs at least {kind.minimal_size} points, got {len(X)}"
        )
    sigma = config.proximity_sigma or default_proximity_sigma(X)
    count = config.hypothesis_count
    sizes = [min(PARTITION_SIZE, count - s) for s in range(0, count, PARTITION_SIZE)]
    jobs = [
        (X, kind, size, sigma, config.rng_seed, part, config.max_resample_attempts)
        for part, size in enumerate(sizes)
    ]
    if n_jobs is not None and n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda a: _generate_partition(*a), jobs))
    else:
        results = [_generate_partition(*a) for a in jobs]
    thetas = np.concatenate([r[0] for r in results])
    subsets = np.concatenate([r[1] for r in results])
    return thetas, subsets


def generate_hypotheses(points, kind, config, n_jobs=None):
    """Generate the hypothesis pool as a list of `ModelParams`."""
    kind = ModelKind.parse(kind)
    thetas, _ = generate_hypothesis_array(points, kind, config, n_jobs=n_jobs)
    return [ModelParams(kind, t) for t in thetas]
