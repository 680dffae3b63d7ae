"""Mode seeking on the hypothesis hypergraph.

Pipeline (`msh_fit`):

1. generate hypotheses and build the weighted hypergraph;
2. subsample vertices with probability proportional to their weights;
3. for every sampled vertex, compute the minimum Tanimoto distance (MTD) to
   any sampled vertex ranked above it by weight;
4. sort the MTDs and cut at the largest drop; the vertices above the cut
   are the modes;
5. label every point with the mode that accepts it with the smallest
   scale-normalized residual.
"""

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import AllZeroWeights, TooFewVertices, ZeroVector
from .geometry import ModelKind, ModelParams, fit_least_squares, residuals_batch
from .hypergraph import build_hypergraph
from .hypotheses import SamplerConfig, generate_hypothesis_array
from .scale import DEFAULT_E

__all__ = [
    "MSHConfig",
    "ModeSet",
    "FittingResult",
    "DEFAULT_HYPOTHESES",
    "default_k",
    "preference_vector",
    "tanimoto",
    "weight_aware_sample",
    "minimum_t_distances",
    "select_modes",
    "label_points",
    "msh_fit",
]

DEFAULT_HYPOTHESES = {
    ModelKind.LINE2D: 5000,
    ModelKind.CIRCLE2D: 5000,
    ModelKind.LINE3D: 5000,
    ModelKind.HOMOGRAPHY: 10000,
    ModelKind.FUNDAMENTAL: 20000,
}
DEFAULT_K_FRACTION = 0.10
DEFAULT_WAS_FRACTION = 0.15
DEFAULT_DROP_WINDOW = 100
_MTD_BLOCK = 1024


@dataclass
class MSHConfig:
    """Run configuration for `msh_fit`.

    ``hypotheses=None`` picks the per-model default (5000 for lines and
    circles, 10000 for homographies, 20000 for fundamental matrices).
    ``k=None`` sets the IKOSE order to 10% of the number of points.
    """

    hypotheses: Optional[int] = None
    k: Optional[int] = None
    e_threshold: float = DEFAULT_E
    was_fraction: float = DEFAULT_WAS_FRACTION
    drop_window: int = DEFAULT_DROP_WINDOW
    proximity_sigma: Optional[float] = None
    seed: int = 0
    refine: bool = False
    use_was: bool = True
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.hypotheses is not None and self.hypotheses < 1:
            raise ValueError("hypotheses must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.e_threshold > 0:
            raise ValueError("e_threshold must be positive")
        if not 0 < self.was_fraction <= 1:
            raise ValueError("was_fraction must be in (0, 1]")
        if self.drop_window < 1:
            raise ValueError("drop_window must be >= 1")

    def hypothesis_count(self, kind):
        return self.hypotheses or DEFAULT_HYPOTHESES[ModelKind.parse(kind)]

    def k_for(self, n, kind):
        """IKOSE order for ``n`` points."""
        if self.k is not None:
            return min(self.k, n)
        return default_k(n, kind)


def default_k(n, kind):
    """10% of the points, but never below the minimal subset size."""
    kind = ModelKind.parse(kind)
    return min(n, max(kind.minimal_size, round(DEFAULT_K_FRACTION * n)))


@dataclass
class ModeSet:
    """Sorted MTD trace and the modes above the largest drop.

    ``trace_*`` arrays are sorted by MTD (descending), ties broken by weight
    (descending) then vertex index.  The first ``cut_index`` entries are the
    modes.
    """

    trace_vertices: np.ndarray
    trace_etas: np.ndarray
    trace_weights: np.ndarray
    cut_index: int

    @property
    def vertices(self):
        return self.trace_vertices[: self.cut_index]

    @property
    def etas(self):
        return self.trace_etas[: self.cut_index]

    @property
    def weights(self):
        return self.trace_weights[: self.cut_index]

    @property
    def n_modes(self):
        return self.cut_index

    def to_dict(self):
        return {
            "cut_index": int(self.cut_index),
            "vertices": self.trace_vertices.tolist(),
            "eta": self.trace_etas.tolist(),
            "weight": self.trace_weights.tolist(),
        }


@dataclass
class FittingResult:
    """Output of `msh_fit`.

    ``labels[i] == 0`` marks an outlier, ``labels[i] == k`` assigns point
    ``i`` to ``modes[k - 1]``.
    """

    modes: list
    mode_scales: np.ndarray
    mode_vertices: np.ndarray
    labels: np.ndarray
    mode_set: ModeSet
    refined: bool
    config: dict
    seed: int
    timing: dict = field(default_factory=dict)
    n_vertices: int = 0
    n_sampled: int = 0
    graph: object = field(default=None, repr=False, compare=False)

    @property
    def n_modes(self):
        return len(self.modes)

    def to_dict(self, include_trace=False):
        out = {
            "n_modes": self.n_modes,
            "modes": [
                {**m.to_dict(), "scale": float(s), "vertex": int(v),
                 "eta": float(e), "weight": float(w), "refined": self.refined}
                for m, s, v, e, w in zip(
                    self.modes, self.mode_scales, self.mode_vertices,
                    self.mode_set.etas, self.mode_set.weights,
                )
            ],
            "labels": self.labels.tolist(),
            "config": self.config,
            "seed": self.seed,
            "timing": self.timing,
            "n_vertices": self.n_vertices,
            "n_sampled": self.n_sampled,
        }
        if include_trace:
            out["mtd_trace"] = self.mode_set.to_dict()
        return out


def preference_vector(graph, v):
    """Dense preference vector of vertex ``v``: ``exp(-r/s)`` on its inliers,
    zero elsewhere."""
    idx, res = graph.incident(v)
    out = np.zeros(graph.n_edges)
    out[idx] = np.exp(-res / graph.scales[v])
    return out


def tanimoto(p, q):
    """Tanimoto distance ``1 - <p,q> / (|p|^2 + |q|^2 - <p,q>)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    pp, qq = float(p @ p), float(q @ q)
    if pp == 0 or qq == 0:
        raise ZeroVector("Tanimoto distance is undefined for a zero vector")
    pq = float(p @ q)
    return 1.0 - pq / (pp + qq - pq)


def weight_aware_sample(weights, M, rng):
    """Sample ``M`` distinct vertices, each draw proportional to the weights
    of the vertices not yet drawn.

    ``weights`` may be a `Hypergraph` or a weight array.  Once every
    positive-weight vertex is drawn, the remaining draws are uniform over
    the zero-weight vertices.
    """
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    V = len(w)
    if not 1 <= M <= V:
        raise ValueError(f"M must be in [1, {V}], got {M}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not w.sum() > 0:
        raise AllZeroWeights("cannot sample from all-zero weights")
    u = rng.random(V)
    with np.errstate(divide="ignore"):
        keys = np.log(w) - np.log(-np.log(u))
    positive = np.flatnonzero(w > 0)
    order = positive[np.argsort(-keys[positive], kind="stable")]
    if M > len(order):
        zero = np.flatnonzero(w == 0)
        order = np.concatenate([order, zero[np.argsort(u[zero], kind="stable")]])
    return order[:M]


def _rank(weights, vertices):
    """Rank 0 = highest weight; equal weights are ordered by vertex index."""
    order = np.lexsort((vertices, -weights))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return rank


def minimum_t_distances(graph, sampled):
    """Minimum T-distance of every sampled vertex.

    For a vertex ``v`` the minimum is taken over the sampled vertices ranked
    above it (higher weight, or equal weight and lower index).  The top
    ranked vertex gets the maximum T-distance to the other sampled vertices
    instead (0 when it is the only one).

    Returns
    -------
    eta : ndarray of shape (len(sampled),), aligned with ``sampled``.
    """
    sampled = np.asarray(sampled, dtype=np.int64)
    M = len(sampled)
    if M == 0:
        raise ValueError("no sampled vertices")
    P = graph.preference_matrix(rows=sampled).toarray()
    sq = np.einsum("ij,ij->i", P, P)
    if np.any(sq == 0):
        raise ZeroVector("a sampled vertex has an all-zero preference vector")
    rank = _rank(graph.weights[sampled], sampled)
    eta = np.empty(M)
    for start in range(0, M, _MTD_BLOCK):
        stop = min(start + _MTD_BLOCK, M)
        G = P[start:stop] @ P.T
        T = 1.0 - G / (sq[start:stop, None] + sq[None, :] - G)
        higher = rank[None, :] < rank[start:stop, None]
        eta[start:stop] = np.where(higher, T, np.inf).min(axis=1)
        top = np.flatnonzero(rank[start:stop] == 0)
        for i in top:
            row = np.delete(T[i], start + i)
            eta[start + i] = row.max() if row.size else 0.0
    return eta


def select_modes(vertices, etas, weights, drop_window=DEFAULT_DROP_WINDOW):
    """Sort the MTD trace and cut it at the largest drop.

    The drop is searched among the first ``min(M - 1, drop_window)``
    consecutive pairs of the sorted trace.
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    etas = np.asarray(etas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    M = len(vertices)
    if M < 2:
        raise TooFewVertices(f"mode selection needs at least 2 vertices, got {M}")
    order = np.lexsort((vertices, -weights, -etas))
    e = etas[order]
    window = min(M - 1, drop_window)
    drops = e[:window] - e[1:window + 1]
    cut = int(np.argmax(drops)) + 1
    return ModeSet(vertices[order], e, weights[order], cut)


def label_points(graph, mode_vertices):
    """Assign each hyperedge to the accepting mode with the smallest
    normalized residual ``r / s``; 0 when no mode accepts it.

    Ties go to the earlier mode in ``mode_vertices``.
    """
    n = graph.n_edges
    best = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int64)
    for k, v in enumerate(mode_vertices, start=1):
        idx, res = graph.incident(v)
        z = res / graph.scales[v]
        better = z < best[idx]
        best[idx[better]] = z[better]
        labels[idx[better]] = k
    return labels


def _gate_labels(kind, thetas, scales, X, E):
    R = residuals_batch(kind, thetas, X) / scales[:, None]
    R[R > E] = np.inf
    labels = np.argmin(R, axis=0) + 1
    labels[~np.isfinite(R.min(axis=0))] = 0
    return labels


def msh_fit(points, kind, config=None):
    """Fit every model instance in ``points`` by mode seeking on hypergraphs.

    Parameters
    ----------
    points : array-like of shape (n, kind.dim)
    kind : ModelKind or str
    config : MSHConfig, optional

    Returns
    -------
    FittingResult

    Raises
    ------
    EmptyHypergraph, AllZeroWeights, TooFewVertices
    """
    kind = ModelKind.parse(kind)
    config = config or MSHConfig()
    X = np.asarray(points, dtype=float)
    timing = {}

    t0 = time.perf_counter()
    sampler = SamplerConfig(
        hypothesis_count=config.hypothesis_count(kind),
        proximity_sigma=config.proximity_sigma,
        rng_seed=config.seed,
    )
    thetas, _ = generate_hypothesis_array(X, kind, sampler, n_jobs=config.n_jobs)
    t1 = time.perf_counter()
    timing["hypotheses_s"] = t1 - t0

    k = config.k_for(len(X), kind)
    graph = build_hypergraph(X, thetas, k, config.e_threshold, kind=kind,
                             n_jobs=config.n_jobs)
    t2 = time.perf_counter()
    timing["hypergraph_s"] = t2 - t1

    V = len(graph)
    if config.use_was:
        M = min(V, max(2, math.ceil(config.was_fraction * V)))
        rng = np.random.default_rng([config.seed, 1])
        sampled = weight_aware_sample(graph.weights, M, rng)
    else:
        sampled = np.arange(V)
    t3 = time.perf_counter()
    timing["sampling_s"] = t3 - t2

    if len(sampled) < 2:
        raise TooFewVertices(f"only {len(sampled)} vertex survived construction")
    etas = minimum_t_distances(graph, sampled)
    t4 = time.perf_counter()
    timing["mtd_s"] = t4 - t3

    mode_set = select_modes(sampled, etas, graph.weights[sampled], config.drop_window)
    mode_vertices = mode_set.vertices
    labels = label_points(graph, mode_vertices)
    mode_thetas = graph.thetas[mode_vertices]
    mode_scales = graph.scales[mode_vertices].copy()

    if config.refine:
        refit = mode_thetas.copy()
        for j in range(len(mode_vertices)):
            members = X[labels == j + 1]
            try:
                refit[j] = fit_least_squares(kind, members).theta
            except Exception:
                pass  # too few or degenerate inliers: keep the raw hypothesis
        mode_thetas = refit
        labels = _gate_labels(kind, mode_thetas, mode_scales, X, config.e_threshold)
    timing["select_label_s"] = time.perf_counter() - t4
    timing["total_s"] = time.perf_counter() - t0

    cfg = asdict(config)
    cfg["model"] = kind.value
    cfg["hypotheses"] = config.hypothesis_count(kind)
    cfg["k"] = k
    return FittingResult(
        modes=[ModelParams(kind, t) for t in mode_thetas],
        mode_scales=mode_scales,
        mode_vertices=np.asarray(mode_vertices),
        labels=labels,
        mode_set=mode_set,
        refined=config.refine,
        config=cfg,
        seed=config.seed,
        timing=timing,
        n_vertices=V,
        n_sampled=len(sampled),
        graph=graph,
    )
