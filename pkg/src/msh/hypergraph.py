"""Hypergraph construction and vertex weighting.

Vertices are model hypotheses and hyperedges are data points.  A vertex is
incident to a hyperedge when the point is an inlier of the hypothesis,
i.e. its residual is within ``E`` inlier scales.  Only incident residuals
are stored.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .exceptions import EmptyHypergraph
from .geometry import ModelKind, ModelParams, residuals_batch
from .scale import DEFAULT_E, DEFAULT_K, ikose_batch

__all__ = [
    "Vertex",
    "Hypergraph",
    "epanechnikov",
    "bandwidth",
    "vertex_weight",
    "density_weight",
    "build_hypergraph",
]

# Epanechnikov kernel constants: roughness R and second moment mu2
_KERNEL_ROUGHNESS = 3.0 / 5.0
_KERNEL_MU2 = 1.0 / 5.0
_BUILD_CHUNK = 1024


def epanechnikov(x):
    """Epanechnikov kernel ``0.75 * (1 - x**2)`` on ``[-1, 1]``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)
    return float(out) if out.ndim == 0 else out


def bandwidth(scale, n):
    """Plug-in kernel bandwidth for ``n`` samples at noise level ``scale``."""
    factor = (243.0 * _KERNEL_ROUGHNESS / (35.0 * _KERNEL_MU2**2 * n)) ** 0.2
    return factor * np.asarray(scale, dtype=float) if np.ndim(scale) else factor * float(scale)


def vertex_weight(incident_residuals, scale, bw):
    """Weighting score from the residuals of the incident hyperedges only.

    The kernel-density value is averaged over the vertex degree (the number
    of incident residuals) rather than over all data points.
    """
    r = np.asarray(incident_residuals, dtype=float)
    if r.size == 0:
        raise ValueError("a vertex needs at least one incident hyperedge")
    return float(epanechnikov(r / bw).sum() / (scale * bw) / r.size)


def density_weight(all_residuals, scale, bw):
    """Kernel-density score averaged over every data point (no incidence
    gating).  Kept for comparison with `vertex_weight`."""
    r = np.asarray(all_residuals, dtype=float)
    return float(epanechnikov(r / bw).sum() / (scale * bw) / r.size)


@dataclass(frozen=True)
class Vertex:
    params: ModelParams
    scale: float
    degree: int
    bandwidth: float
    weight: float


class Hypergraph:
    """Immutable vertex/hyperedge incidence structure.

    Attributes
    ----------
    kind : ModelKind
    thetas : ndarray of shape (V, n_params)
    scales, bandwidths, weights : ndarray of shape (V,)
    degrees : ndarray of int, shape (V,)
    source_index : ndarray of int, shape (V,)
        Position of each vertex in the hypothesis list it was built from.
    n_edges : int
        Number of hyperedges (data points).
    E : float
        Inlier threshold used for the incidence.
    """

    def __init__(self, kind, thetas, scales, bandwidths, weights, indptr,
                 indices, residuals, n_edges, source_index, E):
        self.kind = kind
        self.thetas = thetas
        self.scales = scales
        self.bandwidths = bandwidths
        self.weights = weights
        self.degrees = np.diff(indptr)
        self.source_index = source_index
        self.n_edges = int(n_edges)
        self.E = float(E)
        self._indptr = indptr
        self._indices = indices
        self._residuals = residuals
        for arr in (thetas, scales, bandwidths, weights, self.degrees,
                    source_index, indptr, indices, residuals):
            arr.flags.writeable = False

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return (f"Hypergraph({self.kind.value}, vertices={len(self)}, "
                f"edges={self.n_edges}, incidences={len(self._indices)})")

    @property
    def n_vertices(self):
        return len(self)

    def vertex(self, v):
        return Vertex(
            ModelParams(self.kind, self.thetas[v]),
            float(self.scales[v]),
            int(self.degrees[v]),
            float(self.bandwidths[v]),
            float(self.weights[v]),
        )

    @property
    def vertices(self):
        return [self.vertex(v) for v in range(len(self))]

    def incident(self, v):
        """Hyperedge indices incident to vertex ``v`` and their residuals."""
        lo, hi = self._indptr[v], self._indptr[v + 1]
        return self._indices[lo:hi], self._residuals[lo:hi]

    @property
    def incidence(self):
        """Sparse boolean incidence matrix of shape (V, n_edges)."""
        data = np.ones(len(self._indices), dtype=bool)
        return sparse.csr_matrix(
            (data, self._indices, self._indptr), shape=(len(self), self.n_edges)
        )

    def residual_matrix(self, rows=None):
        """Sparse matrix of incident residuals; structure equals the incidence
        (zero residuals are kept as explicit entries)."""
        return self._sparse(self._residuals, rows)

    def preference_matrix(self, rows=None):
        """Sparse matrix whose row ``v`` is ``exp(-r/s(v))`` on the incident
        hyperedges and zero elsewhere."""
        if rows is None:
            owner = np.repeat(np.arange(len(self)), self.degrees)
            data = np.exp(-self._residuals / self.scales[owner])
            return self._sparse(data, None)
        rows = np.asarray(rows, dtype=np.int64)
        deg = self.degrees[rows]
        indptr = np.concatenate([[0], np.cumsum(deg)])
        # positions of the selected rows' entries in the flat arrays
        pos = np.repeat(self._indptr[rows] - indptr[:-1], deg) + np.arange(indptr[-1])
        data = np.exp(-self._residuals[pos] / np.repeat(self.scales[rows], deg))
        return sparse.csr_matrix(
            (data, self._indices[pos], indptr), shape=(len(rows), self.n_edges)
        )

    def _sparse(self, data, rows):
        m = sparse.csr_matrix(
            (data, self._indices, self._indptr), shape=(len(self), self.n_edges)
        )
        return m if rows is None else m[np.asarray(rows)]

    def to_dict(self):
        """JSON-serializable dump of vertices and incidence lists."""
        verts = []
        for v in range(len(self)):
            idx, _ = self.incident(v)
            verts.append({
                "source_index": int(self.source_index[v]),
                "theta": self.thetas[v].tolist(),
                "scale": float(self.scales[v]),
                "degree": int(self.degrees[v]),
                "bandwidth": float(self.bandwidths[v]),
                "weight": float(self.weights[v]),
                "inliers": idx.tolist(),
            })
        return {
            "kind": self.kind.value,
            "n_edges": self.n_edges,
            "E": self.E,
            "vertices": verts,
        }


def _build_chunk(X, kind, thetas, K, E):
    n = len(X)
    R = residuals_batch(kind, thetas, X)
    scale, nu, _, ok = ikose_batch(R, K, E)
    mask = R <= (E * scale)[:, None]
    degree = mask.sum(axis=1)
    ok &= degree >= kind.minimal_size
    keep = np.flatnonzero(ok)
    scale, degree = scale[keep], degree[keep]
    bw = bandwidth(scale, n)
    rows, cols = np.nonzero(mask[keep])
    res = R[keep[rows], cols]
    kern = epanechnikov(res / bw[rows])
    ksum = np.bincount(rows, weights=kern, minlength=len(keep))
    weight = ksum / (scale * bw) / degree
    return keep, scale, bw, weight, degree, cols, res


def build_hypergraph(points, hypotheses, K=DEFAULT_K, E=DEFAULT_E, kind=None, n_jobs=None):
    """Build the weighted hypergraph for a hypothesis pool.

    Parameters
    ----------
    points : array-like of shape (n, dim)
    hypotheses : list of ModelParams, or ndarray of shape (V, n_params)
        When an array is given, ``kind`` is required.
    K, E : IKOSE order and inlier threshold.
    n_jobs : int, optional
        Worker threads for the per-hypothesis map; the result does not
        depend on it.

    Hypotheses with a degenerate scale or fewer incident points than the
    minimal subset size are dropped.

    Raises
    ------
    EmptyHypergraph
        If every hypothesis is dropped.
    """
    X = np.asarray(points, dtype=float)
    if isinstance(hypotheses, np.ndarray):
        if kind is None:
            raise ValueError("kind is required when hypotheses is an array")
        kind = ModelKind.parse(kind)
        thetas = np.atleast_2d(hypotheses).astype(float)
    else:
        hypotheses = list(hypotheses)
        if not hypotheses:
            raise EmptyHypergraph("no hypotheses given")
        kind = hypotheses[0].kind
        thetas = np.stack([h.theta for h in hypotheses])
    if len(thetas) == 0:
        raise EmptyHypergraph("no hypotheses given")
    if len(X) < kind.minimal_size:
        raise ValueError(f"{kind.value} needs at least {kind.minimal_size} points")
    K = min(K, len(X))

    starts = range(0, len(thetas), _BUILD_CHUNK)
    jobs = [(X, kind, thetas[s:s + _BUILD_CHUNK], K, E) for s in starts]
    if n_jobs is not None and n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda a: _build_chunk(*a), jobs))
    else:
        parts = [_build_chunk(*a) for a in jobs]

    keep = np.concatenate([p[0] + s for p, s in zip(parts, starts)])
    if len(keep) == 0:
        raise EmptyHypergraph("every hypothesis was rejected by the scale estimator")
    degrees = np.concatenate([p[4] for p in parts])
    indptr = np.concatenate([[0], np.cumsum(degrees)]).astype(np.int64)
    return Hypergraph(
        kind=kind,
        thetas=thetas[keep].copy(),
        scales=np.concatenate([p[1] for p in parts]),
        bandwidths=np.concatenate([p[2] for p in parts]),
        weights=np.concatenate([p[3] for p in parts]),
        indptr=indptr,
        indices=np.concatenate([p[5] for p in parts]).astype(np.int64),
        residuals=np.concatenate([p[6] for p in parts]),
        n_edges=len(X),
        source_index=keep.astype(np.int64),
        E=E,
    )
