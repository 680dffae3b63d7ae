"""Synthetic data, dataset I/O, the misclassification metric and the
experiment runner used to reproduce the line-fitting benchmark."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import MSHError, ParseError
from .modeseek import MSHConfig, msh_fit

__all__ = [
    "SyntheticSpec",
    "LabeledDataset",
    "ExperimentSummary",
    "gen_lines",
    "gen_circles",
    "gen_homography_scene",
    "gen_fundamental_scene",
    "lines3d_spec",
    "star5_spec",
    "misclassification_error",
    "run_experiment",
    "load_dataset",
    "save_dataset",
    "load_labels",
    "save_labels",
]

LAYOUTS = ("random", "star", "intersecting")
LINES3D_SIDE = 200.0


@dataclass
class SyntheticSpec:
    """Description of a synthetic multi-structure dataset.

    ``inliers_per_structure`` is either one count shared by all structures
    or one count per structure.  ``box`` holds ``(low, high)`` bounds per
    axis; None means ``[0, 100]`` on every axis.
    """

    structure_count: int = 3
    inliers_per_structure: Union[int, Sequence[int]] = 100
    outlier_count: int = 400
    inlier_sigma: float = 1.0
    box: Optional[Sequence[Sequence[float]]] = None
    layout: str = "random"
    rng_seed: int = 0

    def __post_init__(self):
        if self.structure_count < 0 or self.outlier_count < 0:
            raise ValueError("counts must be nonnegative")
        if np.any(np.asarray(self.inliers_per_structure) < 0):
            raise ValueError("counts must be nonnegative")
        if not self.inlier_sigma > 0:
            raise ValueError("inlier_sigma must be positive")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}")
        counts = self.counts
        if len(counts) != self.structure_count:
            raise ValueError("need one inlier count per structure")

    @property
    def counts(self):
        c = self.inliers_per_structure
        if np.ndim(c) == 0:
            return [int(c)] * self.structure_count
        return [int(x) for x in c]

    def bounds(self, dim):
        if self.box is None:
            return np.zeros(dim), np.full(dim, 100.0)
        b = np.asarray(self.box, dtype=float)
        if b.shape != (dim, 2):
            raise ValueError(f"box must have shape ({dim}, 2)")
        return b[:, 0], b[:, 1]


@dataclass
class LabeledDataset:
    points: np.ndarray
    gt_labels: Optional[np.ndarray] = None
    provenance: str = ""
    structures: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.gt_labels is not None:
            self.gt_labels = np.asarray(self.gt_labels, dtype=np.int64)
            if len(self.gt_labels) != len(self.points):
                raise ValueError("labels and points differ in length")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def structure_count(self):
        if self.gt_labels is None:
            return None
        return int(np.unique(self.gt_labels[self.gt_labels > 0]).size)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _unit(v):
    return v / np.linalg.norm(v)


def _normal_basis(d):
    """Orthonormal basis of the complement of unit vector ``d``."""
    if len(d) == 2:
        return np.array([[-d[1], d[0]]])
    a = np.eye(3)[np.argmin(np.abs(d))]
    n1 = _unit(np.cross(d, a))
    return np.stack([n1, np.cross(d, n1)])


def _random_direction(rng, dim, existing, min_angle_deg):
    cos_max = math.cos(math.radians(min_angle_deg))
    for _ in range(10000):
        d = _unit(rng.normal(size=dim))
        if all(abs(d @ e) <= cos_max for e in existing):
            return d
    raise RuntimeError("could not place well-separated line directions")


def _segment_distance(a0, a1, b0, b1, samples=64):
    t = np.linspace(0.0, 1.0, samples)[:, None]
    A = a0 + t * (a1 - a0)
    B = b0 + t * (b1 - b0)
    return np.sqrt(((A[:, None] - B[None]) ** 2).sum(axis=2)).min()


def _line_segments(spec, dim, rng):
    lo, hi = spec.bounds(dim)
    side = float((hi - lo).min())
    center = (lo + hi) / 2
    segments = []
    if spec.layout == "random":
        sep = 10.0 * spec.inlier_sigma
        for _ in range(spec.structure_count):
            for _ in range(10000):
                p0 = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
                p1 = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
                if np.linalg.norm(p1 - p0) < 0.6 * side:
                    continue
                if all(_segment_distance(p0, p1, a, b) >= sep for a, b in segments):
                    break
            else:
                raise RuntimeError("could not place separated lines")
            segments.append((p0, p1))
        return segments

    if spec.layout == "star":
        groups = [(center, spec.structure_count)]
    else:
        # two concurrent groups with distinct intersection points
        first = math.ceil(spec.structure_count / 2)
        offset = np.zeros(dim)
        offset[0] = 0.18 * (hi - lo)[0]
        groups = [(center - offset, first),
                  (center + offset, spec.structure_count - first)]
    half = 0.45 * side
    directions = []
    for c, count in groups:
        for _ in range(count):
            d = _random_direction(rng, dim, directions, 20.0)
            directions.append(d)
            segments.append((c - half * d, c + half * d))
    return segments


def gen_lines(spec, dim=2, rng=None):
    """Lines in 2D or 3D with Gaussian noise normal to each line and uniform
    outliers in the box.

    Layouts: ``random`` places well-separated segments, ``star`` makes all
    lines concurrent at the box center, ``intersecting`` splits the lines
    into two concurrent groups (two intersection points).
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    rng = rng if rng is not None else np.random.default_rng(spec.rng_seed)
    lo, hi = spec.bounds(dim)
    segments = _line_segments(spec, dim, rng)
    pts, labels = [], []
    for k, ((p0, p1), count) in enumerate(zip(segments, spec.counts), start=1):
        d = _unit(p1 - p0)
        t = rng.uniform(0.0, 1.0, size=(count, 1))
        on = p0 + t * (p1 - p0)
        noise = rng.normal(scale=spec.inlier_sigma, size=(count, dim - 1))
        pts.append(on + noise @ _normal_basis(d))
        labels.append(np.full(count, k))
    pts.append(rng.uniform(lo, hi, size=(spec.outlier_count, dim)))
    labels.append(np.zeros(spec.outlier_count, dtype=np.int64))
    structures = [{"p0": a.tolist(), "p1": b.tolist()} for a, b in segments]
    return LabeledDataset(
        np.concatenate(pts), np.concatenate(labels).astype(np.int64),
        provenance=f"lines{dim}d:{spec.layout}:{spec.structure_count}:seed={spec.rng_seed}",
        structures=structures,
    )


def gen_circles(spec, rng=None, radius_range=(10.0, 30.0)):
    """Circles in 2D with radial Gaussian noise and uniform outliers.

    Centers are placed so that each circle fits in the box.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.rng_seed)
    lo, hi = spec.bounds(2)
    pts, labels, structures = [], [], []
    for k, count in enumerate(spec.counts, start=1):
        r = rng.uniform(*radius_range)
        c = rng.uniform(lo + r, hi - r)
        ang = rng.uniform(0.0, 2 * np.pi, size=count)
        rad = r + rng.normal(scale=spec.inlier_sigma, size=count)
        pts.append(c + rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)]))
        labels.append(np.full(count, k))
        structures.append({"center": c.tolist(), "radius": float(r)})
    pts.append(rng.uniform(lo, hi, size=(spec.outlier_count, 2)))
    labels.append(np.zeros(spec.outlier_count, dtype=np.int64))
    return LabeledDataset(
        np.concatenate(pts), np.concatenate(labels).astype(np.int64),
        provenance=f"circles:{spec.structure_count}:seed={spec.rng_seed}",
        structures=structures,
    )


def _camera(focal=500.0, width=640.0, height=480.0):
    return np.array([[focal, 0, width / 2], [0, focal, height / 2], [0, 0, 1.0]])


def _rotation(axis, angle):
    axis = _unit(np.asarray(axis, dtype=float))
    Kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * Kx + (1 - math.cos(angle)) * Kx @ Kx


def _project(K, R, t, Xw):
    x = (K @ (R @ Xw.T + t[:, None])).T
    return x[:, :2] / x[:, 2:]


def gen_homography_scene(inliers=(60, 50, 40), outlier_count=60, sigma=0.5,
                         rng_seed=0, size=(640.0, 480.0)):
    """Correspondences of several scene planes seen from two cameras.

    Each plane occupies one vertical band of the first image and induces
    its own homography under a shared camera motion.  Gaussian noise is
    added to the second-view coordinates; outliers are random pairs.
    """
    rng = np.random.default_rng(rng_seed)
    w, h = size
    K = _camera(width=w, height=h)
    Kinv = np.linalg.inv(K)
    R = _rotation(rng.normal(size=3), rng.uniform(0.05, 0.12))
    t = np.array([rng.uniform(0.4, 0.6), rng.uniform(-0.1, 0.1), rng.uniform(-0.05, 0.05)])
    planes = len(inliers)
    pts, labels, structures = [], [], []
    for k, count in enumerate(inliers, start=1):
        for _ in range(1000):
            normal = _unit(np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), -1.0]))
            depth = rng.uniform(4.0, 8.0)
            # plane n.X + depth = 0  =>  H = K (R - t n^T / depth) K^-1
            H = K @ (R - np.outer(t, normal) / -depth) @ Kinv
            u0, u1 = w * (k - 1) / planes + 10, w * k / planes - 10
            src = np.column_stack([rng.uniform(u0, u1, count), rng.uniform(10, h - 10, count)])
            dst = (H @ np.column_stack([src, np.ones(count)]).T).T
            if np.all(dst[:, 2] > 0):
                break
        dst = dst[:, :2] / dst[:, 2:] + rng.normal(scale=sigma, size=(count, 2))
        pts.append(np.hstack([src, dst]))
        labels.append(np.full(count, k))
        structures.append({"H": (H / np.linalg.norm(H)).tolist()})
    out = np.column_stack([
        rng.uniform(0, w, outlier_count), rng.uniform(0, h, outlier_count),
        rng.uniform(0, w, outlier_count), rng.uniform(0, h, outlier_count),
    ])
    pts.append(out)
    labels.append(np.zeros(outlier_count, dtype=np.int64))
    return LabeledDataset(
        np.concatenate(pts), np.concatenate(labels).astype(np.int64),
        provenance=f"homography:{planes}:seed={rng_seed}", structures=structures,
    )


def gen_fundamental_scene(inliers=(60, 60), outlier_count=40, sigma=0.3,
                          rng_seed=0, size=(640.0, 480.0)):
    """Correspondences of independently moving rigid objects (two-view
    motion segmentation).  Each object has its own relative motion, hence
    its own fundamental matrix."""
    rng = np.random.default_rng(rng_seed)
    w, h = size
    K = _camera(width=w, height=h)
    I = np.eye(3)
    pts, labels, structures = [], [], []
    for k, count in enumerate(inliers, start=1):
        R = _rotation(rng.normal(size=3), rng.uniform(0.05, 0.15))
        t = _unit(rng.normal(size=3)) * rng.uniform(0.5, 1.0)
        center = np.array([rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0), rng.uniform(5, 8)])
        Xw = center + rng.uniform(-1.0, 1.0, size=(count, 3))
        x1 = _project(K, I, np.zeros(3), Xw)
        x2 = _project(K, R, t, Xw) + rng.normal(scale=sigma, size=(count, 2))
        tx = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])
        Kinv = np.linalg.inv(K)
        F = Kinv.T @ tx @ R @ Kinv
        pts.append(np.hstack([x1, x2]))
        labels.append(np.full(count, k))
        structures.append({"F": (F / np.linalg.norm(F)).tolist()})
    out = np.column_stack([
        rng.uniform(0, w, outlier_count), rng.uniform(0, h, outlier_count),
        rng.uniform(0, w, outlier_count), rng.uniform(0, h, outlier_count),
    ])
    pts.append(out)
    labels.append(np.zeros(outlier_count, dtype=np.int64))
    return LabeledDataset(
        np.concatenate(pts), np.concatenate(labels).astype(np.int64),
        provenance=f"fundamental:{len(inliers)}:seed={rng_seed}", structures=structures,
    )


def lines3d_spec(n_lines, rng_seed=0, side=LINES3D_SIDE):
    """3D line benchmark: 100 inliers per line, 400 outliers, noise 1.0.

    Three lines are separated, four meet at one point, five and six lines
    form two concurrent groups.
    """
    layout = {3: "random", 4: "star"}.get(n_lines, "intersecting")
    box = [(0.0, side)] * 3
    return SyntheticSpec(n_lines, 100, 400, 1.0, box=box, layout=layout, rng_seed=rng_seed)


def star5_spec(rng_seed=0):
    """Five concurrent 2D lines with uniform outliers."""
    return SyntheticSpec(5, 50, 250, 1.0, layout="star", rng_seed=rng_seed)


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------


def misclassification_error(pred, gt):
    """Percentage of points mislabeled under the best one-to-one matching of
    predicted structures to ground-truth structures.

    Label 0 (outlier) only matches 0; unmatched structures count all their
    points as errors.
    """
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {gt.shape}")
    n = len(gt)
    if n == 0:
        return 0.0
    correct = np.count_nonzero((pred == 0) & (gt == 0))
    p_ids = np.unique(pred[pred > 0])
    g_ids = np.unique(gt[gt > 0])
    if len(p_ids) and len(g_ids):
        pi = np.searchsorted(p_ids, pred)
        gi = np.searchsorted(g_ids, gt)
        both = (pred > 0) & (gt > 0)
        overlap = np.zeros((len(p_ids), len(g_ids)), dtype=np.int64)
        np.add.at(overlap, (pi[both], gi[both]), 1)
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        correct += overlap[rows, cols].sum()
    return 100.0 * (n - correct) / n


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSummary:
    errors: list
    n_modes: list
    runtimes_ms: list
    failures: int
    failure_messages: list
    config: dict
    true_structures: Optional[int] = None

    @property
    def std(self):
        return float(np.std(self.errors)) if self.errors else float("nan")

    @property
    def avg(self):
        return float(np.mean(self.errors)) if self.errors else float("nan")

    @property
    def min(self):
        return float(np.min(self.errors)) if self.errors else float("nan")

    @property
    def mode_counts(self):
        values, counts = np.unique(self.n_modes, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    @property
    def correct_count_rate(self):
        """Fraction of all repeats (failures included) that recovered the
        true number of structures."""
        total = len(self.n_modes) + self.failures
        if self.true_structures is None or total == 0:
            return float("nan")
        return sum(m == self.true_structures for m in self.n_modes) / total

    def to_dict(self):
        return {
            "config": self.config,
            "errors": self.errors,
            "Std": self.std,
            "Avg": self.avg,
            "Min": self.min,
            "mode_counts": self.mode_counts,
            "n_modes": self.n_modes,
            "true_structures": self.true_structures,
            "correct_count_rate": self.correct_count_rate,
            "runtimes_ms": self.runtimes_ms,
            "failures": self.failures,
            "failure_messages": self.failure_messages,
        }


def _dataset_for(source, dim, seed):
    if isinstance(source, LabeledDataset):
        return source
    if callable(source):
        return source(seed)
    raise TypeError("source must be a LabeledDataset or a callable seed -> dataset")


def run_experiment(source, kind, config=None, repeats=20, seed=0, n_jobs=None):
    """Repeat `msh_fit` with independent seeds and summarize the errors.

    Parameters
    ----------
    source : LabeledDataset or callable
        A fixed dataset (only the fitting seed changes per repeat) or a
        function ``seed -> LabeledDataset`` that regenerates data per repeat.
    kind : ModelKind or str
    config : MSHConfig, optional
        Its ``seed`` is replaced by the per-repeat seed.
    repeats : int
    seed : int
        Master seed; per-repeat seeds are derived from it.
    n_jobs : int, optional
        Run repeats in a process pool; results do not depend on it.

    Fit errors are caught and counted as failures.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    config = config or MSHConfig()
    children = np.random.SeedSequence(seed).spawn(repeats)
    seeds = [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]
    tasks = [(source, kind, config, s) for s in seeds]
    if n_jobs is not None and n_jobs > 1:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=n_jobs)(delayed(_one_repeat)(*t) for t in tasks)
    else:
        outcomes = [_one_repeat(*t) for t in tasks]

    errors, modes, runtimes, messages = [], [], [], []
    true_k = None
    for out in outcomes:
        true_k = out.get("true_k", true_k)
        if "error" in out:
            messages.append(out["error"])
            continue
        errors.append(out["err"])
        modes.append(out["n_modes"])
        runtimes.append(out["ms"])
    cfg = dict(vars(config))
    cfg.update(model=str(getattr(kind, "value", kind)), repeats=repeats, master_seed=seed)
    return ExperimentSummary(errors, modes, runtimes, len(messages), messages, cfg, true_k)


def _one_repeat(source, kind, config, seed):
    data = _dataset_for(source, None, seed)
    out = {"true_k": data.structure_count}
    cfg = MSHConfig(**{**vars(config), "seed": seed})
    try:
        res = msh_fit(data.points, kind, cfg)
    except MSHError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
        return out
    out["n_modes"] = res.n_modes
    out["ms"] = 1000.0 * res.timing["total_s"]
    out["err"] = (misclassification_error(res.labels, data.gt_labels)
                  if data.gt_labels is not None else float("nan"))
    return out


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

_COLUMN_SETS = {
    ("x", "y"): 2,
    ("x", "y", "z"): 3,
    ("x1", "y1", "x2", "y2"): 4,
}


def load_dataset(path):
    """Read a dataset CSV.

    The header names the coordinate columns (``x,y``, ``x,y,z`` or
    ``x1,y1,x2,y2``), optionally followed by an integer ``label`` column.

    Raises
    ------
    ParseError
        On an unknown header, a ragged row or a non-numeric value; the
        message carries the 1-based line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        has_label = bool(header) and header[-1] == "label"
        coords = tuple(header[:-1] if has_label else header)
        if coords not in _COLUMN_SETS:
            raise ParseError(f"unrecognized header {','.join(header)!r}", line=1)
        width = len(header)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", line=lineno)
            try:
                vals = [float(c) for c in row[: len(coords)]]
                if has_label:
                    labels.append(int(row[-1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite coordinate", line=lineno)
            rows.append(vals)
    points = np.array(rows, dtype=float).reshape(-1, len(coords))
    gt = np.array(labels, dtype=np.int64) if has_label else None
    return LabeledDataset(points, gt, provenance=str(path))


def save_dataset(dataset, path):
    dim = dataset.points.shape[1]
    names = {2: ["x", "y"], 3: ["x", "y", "z"], 4: ["x1", "y1", "x2", "y2"]}[dim]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + (["label"] if dataset.gt_labels is not None else []))
        for i, p in enumerate(dataset.points):
            row = [repr(float(v)) for v in p]
            if dataset.gt_labels is not None:
                row.append(str(int(dataset.gt_labels[i])))
            writer.writerow(row)


def load_labels(path):
    """Read labels from a one-column ``label`` CSV or from the trailing
    ``label`` column of a dataset CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if "label" not in header:
            raise ParseError("no 'label' column", line=1)
        col = header.index("label")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                out.append(int(row[col]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
    return np.array(out, dtype=np.int64)


def save_labels(labels, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in labels)


def summary_csv_rows(summaries):
    """Rows mirroring the benchmark table: one row per dataset."""
    rows = [["dataset", "Std", "Avg", "Min", "correct_count_rate", "failures", "mean_runtime_ms"]]
    for name, s in summaries.items():
        rows.append([
            name, f"{s.std:.2f}", f"{s.avg:.2f}", f"{s.min:.2f}",
            f"{s.correct_count_rate:.2f}", s.failures,
            f"{np.mean(s.runtimes_ms):.1f}" if s.runtimes_ms else "nan",
        ])
    return rows


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True)
