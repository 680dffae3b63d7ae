"""Command-line interface: ``msh generate | fit | eval | bench``."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bench
from .exceptions import DimensionMismatch, MSHError
from .geometry import ModelKind
from .modeseek import (
    DEFAULT_DROP_WINDOW,
    DEFAULT_HYPOTHESES,
    DEFAULT_WAS_FRACTION,
    MSHConfig,
    msh_fit,
)
from .plot import write_svg
from .scale import DEFAULT_E

MODELS = [k.value for k in ModelKind]


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MSH_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"error: MSH_THREADS must be an integer, got {env!r}")
    return None


def _add_run_flags(p):
    g = p.add_argument_group("fitting parameters")
    g.add_argument("--hypotheses", type=int, default=None,
                   help="hypothesis pool size (default: %d for lines and circles, "
                        "%d for homography, %d for fundamental)" % (
                            DEFAULT_HYPOTHESES[ModelKind.LINE2D],
                            DEFAULT_HYPOTHESES[ModelKind.HOMOGRAPHY],
                            DEFAULT_HYPOTHESES[ModelKind.FUNDAMENTAL]))
    g.add_argument("--k-ikose", type=int, default=None,
                   help="order statistic of the scale estimator "
                        "(default: 10%% of the number of points)")
    g.add_argument("--e-threshold", type=float, default=DEFAULT_E,
                   help="inlier threshold in estimated scales; 2.5 keeps about "
                        "98%% of Gaussian inliers (default: %(default)s)")
    g.add_argument("--was-fraction", type=float, default=DEFAULT_WAS_FRACTION,
                   help="fraction of vertices kept by weight-aware sampling, "
                        "usually 0.1 to 0.2 (default: %(default)s)")
    g.add_argument("--no-was", action="store_true",
                   help="run mode seeking on every vertex")
    g.add_argument("--drop-window", type=int, default=DEFAULT_DROP_WINDOW,
                   help="leading MTD positions searched for the largest drop "
                        "(default: %(default)s)")
    g.add_argument("--proximity-sigma", type=float, default=None,
                   help="proximity sampling bandwidth in data units "
                        "(default: 0.1 x bounding-box diagonal)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    g.add_argument("--refine", action="store_true",
                   help="refit each mode to its inliers by least squares")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $MSH_THREADS, else 1)")


def _config(args, seed=None):
    return MSHConfig(
        hypotheses=args.hypotheses,
        k=args.k_ikose,
        e_threshold=args.e_threshold,
        was_fraction=args.was_fraction,
        drop_window=args.drop_window,
        proximity_sigma=args.proximity_sigma,
        seed=args.seed if seed is None else seed,
        refine=args.refine,
        use_was=not args.no_was,
        n_jobs=_threads(args),
    )


def _write_json(obj, path):
    text = bench.dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args):
    if args.type == "lines":
        spec = bench.SyntheticSpec(
            structure_count=args.structures,
            inliers_per_structure=args.inliers,
            outlier_count=args.outliers,
            inlier_sigma=args.sigma,
            box=[(0.0, args.box)] * args.dim,
            layout=args.layout,
            rng_seed=args.seed,
        )
        data = bench.gen_lines(spec, dim=args.dim)
    elif args.type == "circles":
        spec = bench.SyntheticSpec(
            structure_count=args.structures,
            inliers_per_structure=args.inliers,
            outlier_count=args.outliers,
            inlier_sigma=args.sigma,
            box=[(0.0, args.box)] * 2,
            rng_seed=args.seed,
        )
        data = bench.gen_circles(spec)
    elif args.type == "lines3d":
        data = bench.gen_lines(bench.lines3d_spec(args.structures, rng_seed=args.seed), dim=3)
    elif args.type == "star5":
        data = bench.gen_lines(bench.star5_spec(rng_seed=args.seed), dim=2)
    elif args.type == "homography":
        data = bench.gen_homography_scene(rng_seed=args.seed)
    else:
        data = bench.gen_fundamental_scene(rng_seed=args.seed)
    bench.save_dataset(data, args.out)
    print(f"wrote {len(data.points)} points to {args.out}", file=sys.stderr)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def cmd_fit(args):
    data = bench.load_dataset(args.input)
    kind = ModelKind.parse(args.model)
    if data.points.shape[1] != kind.dim:
        raise DimensionMismatch(
            f"{kind.value} needs {kind.dim} columns, {args.input} has {data.points.shape[1]}"
        )
    result = msh_fit(data.points, kind, _config(args))
    doc = result.to_dict(include_trace=args.mtd_trace is not None)
    if data.gt_labels is not None:
        doc["misclassification_error"] = bench.misclassification_error(
            result.labels, data.gt_labels)
    _write_json(doc, args.out)
    if args.labels:
        bench.save_labels(result.labels, args.labels)
    if args.mtd_trace:
        _write_json(doc["mtd_trace"], args.mtd_trace)
    if args.dump_hypergraph:
        _write_json(result.graph.to_dict(), args.dump_hypergraph)
    if args.plot:
        write_svg(args.plot, data.points, result.labels, kind, result.modes)
    print(f"{result.n_modes} modes, {int(np.sum(result.labels > 0))} inliers, "
          f"{result.timing['total_s']:.2f} s", file=sys.stderr)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args):
    pred = bench.load_labels(args.pred)
    gt = bench.load_labels(args.gt)
    if len(pred) != len(gt):
        raise DimensionMismatch(f"length mismatch: {len(pred)} predicted vs {len(gt)} ground-truth labels")
    print(f"{bench.misclassification_error(pred, gt):.2f}")


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args):
    cfg = _config(args)
    jobs = args.jobs
    summaries = {}
    if args.table == "lines3d":
        for n in args.lines:
            src = bench.gen_lines(bench.lines3d_spec(n, rng_seed=args.data_seed), dim=3)
            summaries[f"{n} lines"] = bench.run_experiment(
                src, ModelKind.LINE3D, cfg, args.repeats, args.seed, n_jobs=jobs)
            _progress(f"{n} lines", summaries[f"{n} lines"])
    elif args.table == "star5":
        src = bench.gen_lines(bench.star5_spec(rng_seed=args.data_seed), dim=2)
        summaries["star5"] = bench.run_experiment(
            src, ModelKind.LINE2D, cfg, args.repeats, args.seed, n_jobs=jobs)
        _progress("star5", summaries["star5"])
    else:
        if not args.data or not args.model:
            raise SystemExit("error: bench custom needs --data and --model")
        src = bench.load_dataset(args.data)
        if src.gt_labels is None:
            raise SystemExit("error: bench custom needs a dataset with a label column")
        summaries[os.path.basename(args.data)] = bench.run_experiment(
            src, ModelKind.parse(args.model), cfg, args.repeats, args.seed, n_jobs=jobs)

    rows = bench.summary_csv_rows(summaries)
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(r, widths)))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    if args.json:
        _write_json({k: s.to_dict() for k, s in summaries.items()}, args.json)


def _progress(name, s):
    print(f"{name}: avg {s.avg:.2f}%, counts {s.mode_counts}, failures {s.failures}",
          file=sys.stderr)


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msh",
        description="Multi-structure geometric model fitting by mode seeking on hypergraphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic labeled dataset CSV")
    g.add_argument("type", choices=["lines", "circles", "lines3d", "star5", "homography", "fundamental"])
    g.add_argument("out", help="output CSV path")
    g.add_argument("--structures", type=int, default=3)
    g.add_argument("--inliers", type=int, default=100, help="inliers per structure")
    g.add_argument("--outliers", type=int, default=400)
    g.add_argument("--sigma", type=float, default=1.0, help="inlier noise")
    g.add_argument("--box", type=float, default=100.0, help="side of the domain box")
    g.add_argument("--layout", choices=bench.LAYOUTS, default="random")
    g.add_argument("--dim", type=int, choices=[2, 3], default=2)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit models to a dataset CSV")
    f.add_argument("input", help="dataset CSV")
    f.add_argument("--model", choices=MODELS, required=True)
    f.add_argument("--out", default="-", help="result JSON path (default: stdout)")
    f.add_argument("--labels", help="write point labels to this CSV")
    f.add_argument("--mtd-trace", metavar="PATH", help="write the sorted MTD trace as JSON")
    f.add_argument("--dump-hypergraph", metavar="PATH", help="write the hypergraph as JSON")
    f.add_argument("--plot", metavar="PATH", help="write an SVG scatter of the labels")
    _add_run_flags(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="misclassification error (%%) of predicted labels")
    e.add_argument("pred", help="predicted labels CSV")
    e.add_argument("gt", help="ground-truth labels CSV (or a labeled dataset)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="repeat fitting on benchmark data and report Std/Avg/Min")
    b.add_argument("table", choices=["lines3d", "star5", "custom"])
    b.add_argument("--repeats", type=int, default=20)
    b.add_argument("--lines", type=int, nargs="+", default=[3, 4, 5, 6],
                   help="line counts for lines3d (default: 3 4 5 6)")
    b.add_argument("--data-seed", type=int, default=0, help="seed of the generated data")
    b.add_argument("--data", help="labeled dataset CSV for 'custom'")
    b.add_argument("--model", choices=MODELS, help="model for 'custom'")
    b.add_argument("--jobs", type=int, default=None, help="parallel repeats")
    b.add_argument("--csv", help="write the table as CSV")
    b.add_argument("--json", help="write the full summaries as JSON")
    _add_run_flags(b)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (MSHError, ValueError, OSError) as exc:
        print(f"msh: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
