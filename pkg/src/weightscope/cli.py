"""``weightscope`` command line: train, mapper, analyze, synth.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import (
    NoFinalStepClusters,
    branch_count,
    branching_times,
    confusion_evolution,
    default_tau,
    surface_images,
    weight_norms,
)
from .dataset import IdxFormatError, load_idx_file, synth_tree_cloud
from .formats import (
    SnapshotFormatError,
    atomic_write,
    confusion_csv,
    graph_dot,
    graph_json,
    log_csv,
    pgm_bytes,
    read_log,
    read_snapshots,
    select_layer,
    write_snapshots,
)
from .linalg import ZeroVarianceError
from .mapper import (
    DEFAULT_EPS_SCALE,
    DEFAULT_INTERVALS,
    DEFAULT_MIN_SAMPLES,
    DEFAULT_OVERLAP,
    mapper_pipeline,
)
from .nn import (
    InitScheme,
    NetworkSpec,
    TrainConfig,
    TrainingDiverged,
    TrajectoryCloud,
    init_network,
    train,
)

log = logging.getLogger("weightscope")

DATA_ERRORS = (
    IdxFormatError,
    SnapshotFormatError,
    NoFinalStepClusters,
    TrainingDiverged,
    ZeroVarianceError,
    FileNotFoundError,
)

CONFIG_DEFAULTS = {
    "layer_sizes": [784, 100, 10],
    "init": "zero",
    "mu": 0.0,
    "sigma": 0.0,
    "jitter_sigma": 0.0,
    "learning_rate": 0.5,
    "batch_size": 64,
    "epochs": 50,
    "snapshot_every": 10,
    "seed": 0,
    "subset_size": None,
    "record_initial": True,
    "shuffle": True,
    "num_classes": 10,
}
CONFIG_REQUIRED = ("train_images", "train_labels", "test_images", "test_labels")
PATH_KEYS = CONFIG_REQUIRED


class UsageError(Exception):
    pass


class ConfigError(UsageError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def load_config(path):
    """Parse a flat JSON run config, rejecting unknown and missing keys."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    known = set(CONFIG_DEFAULTS) | set(CONFIG_REQUIRED)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    missing = [k for k in CONFIG_REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required config key(s): {', '.join(missing)}")
    cfg = {**CONFIG_DEFAULTS, **raw}
    for key in PATH_KEYS:
        p = Path(cfg[key])
        cfg[key] = str(p if p.is_absolute() else (path.parent / p).resolve())
    return cfg


def _run_parts(cfg):
    try:
        spec = NetworkSpec(tuple(cfg["layer_sizes"]))
        scheme = InitScheme(cfg["init"], float(cfg["mu"]), float(cfg["sigma"]), float(cfg["jitter_sigma"]))
        tc = TrainConfig(
            learning_rate=float(cfg["learning_rate"]),
            batch_size=int(cfg["batch_size"]),
            epochs=int(cfg["epochs"]),
            snapshot_every=int(cfg["snapshot_every"]),
            seed=int(cfg["seed"]),
            subset_size=None if cfg["subset_size"] is None else int(cfg["subset_size"]),
            record_initial=bool(cfg["record_initial"]),
            shuffle=bool(cfg["shuffle"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return spec, scheme, tc


def cmd_train(args):
    cfg = load_config(args.config)
    spec, scheme, tc = _run_parts(cfg)
    n_classes = int(cfg["num_classes"])
    train_data = (
        load_idx_file(cfg["train_images"], "images"),
        load_idx_file(cfg["train_labels"], "labels", n_classes),
    )
    test_data = (
        load_idx_file(cfg["test_images"], "images"),
        load_idx_file(cfg["test_labels"], "labels", n_classes),
    )
    net = init_network(spec, scheme, tc.seed)

    def progress(tl):
        log.info("step %d  minibatch %d  loss %.4f  acc %.4f",
                 tl.step[-1], tl.minibatch[-1], tl.loss[-1], tl.accuracy[-1])

    _, tl, clouds = train(net, train_data, test_data, tc, progress=progress)
    out = Path(args.out)
    write_snapshots(out / "snapshots.wtrj", clouds)
    atomic_write(out / "log.csv", log_csv(tl))
    atomic_write(out / "confusion.csv", confusion_csv(tl))
    used = train_data[0].count if tc.subset_size is None else min(tc.subset_size, train_data[0].count)
    meta = {
        "config": cfg,
        "seed": tc.seed,
        "version": __version__,
        "backend": kernels.BACKEND,
        "pixel_scaling": "byte / 255",
        "train_images_used": used,
        "test_images": test_data[0].count,
        "snapshots": clouds[0].steps if clouds else 0,
    }
    atomic_write(out / "meta.json", json.dumps(meta, indent=2) + "\n")
    return 0


def _mapper_from_args(cloud, args):
    return mapper_pipeline(
        cloud,
        filter=args.filter,
        n_intervals=args.intervals,
        overlap=args.overlap,
        eps=args.eps,
        min_samples=args.min_samples,
        max_dim=args.max_dim,
        eps_scale=args.eps_scale,
        stride=args.stride,
    )


def cmd_mapper(args):
    cloud = select_layer(read_snapshots(args.snapshots), args.layer)
    graph = _mapper_from_args(cloud, args)
    out = Path(args.out)
    atomic_write(out / "graph.json", graph_json(graph, with_members=args.with_members))
    atomic_write(out / "graph.dot", graph_dot(graph))
    log.info("%d vertices, %d edges, %d triangles",
             graph.n_vertices, len(graph.edges), len(graph.triangles))
    return 0


def cmd_analyze_norms(args):
    clouds = read_snapshots(args.snapshots)
    if args.layer is not None:
        clouds = [select_layer(clouds, args.layer)]
    lines = ["step,layer,neuron,norm"]
    for c in clouds:
        norms = weight_norms(c)
        for s in range(c.steps):
            for n in range(c.neurons):
                lines.append(f"{s},{c.layer_index},{n},{float(norms[s, n])!r}")
    atomic_write(Path(args.out) / "norms.csv", "\n".join(lines) + "\n")
    return 0


def _events_json(events):
    return [{"step": e.step, "group_a": e.group_a, "group_b": e.group_b} for e in events]


def cmd_analyze_branches(args):
    cloud = select_layer(read_snapshots(args.snapshots), args.layer)
    graph = _mapper_from_args(cloud, args)
    report = branch_count(cloud, graph)
    tau = args.tau if args.tau is not None else default_tau(cloud)
    events = branching_times(cloud, tau if tau > 0 else None)
    first = events[0].step if events else None
    summary = [
        f"layer {cloud.layer_index}: {cloud.neurons} neurons over {cloud.steps} snapshots",
        f"{report.final_branch_count} branch(es) at the final snapshot "
        f"({report.final_branch_count}/{cloud.neurons} of the layer's neurons are distinguishable)",
        f"{len(events)} permanent split(s) at single-linkage threshold {tau:.6g}"
        + (f", first at snapshot {first}" if first is not None else ""),
        "branch counts and branching times depend on training length and Mapper parameters; "
        "compare runs only at equal settings",
    ]
    doc = {
        "layer": cloud.layer_index,
        "final_branch_count": report.final_branch_count,
        "branch_members": report.branch_members,
        "tau": tau,
        "branching_events": _events_json(events),
        "graph": {"vertices": graph.n_vertices, "edges": len(graph.edges)},
        "summary": summary,
    }
    atomic_write(Path(args.out) / "report.json", json.dumps(doc, indent=2) + "\n")
    for line in summary:
        print(line)
    return 0


def cmd_analyze_branching(args):
    cloud = select_layer(read_snapshots(args.snapshots), args.layer)
    events = branching_times(cloud, args.tau)
    atomic_write(Path(args.out) / "branching.json", json.dumps(_events_json(events), indent=2) + "\n")
    return 0


def cmd_analyze_confusion(args):
    tl = read_log(args.run)
    counts = confusion_evolution(tl, args.true_class)
    header = "step,minibatch," + ",".join(f"pred_{p}" for p in range(counts.shape[1]))
    lines = [header] + [
        f"{s},{m}," + ",".join(str(int(v)) for v in row)
        for s, m, row in zip(tl.step, tl.minibatch, counts)
    ]
    atomic_write(Path(args.out) / f"class_{args.true_class}.csv", "\n".join(lines) + "\n")
    return 0


def cmd_analyze_surface(args):
    cloud = select_layer(read_snapshots(args.snapshots), args.layer)
    steps = [int(s) for s in args.steps.split(",")] if args.steps else list(range(cloud.steps))
    grid = surface_images(cloud, steps, args.axis, args.height, args.width)
    out = Path(args.out)
    rows, cols = grid.shape
    for r in range(rows):
        for c in range(cols):
            atomic_write(out / f"r{r}_c{c}.pgm", pgm_bytes(grid.images[r, c]))
    return 0


def cmd_synth(args):
    pc = synth_tree_cloud(args.branches, args.points_per_branch, args.noise, args.seed)
    # One neuron per step: the point index doubles as the step label.
    cloud = TrajectoryCloud(0, np.ascontiguousarray(pc.coords), pc.n, 1)
    write_snapshots(args.out, [cloud])
    return 0


def _add_mapper_options(p):
    p.add_argument("--filter", default="l2", help="l2 or pca<k>, e.g. pca3")
    p.add_argument("--intervals", type=int, default=DEFAULT_INTERVALS)
    p.add_argument("--overlap", type=float, default=DEFAULT_OVERLAP)
    p.add_argument("--eps", type=float, default=None,
                   help="DBSCAN radius; default adapts per cover element")
    p.add_argument("--eps-scale", type=float, default=DEFAULT_EPS_SCALE)
    p.add_argument("--min-samples", type=int, default=DEFAULT_MIN_SAMPLES)
    p.add_argument("--max-dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--stride", type=int, default=1, help="PCA fit on every stride-th point")


def build_parser():
    parser = _Parser(prog="weightscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a network and record weight trajectories")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mapper", help="build a learning graph from one layer")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--layer", type=int, required=True)
    _add_mapper_options(p)
    p.add_argument("--with-members", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mapper)

    p = sub.add_parser("analyze", help="derived diagnostics")
    asub = p.add_subparsers(dest="analysis", required=True, parser_class=_Parser)

    a = asub.add_parser("norms")
    a.add_argument("--snapshots", required=True)
    a.add_argument("--layer", type=int)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_norms)

    a = asub.add_parser("branches")
    a.add_argument("--snapshots", required=True)
    a.add_argument("--layer", type=int, required=True)
    _add_mapper_options(a)
    a.add_argument("--tau", type=float)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_branches)

    a = asub.add_parser("branching")
    a.add_argument("--snapshots", required=True)
    a.add_argument("--layer", type=int, required=True)
    a.add_argument("--tau", type=float)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_branching)

    a = asub.add_parser("confusion")
    a.add_argument("--run", required=True, help="directory written by 'train'")
    a.add_argument("--class", dest="true_class", type=int, required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_confusion)

    a = asub.add_parser("surface")
    a.add_argument("--snapshots", required=True)
    a.add_argument("--layer", type=int, required=True)
    a.add_argument("--steps", help="comma-separated snapshot indices (default: all)")
    a.add_argument("--axis", type=int, default=1, help="principal component used as lateral order")
    a.add_argument("--height", type=int, default=28)
    a.add_argument("--width", type=int, default=28)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze_surface)

    p = sub.add_parser("synth", help="write a synthetic tree cloud as a snapshot file")
    p.add_argument("--branches", type=int, default=2)
    p.add_argument("--points-per-branch", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"weightscope: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"weightscope: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"weightscope: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
