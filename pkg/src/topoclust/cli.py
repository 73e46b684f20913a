"""Command-line frontend.

Every subcommand writes JSON to stdout (or ``--out``) except ``pairwise``
and ``dyncorr``, which write CSV. Exit status is 0 on success, 1 for bad
input or usage, 2 when a computation fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import _parallel
from .cluster import clustering_accuracy, wasserstein_cluster, within_between_ratio
from .decomposition import BirthDeathDecomposition, decompose, graph_mean, graph_variance
from .distance import combined_distance, pairwise_distances
from .errors import ComputationError, ValidationError
from .graph import load_graph_csv, save_graph_csv
from .pipeline import generate_synthetic, load_config, run_pipeline, synthetic_spec, write_panel
from .smoothing import bandwidth_from_window, correlation_matrices, fit_series, sample_grid

log = logging.getLogger("topoclust")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _graph_files(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            files = sorted(p.glob("*.csv"))
            if not files:
                raise ValidationError(f"{p}: no CSV files")
            out.extend(files)
        elif p.exists():
            out.append(p)
        else:
            raise ValidationError(f"{p}: no such file or directory")
    return out


def _load_graphs(paths):
    files = _graph_files(paths)
    return files, [load_graph_csv(f) for f in files]


def _read_series(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValidationError(f"{path}: needs a header row and at least one data row")
    try:
        x = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if not np.isfinite(x).all():
        raise ValidationError(f"{path}: non-finite values")
    return rows[0], x


def _read_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file")
    with open(path, newline="") as fh:
        cells = [c.strip() for row in csv.reader(fh) for c in row if c.strip()]
    try:
        return np.array([int(c) for c in cells], dtype=int)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _bandwidth(args, n):
    if args.bandwidth is not None:
        return args.bandwidth
    return bandwidth_from_window(args.window, n, args.degree)


# --- subcommands ---------------------------------------------------------------


def cmd_decompose(args):
    d = decompose(load_graph_csv(args.graph))
    text = d.to_json()
    if args.verify:
        ref = Path(args.verify)
        if not ref.exists():
            raise ValidationError(f"{ref}: no such file")
        stored = ref.read_text().strip()
        if BirthDeathDecomposition.from_dict(json.loads(stored)).to_json() != text or stored != text:
            raise ValidationError(f"{ref}: decomposition does not reproduce")
        return {"verified": True, "file": str(ref)}
    return d.to_dict()


def cmd_distance(args):
    g1, g2 = load_graph_csv(args.g1), load_graph_csv(args.g2)
    return combined_distance(g1, g2).to_dict()


def cmd_pairwise(args):
    files, gs = _load_graphs([args.dir])
    d = pairwise_distances(gs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + [f.stem for f in files])
    for f, row in zip(files, d):
        w.writerow([f.stem] + [repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_mean(args):
    files, gs = _load_graphs(args.graphs)
    m = graph_mean(gs, template_index=args.template)
    out = m.decomposition.to_dict()
    out.update(
        n=m.n,
        template=None if m.template_id is None else files[m.template_id].name,
        variance=graph_variance(gs),
    )
    if args.graph_out:
        save_graph_csv(m.representative, args.graph_out)
        out["graph_file"] = str(args.graph_out)
    return out


def cmd_cluster(args):
    files, gs = _load_graphs([args.dir])
    model = wasserstein_cluster(gs, args.k, restarts=args.restarts, seed=args.seed)
    return {
        "files": [f.name for f in files],
        "assignments": model.assignments.tolist(),
        "objective_trace": model.objective_trace,
        "converged": model.converged,
        "ratio": _json_float(within_between_ratio(model, gs)),
        "restart_objectives": model.restart_objectives,
        "means": [m.decomposition.to_dict() for m in model.means],
    }


def cmd_accuracy(args):
    pred, truth = _read_labels(args.pred), _read_labels(args.truth)
    k = args.k or int(max(pred.max(initial=1), truth.max(initial=1)))
    return {"accuracy": clustering_accuracy(pred, truth, k), "k": k, "n": int(pred.size)}


def cmd_smooth(args):
    names, x = _read_series(args.series)
    fs = fit_series(x, degree=args.degree, names=names)
    s = _bandwidth(args, x.shape[0])
    t = np.linspace(0, 1, args.points) if args.points else fs.sample_grid
    return {"bandwidth": s, "degree": fs.degree, "names": names, "t": t.tolist(), "values": fs.evaluate(t, s).T.tolist()}


def cmd_dyncorr(args):
    names, x = _read_series(args.series)
    n = x.shape[0]
    s = _bandwidth(args, n)
    index = np.arange(0, n, args.stride)
    t_grid = sample_grid(n)[index]
    corr, mask = correlation_matrices(x, t_grid, s, kernel=args.kernel, window=args.window, degree=args.degree)
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, c in zip(index, corr):
        f = out_dir / f"corr_{i:05d}.csv"
        with open(f, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            w.writerows([[repr(float(v)) for v in row] for row in c])
        files.append(f.name)
    return {"bandwidth": s, "t_grid": t_grid.tolist(), "files": files, "degenerate_fraction": float(mask.mean())}


def cmd_states(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return run_pipeline(cfg)


def cmd_simulate(args):
    cfg = load_config(args.config)
    cfg = cfg.get("synthetic", cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    spec = synthetic_spec(cfg)
    panel, planted = generate_synthetic(spec)
    out_dir = _out_dir(args)
    paths = write_panel(panel, out_dir)
    states = out_dir.parent / f"{out_dir.name}_states.csv"
    with open(states, "w", newline="") as fh:
        w = csv.writer(fh)
        for sid, row in zip(planted.subject_ids, planted.labels):
            w.writerow([sid, *row.tolist()])
    return {"subjects": [p.name for p in paths], "states_file": str(states), "k_true": planted.k}


def _out_dir(args) -> Path:
    if not args.out:
        raise ValidationError(f"{args.command} needs --out DIR")
    return Path(args.out)


def _json_float(v):
    return float(v) if np.isfinite(v) else None


# --- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, help="worker cap (default: $TOPOCLUST_THREADS or 1)")
    common.add_argument("--pretty", action="store_true", help="indented JSON")
    common.add_argument("--out", help="output file (output directory for dyncorr and simulate)")
    common.add_argument("--seed", type=int, help="random seed where randomness exists")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="topoclust", description="Topological clustering of weighted graphs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", parents=[common], help="birth-death decomposition of a graph CSV")
    p.add_argument("graph")
    p.add_argument("--verify", metavar="JSON", help="check the output reproduces this file byte for byte")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("distance", parents=[common], help="Wasserstein distances between two graphs")
    p.add_argument("g1")
    p.add_argument("g2")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("pairwise", parents=[common], help="distance matrix over a directory of graphs (CSV)")
    p.add_argument("dir")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("mean", parents=[common], help="Wasserstein mean of graphs")
    p.add_argument("graphs", nargs="+", help="graph CSVs or directories")
    p.add_argument("--template", type=int, default=0, help="index of the graph whose edges carry the mean")
    p.add_argument("--graph-out", help="also write the mean graph as CSV")
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("cluster", parents=[common], help="Wasserstein clustering of a directory of graphs")
    p.add_argument("dir")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("accuracy", parents=[common], help="LSAP clustering accuracy of two label files")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--k", type=_positive_int)
    p.set_defaults(func=cmd_accuracy)

    for name, func, text in (
        ("smooth", cmd_smooth, "heat-kernel smoothing of a time-series CSV"),
        ("dyncorr", cmd_dyncorr, "dynamic correlation matrices, one CSV per grid time"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("series")
        bw = p.add_mutually_exclusive_group(required=name == "smooth")
        bw.add_argument("--bandwidth", type=_positive_float)
        bw.add_argument("--window", type=_positive_int, help="sliding-window length in samples to match")
        p.add_argument("--degree", type=_positive_int)
        p.set_defaults(func=func)
    sub.choices["smooth"].add_argument("--points", type=_positive_int, help="evaluate on this many equispaced points")
    d = sub.choices["dyncorr"]
    d.add_argument("--stride", type=_positive_int, default=1)
    d.add_argument("--kernel", choices=("heat", "boxcar"), default="heat")

    p = sub.add_parser("states", parents=[common], help="end-to-end state estimation from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_states)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic panel with planted states")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


DIR_OUTPUT = ("dyncorr", "simulate")


def _emit(result, args):
    if isinstance(result, str):
        text = result
    else:
        text = json.dumps(result, indent=2 if args.pretty else None) + "\n"
    if args.out and args.command not in DIR_OUTPUT:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _fail(exc):
    print(f"topoclust: error: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    if args.command == "dyncorr" and args.bandwidth is None and args.window is None:
        parser.error("dyncorr needs --bandwidth or --window")
    if args.command == "dyncorr" and args.kernel == "boxcar" and args.window is None:
        parser.error("--kernel boxcar needs --window")
    _parallel.set_threads(args.threads)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = args.func(args)
        _emit(result, args)
    except (ValidationError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        _fail(exc)
        return 1
    except ComputationError as exc:
        _fail(exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
