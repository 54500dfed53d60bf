"""Command line entry point.

Exit codes: 0 success, 1 usage or I/O error, 2 mathematical obstruction
(free border, containment failure, or a failed interleaving identity).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .clustering import DbscanParams, LinkageParams
from .export import diagram_csv, dumps, firep, grid_ranks_csv, tower_ranks_csv, write_json
from .filtration import build_bifiltration, build_tower
from .homology import GridHomology, HomologyError, TowerHomology, persistence_diagram
from .mapper import mapper_graph
from .pointcloud import METRICS, eval_filter, perturb, read_csv
from .stability import StabilityExperiment, load_experiment, run_stability

EXIT_OK, EXIT_USAGE, EXIT_OBSTRUCTION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_input(p):
    p.add_argument("--input", required=True, help="CSV file, one point per row")
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--filter", default="coord:0", help="coord:<axis>")
    p.add_argument("--out", required=True, help="output directory")


def _add_cover(p, overlap=True):
    p.add_argument("--intervals", type=int, default=3)
    if overlap:
        p.add_argument("--overlap", type=float, default=30.0, help="percent overlap in [0, 100)")
    p.add_argument("--layout", choices=("centered", "tdamapper"), default="centered")
    p.add_argument("--dim-cap", type=int, default=2)


def _add_cluster(p):
    p.add_argument("--cluster", choices=("dbscan", "single", "complete", "average"), default="dbscan")
    p.add_argument("--eps", type=float)
    p.add_argument("--minpts", type=int, default=1)
    p.add_argument("--num-bins-clustering", type=int, default=10)
    p.add_argument("--height", type=float, help="fixed cutting height for linkage clustering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapper-stability", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mapper", help="single mapper graph")
    _add_input(p)
    _add_cover(p)
    _add_cluster(p)

    p = sub.add_parser("sweep", help="one-parameter tower with homology and persistence")
    _add_input(p)
    _add_cover(p)
    _add_cluster(p)
    p.add_argument("--axis", choices=("bin", "eps", "minpts"), required=True)
    p.add_argument("--values", type=_floats, required=True)
    p.add_argument("--k", type=int, default=1, help="homology degree")

    p = sub.add_parser("bifilt", help="grid over (overlap, epsilon) with MinPts fixed")
    _add_input(p)
    _add_cover(p, overlap=False)
    p.add_argument("--overlaps", type=_floats, required=True)
    p.add_argument("--eps-values", type=_floats, required=True)
    p.add_argument("--minpts", type=int, default=1)
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("perturb", help="write a seeded delta-perturbation of the input")
    _add_input(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("interleave", help="stability experiment between X and a perturbation")
    _add_input(p)
    p.add_argument("--config", help="experiment file (JSON or key = value lines)")
    for name, typ in (("intervals", int), ("overlap", float), ("eps", float), ("minpts", int),
                      ("dim-cap", int), ("k", int), ("delta", float), ("k-max", int), ("l-max", int),
                      ("seed", int), ("bin-step", float), ("eps-step", float)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--layout", choices=("centered", "tdamapper"))
    return parser


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _clustering_params(args):
    if args.cluster == "dbscan":
        if args.height is not None:
            raise UsageError("--height only applies to linkage clustering")
        return None if args.eps is None else DbscanParams(args.eps, args.minpts)
    if args.eps is not None:
        raise UsageError(f"--eps cannot be combined with --cluster {args.cluster}")
    return LinkageParams(args.cluster, args.height, args.num_bins_clustering)


def _finish(out: Path, args, params: dict, outputs: dict, seed=None) -> None:
    for name, text in outputs.items():
        (out / name).write_text(text)
    manifest = {
        "command": args.command,
        "params": params,
        "input": {"path": str(args.input), "sha256": _digest(Path(args.input))},
        "outputs": sorted(outputs) + ["manifest.json"],
        "version": __version__,
        "seed": seed,
    }
    write_json(out / "manifest.json", manifest)


def cmd_mapper(args, cloud, filt, out) -> int:
    params = _clustering_params(args)
    if params is None:
        raise UsageError("--cluster dbscan needs --eps")
    cx, cc = mapper_graph(cloud, filt, args.intervals, args.overlap, params, args.dim_cap, args.layout)
    doc = cx.to_json(include_members=True)
    doc["cover"] = cc.cover.to_dict()
    doc["noise"] = list(cc.noise)
    _finish(out, args, {"clustering": params.to_dict(), "intervals": args.intervals, "overlap": args.overlap,
                        "layout": args.layout, "dim_cap": args.dim_cap, "filter": args.filter},
            {"complex.json": dumps(doc), "graph.dot": cx.to_dot()})
    return EXIT_OK


def cmd_sweep(args, cloud, filt, out) -> int:
    values = args.values
    if args.axis == "minpts":
        values = [int(v) for v in values]
    clustering = None
    if args.cluster != "dbscan":
        if args.axis != "bin":
            raise UsageError("linkage clustering can only be swept along the bin axis")
        clustering = _clustering_params(args)
    elif args.axis != "eps" and args.eps is None:
        raise UsageError(f"--axis {args.axis} needs --eps")
    try:
        tower = build_tower(cloud, filt, args.axis, values, args.intervals, args.overlap, args.eps,
                            args.minpts, clustering, args.dim_cap, args.layout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = {"axis": args.axis, "values": values, "intervals": args.intervals, "overlap": args.overlap,
              "layout": args.layout, "cluster": args.cluster, "eps": args.eps, "minpts": args.minpts,
              "num_bins_clustering": args.num_bins_clustering, "height": args.height,
              "dim_cap": args.dim_cap, "k": args.k, "filter": args.filter}
    report = {
        "levels": [{"value": v, "cover": c.summary(), "complex": {"counts": x.counts()}}
                   for v, c, x in zip(values, tower.covers, tower.complexes)],
        "maps": [m.pairs() for m in tower.maps],
        "obstruction": None if tower.ok else tower.obstruction.to_dict(),
    }
    outputs = {}
    if tower.ok:
        th = TowerHomology(tower, args.k)
        ranks = th.rank_invariant()
        report["homology_dims"] = th.dims
        outputs["ranks.csv"] = tower_ranks_csv(ranks)
        outputs["diagram.csv"] = diagram_csv(persistence_diagram(ranks, len(values)))
    outputs["report.json"] = dumps(report)
    _finish(out, args, params, outputs)
    if not tower.ok:
        print(dumps({"obstruction": tower.obstruction.to_dict()}), end="", file=sys.stderr)
        return EXIT_OBSTRUCTION
    return EXIT_OK


def cmd_bifilt(args, cloud, filt, out) -> int:
    try:
        grid = build_bifiltration(cloud, filt, args.overlaps, args.eps_values, args.minpts, args.dim_cap,
                                  args.intervals, args.layout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = grid.manifest()
    outputs = {}
    if grid.ok:
        gh = GridHomology(grid, args.k)
        report["homology_dims"] = gh.dims()
        outputs["ranks.csv"] = grid_ranks_csv(gh.rank_invariant())
        outputs["module.firep"] = firep(gh)
    outputs["report.json"] = dumps(report)
    params = {"overlaps": args.overlaps, "eps_values": args.eps_values, "minpts": args.minpts,
              "intervals": args.intervals, "layout": args.layout, "dim_cap": args.dim_cap, "k": args.k,
              "filter": args.filter}
    _finish(out, args, params, outputs)
    if not grid.ok:
        print(dumps({"obstruction": grid.obstruction.to_dict()}), end="", file=sys.stderr)
        return EXIT_OBSTRUCTION
    return EXIT_OK if grid.commutes else EXIT_OBSTRUCTION


def cmd_perturb(args, cloud, filt, out) -> int:
    if args.delta < 0:
        raise UsageError("--delta must be >= 0")
    moved, _ = perturb(cloud, args.delta, args.seed)
    buf = []
    for row in moved.points:
        buf.append(",".join(repr(float(x)) for x in row))
    _finish(out, args, {"delta": args.delta, "metric": args.metric},
            {"perturbed.csv": "\n".join(buf) + "\n"}, seed=args.seed)
    return EXIT_OK


_EXP_FLAGS = {"intervals": "intervals", "overlap": "overlap", "eps": "epsilon", "minpts": "min_pts",
              "dim_cap": "dim_cap", "k": "k", "delta": "delta", "k_max": "k_max", "l_max": "l_max",
              "seed": "seed", "bin_step": "bin_step", "eps_step": "eps_step", "layout": "layout"}


def cmd_interleave(args, cloud, filt, out) -> int:
    base = asdict(load_experiment(args.config)) if args.config else {}
    for flag, name in _EXP_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            base[name] = value
    if not args.filter.startswith("coord:"):
        raise UsageError("stability experiments need a coordinate filter")
    base["axis"] = int(args.filter.split(":", 1)[1])
    known = {f.name for f in fields(StabilityExperiment)}
    try:
        exp = StabilityExperiment(**{k: v for k, v in base.items() if k in known})
        result = run_stability(cloud, exp)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = result.report
    outputs = {"report.json": dumps(result.to_dict()),
               "grid_x.json": dumps(result.grid_x.manifest()),
               "grid_x_delta.json": dumps(result.grid_xd.manifest())}
    if result.grid_x.ok:
        outputs["ranks.csv"] = grid_ranks_csv(GridHomology(result.grid_x, exp.k).rank_invariant())
    if result.grid_xd.ok:
        outputs["ranks_x_delta.csv"] = grid_ranks_csv(GridHomology(result.grid_xd, exp.k).rank_invariant())
    _finish(out, args, asdict(exp), outputs, seed=exp.seed)
    if rep.obstruction is not None:
        print(dumps({"obstruction": rep.obstruction.to_dict(), "grid": rep.obstruction_grid}), end="",
              file=sys.stderr)
    return EXIT_OK if rep.verdict else EXIT_OBSTRUCTION


COMMANDS = {"mapper": cmd_mapper, "sweep": cmd_sweep, "bifilt": cmd_bifilt, "perturb": cmd_perturb,
            "interleave": cmd_interleave}


def _fail(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)
    return EXIT_USAGE


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc))
    try:
        cloud = read_csv(args.input, args.metric)
        filt = eval_filter(cloud, args.filter)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cloud, filt, out)
    except UsageError as exc:
        return _fail("usage", str(exc))
    except (OSError, csv.Error) as exc:
        return _fail("io", str(exc))
    except (ValueError, HomologyError) as exc:
        return _fail("invalid", str(exc))


if __name__ == "__main__":
    sys.exit(main())
