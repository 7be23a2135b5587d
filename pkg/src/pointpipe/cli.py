"""Command-line entry point.

Every command is a pure function of its inputs, flags, and seed: given the
same arguments twice it produces byte-identical outputs. Synthetic clouds
come from a named deterministic generator whose identifier and seed are
recorded in whatever the command writes.

Exit codes: 0 success (or verified), 1 verification failure (stalls,
overflows, oracle mismatch, sort mismatch), 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from .graph import PipelineError, load_pipeline
from .optimizer import (
    ScheduleError,
    ScheduleSolution,
    build_constraints,
    optimize,
    schedule_chunks,
    _frac_to_json,
)
from .oracle import verify_against_oracle
from .simulator import simulate
from .kernels import cloud as cloudio
from .kernels.cloud import PointCloud
from .kernels.grid import chunked_sort, split_grid, split_serial
from .kernels.kdtree import (
    brute_force_knn,
    brute_force_range,
    kdtree_build,
    knn_search,
    profile_deadline,
    range_search,
)
from .kernels.prng import PRNG_ID, synthetic_cloud
from .kernels.stats import chunk_access_stats

OK, VERIFY_FAILED, USAGE = 0, 1, 2

_AXES = {"x": 0, "y": 1, "z": 2}


class CliError(Exception):
    pass


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _triple(text: str, name: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise CliError(f"{name} must look like AxBxC, got {text!r}")
    try:
        vals = tuple(int(p) for p in parts)
    except ValueError:
        raise CliError(f"{name} must be integers, got {text!r}") from None
    return vals  # type: ignore[return-value]


def _load_cloud(args) -> tuple[PointCloud, dict]:
    meta: dict = {}
    if args.synthetic is not None:
        if args.synthetic < 1:
            raise CliError("--synthetic needs a positive point count")
        pts = synthetic_cloud(args.synthetic, args.seed)
        meta = {"source": "synthetic", "prng": PRNG_ID, "seed": args.seed,
                "count": args.synthetic}
        return PointCloud(points=pts), meta
    if args.input is None:
        raise CliError("provide --input FILE or --synthetic N")
    try:
        c = cloudio.load(args.input, fmt=args.format)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read cloud {args.input!r}: {exc}") from exc
    meta = {"source": args.input, "format": args.format, "count": len(c)}
    return c, meta


def _queries(args, cloud: PointCloud) -> np.ndarray:
    if getattr(args, "query_input", None):
        qc = cloudio.load(args.query_input, fmt=args.format)
        return qc.points
    count = args.queries
    if count < 1:
        raise CliError("--queries must be positive")
    return synthetic_cloud(count, args.seed + 1)


def _parse_deadline(args, tree, queries, k) -> int | None:
    if args.deadline is not None and args.deadline_frac is not None:
        raise CliError("--deadline and --deadline-frac are mutually exclusive")
    if args.deadline is not None:
        if args.deadline.lower() in ("inf", "none"):
            return None
        try:
            value = int(args.deadline)
        except ValueError:
            raise CliError("--deadline must be an integer or 'inf'") from None
        if value < 1:
            raise CliError("--deadline must be >= 1")
        return value
    if args.deadline_frac is not None:
        frac = Fraction(args.deadline_frac)
        prof = profile_deadline(tree, queries, k, frac)
        return prof.deadline
    return None


# -- scheduling commands ------------------------------------------------------

def cmd_optimize(args) -> int:
    graph = load_pipeline(args.graph)
    solution = optimize(graph, pruned=not args.no_prune, horizon=args.horizon)
    if args.chunks > 1:
        solution = schedule_chunks(solution, graph, args.chunks)
    doc = solution.dumps(element_bytes=args.element_bytes)
    _write(args.out, doc)
    counts = solution.constraint_counts
    print(f"total buffer: {_frac_to_json(solution.total_buffer)} elements", file=sys.stderr)
    if args.element_bytes:
        from math import ceil
        total_bytes = sum(
            ceil(v) * args.element_bytes for v in solution.buffer_sizes.values()
        )
        print(f"total buffer: {total_bytes} bytes "
              f"({args.element_bytes} B/element)", file=sys.stderr)
    print(f"makespan: {_frac_to_json(solution.makespan)} cycles", file=sys.stderr)
    print(f"constraints: pruned {counts['pruned']}, unpruned {counts['unpruned']}",
          file=sys.stderr)
    return OK


def cmd_simulate(args) -> int:
    graph = load_pipeline(args.graph)
    try:
        with open(args.schedule, "r", encoding="utf-8") as fh:
            solution = ScheduleSolution.from_json_dict(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read schedule {args.schedule!r}: {exc}") from exc
    missing = [s.id for s in graph.stages if s.id not in solution.start_cycles]
    if missing:
        raise CliError(f"schedule missing stages: {missing}")
    if args.chunks > 1 and solution.initiation_interval is None:
        solution = schedule_chunks(solution, graph, args.chunks)
    trace = simulate(graph, solution, chunk_count=args.chunks)

    if args.trace:
        lines = ["cycle,edge,occupancy"]
        for cyc, edge, occ in trace.sample_rows(stride=args.stride):
            lines.append(f"{cyc},{edge},{_frac_to_json(occ)}")
        _write(args.trace, "\n".join(lines) + "\n")
    summary = trace.summary_dict()
    if solution.initiation_interval is not None:
        summary["initiation_interval"] = _frac_to_json(solution.initiation_interval)
    _write(args.summary, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if trace.ok:
        print("simulation clean: no stalls, no overflows", file=sys.stderr)
        return OK
    print(
        f"simulation violated the schedule: {len(trace.stall_events)} stalls, "
        f"{len(trace.overflow_events)} overflows",
        file=sys.stderr,
    )
    return VERIFY_FAILED


def cmd_verify(args) -> int:
    graph = load_pipeline(args.graph)
    report = verify_against_oracle(graph, horizon=args.horizon)
    print(str(report))
    return OK if report.matches else VERIFY_FAILED


# -- point kernels ------------------------------------------------------------

def cmd_knn(args) -> int:
    cloud, meta = _load_cloud(args)
    tree = kdtree_build(cloud.points, leaf_size=args.leaf_size)
    queries = _queries(args, cloud)
    deadline = _parse_deadline(args, tree, queries, args.k)

    lines = ["query,rank,point,dist2,steps,truncated"]
    hits = 0
    truth_hits = 0
    for qi, q in enumerate(queries):
        res = knn_search(tree, q, args.k, deadline=deadline)
        for rank, (idx, d2) in enumerate(res.neighbors):
            lines.append(f"{qi},{rank},{idx},{d2!r},{res.steps_used},{int(res.truncated)}")
        if args.recall:
            truth = {i for i, _ in brute_force_knn(cloud.points, q, args.k)}
            hits += len(truth & {i for i, _ in res.neighbors})
            truth_hits += min(args.k, len(cloud))
    _write(args.out, "\n".join(lines) + "\n")
    note = f"deadline: {deadline if deadline is not None else 'none'}"
    if args.recall:
        recall = hits / truth_hits
        print(f"recall@{args.k}: {recall:.6f} ({note})", file=sys.stderr)
    else:
        print(f"searched {len(queries)} queries ({note})", file=sys.stderr)
    if meta:
        print(f"cloud: {meta}", file=sys.stderr)
    return OK


def cmd_range(args) -> int:
    cloud, meta = _load_cloud(args)
    if args.radius <= 0:
        raise CliError("--radius must be positive")
    tree = kdtree_build(cloud.points, leaf_size=args.leaf_size)
    queries = _queries(args, cloud)
    deadline = None
    if args.deadline is not None and args.deadline.lower() not in ("inf", "none"):
        deadline = int(args.deadline)

    lines = ["query,rank,point,dist2,steps,truncated"]
    exact = 0
    for qi, q in enumerate(queries):
        res = range_search(tree, q, args.radius, deadline=deadline)
        for rank, (idx, d2) in enumerate(res.neighbors):
            lines.append(f"{qi},{rank},{idx},{d2!r},{res.steps_used},{int(res.truncated)}")
        if args.recall and res.neighbors == brute_force_range(cloud.points, q, args.radius):
            exact += 1
    _write(args.out, "\n".join(lines) + "\n")
    if args.recall:
        print(f"exact matches vs brute force: {exact}/{len(queries)}", file=sys.stderr)
    return OK


def cmd_profile_deadline(args) -> int:
    cloud, _ = _load_cloud(args)
    tree = kdtree_build(cloud.points, leaf_size=args.leaf_size)
    queries = _queries(args, cloud)
    prof = profile_deadline(tree, queries, args.k, Fraction(args.fraction))
    lines = ["query,steps"] + [f"{i},{s}" for i, s in enumerate(prof.steps)]
    _write(args.out, "\n".join(lines) + "\n")
    print(f"mean steps: {prof.mean_steps!r}", file=sys.stderr)
    print(f"deadline (fraction {args.fraction}): {prof.deadline}", file=sys.stderr)
    return OK


def cmd_stats_chunks(args) -> int:
    cloud, _ = _load_cloud(args)
    dims = _triple(args.grid, "--grid")
    grid = split_grid(cloud, dims)
    tree = kdtree_build(cloud.points, leaf_size=args.leaf_size)
    queries = _queries(args, cloud)
    try:
        ks = [int(v) for v in args.k_list.split(",") if v]
    except ValueError:
        raise CliError(f"--k-list must be comma-separated integers, got {args.k_list!r}") from None
    lines = ["k,mean_chunks"]
    for k in ks:
        st = chunk_access_stats(grid, tree, queries, k)
        lines.append(f"{k},{st.mean_chunks!r}")
    _write(args.out, "\n".join(lines) + "\n")
    print(f"grid cells: {grid.cell_count}", file=sys.stderr)
    return OK


def cmd_split(args) -> int:
    cloud, meta = _load_cloud(args)
    doc: dict = {"cloud": meta}
    if args.serial is not None:
        chunks = split_serial(cloud, args.serial)
        doc["mode"] = "serial"
        doc["points_per_chunk"] = args.serial
        doc["chunk_sizes"] = [len(c) for c in chunks]
        if args.members:
            doc["chunks"] = [c.tolist() for c in chunks]
    elif args.grid is not None:
        dims = _triple(args.grid, "--grid")
        kernel = _triple(args.kernel, "--kernel") if args.kernel else (1, 1, 1)
        stride = _triple(args.stride, "--stride") if args.stride else (1, 1, 1)
        grid = split_grid(cloud, dims, kernel=kernel, stride=stride)
        doc["mode"] = "grid"
        doc["dims"] = list(grid.dims)
        doc["kernel"] = list(grid.kernel)
        doc["stride"] = list(grid.stride)
        doc["cell_sizes"] = [len(c) for c in grid.cells]
        doc["groups"] = [
            {
                "origin": list(g.origin),
                "cells": list(g.cells),
                "size": len(g.points),
                **({"points": g.points.tolist()} if args.members else {}),
            }
            for g in grid.groups
        ]
    else:
        raise CliError("provide --grid AxBxC or --serial N")
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return OK


def cmd_sort(args) -> int:
    cloud, _ = _load_cloud(args)
    axis = _AXES[args.axis]
    if args.cuts:
        cuts = [float(c) for c in args.cuts.split(",") if c]
    else:
        lo = float(cloud.points[:, axis].min())
        hi = float(cloud.points[:, axis].max())
        n = args.chunks
        cuts = [lo + (hi - lo) * i / n for i in range(1, n)]
    perm = chunked_sort(cloud, axis, cuts)
    _write(args.out, "\n".join(str(i) for i in perm) + "\n")
    if args.verify:
        ref = np.argsort(cloud.points[:, axis], kind="stable")
        if not np.array_equal(perm, ref):
            print("chunked sort DIVERGES from global stable sort", file=sys.stderr)
            return VERIFY_FAILED
        print("chunked sort equals global stable sort", file=sys.stderr)
    return OK


# -- wiring -------------------------------------------------------------------

def _add_cloud_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="point cloud file")
    p.add_argument("--synthetic", type=int, help="generate N uniform points instead")
    p.add_argument("--queries", type=int, default=100,
                   help="synthetic query count (seed+1)")
    p.add_argument("--query-input", help="load queries from a cloud file")
    p.add_argument("--leaf-size", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pointpipe",
        description="Line-buffer scheduling and streaming search kernels "
                    "for point-cloud pipelines",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
    common.add_argument("--format", choices=("text", "binary"), default="text",
                        help="point cloud file format")
    common.add_argument("--out", default=None,
                        help="primary output file (default stdout)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_parser(name: str, **kw) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], **kw)

    p = add_parser("optimize", help="solve minimal line-buffer schedule")
    p.add_argument("graph", help="pipeline description JSON")
    p.add_argument("--no-prune", action="store_true",
                   help="emit the per-timestamp constraint family")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--element-bytes", type=int, default=None)
    p.add_argument("--chunks", type=int, default=1)
    p.set_defaults(func=cmd_optimize)

    p = add_parser("simulate", help="token-simulate a schedule")
    p.add_argument("graph")
    p.add_argument("schedule")
    p.add_argument("--chunks", type=int, default=1)
    p.add_argument("--trace", default=None, help="occupancy CSV path")
    p.add_argument("--summary", default=None, help="summary JSON path (default stdout)")
    p.add_argument("--stride", type=int, default=1, help="trace sampling stride")
    p.set_defaults(func=cmd_simulate)

    p = add_parser("verify", help="cross-check the solver against enumeration")
    p.add_argument("graph")
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = add_parser("knn", help="k-nearest-neighbor search")
    _add_cloud_options(p)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--deadline", default=None, help="step cap, or 'inf'")
    p.add_argument("--deadline-frac", default=None,
                   help="derive the cap from profiled mean steps")
    p.add_argument("--recall", action="store_true",
                   help="report recall against brute force")
    p.set_defaults(func=cmd_knn)

    p = add_parser("range", help="radius search")
    _add_cloud_options(p)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--deadline", default=None)
    p.add_argument("--recall", action="store_true")
    p.set_defaults(func=cmd_range)

    p = add_parser("profile-deadline", help="suggest a step cap from profiling")
    _add_cloud_options(p)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--fraction", default="1/4")
    p.set_defaults(func=cmd_profile_deadline)

    p = add_parser("stats-chunks", help="mean grid cells touched per search")
    _add_cloud_options(p)
    p.add_argument("--grid", required=True, help="cell grid, e.g. 8x8x1")
    p.add_argument("--k-list", default="16,32,64,128,256")
    p.set_defaults(func=cmd_stats_chunks)

    p = add_parser("split", help="partition a cloud into chunks/groups")
    _add_cloud_options(p)
    p.add_argument("--grid", default=None, help="cell grid, e.g. 3x3x1")
    p.add_argument("--kernel", default=None, help="group window, e.g. 2x2x1")
    p.add_argument("--stride", default=None, help="group stride, e.g. 1x1x1")
    p.add_argument("--serial", type=int, default=None,
                   help="arrival-order chunks of N points")
    p.add_argument("--members", action="store_true",
                   help="include point index lists in the manifest")
    p.set_defaults(func=cmd_split)

    p = add_parser("sort", help="chunked sort along an axis")
    _add_cloud_options(p)
    p.add_argument("--axis", choices=("x", "y", "z"), default="x")
    p.add_argument("--chunks", type=int, default=8,
                   help="equal-width buckets along the axis")
    p.add_argument("--cuts", default=None, help="explicit comma-separated cut values")
    p.add_argument("--verify", action="store_true",
                   help="compare against one global stable sort")
    p.set_defaults(func=cmd_sort)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, PipelineError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
