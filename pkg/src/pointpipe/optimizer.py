"""Line-buffer minimization for a validated pipeline graph.

Schedules every stage's integer start cycle so that no stage ever waits on
data, while the summed capacity of all inter-stage line buffers is exactly
minimal. The model is a rate model: a stage active for D cycles consumes
tau_in unique elements per cycle starting at its start cycle, and emits
tau_out elements per cycle once its internal pipeline (depth ``stage``
cycles) has filled.

Per edge p -> c with volume V (= producer's output), write start
w_p = s_p + depth_p, write end e_p = w_p + V/tau_out:

- availability: an element is readable the cycle after it is written, so a
  local consumer needs ``w_c >= w_p + 1`` and the producer must stay ahead
  of the consumer's cumulative demand through the consumer's window; both
  collapse to two linear endpoint rows (the per-timestamp family they prune
  is emitted in unpruned mode).
- a global consumer starts only after the producer has written everything:
  ``s_c >= e_p``.
- buffer occupancy peaks either when overwriting starts (t_o) or when the
  producer stops writing, and never exceeds V; the exact peak is
  ``min(V, max(b1, b2))`` with b1 = tau_out*(t_o - w_p) and
  b2 = V - tau_in*(e_p - t_o). The min is encoded with one binary selector
  per local edge; global edges pin LB = V outright.

Overwrite may not begin before the consumer retires data: t_o is bounded
below by the consumer's first-read-capable cycle (w_c) on local edges and
by the consumer's completion (e_c) on global edges, and minimization drives
it to that bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, lcm

from .graph import GLOBAL, Edge, PipelineGraph
from . import solver
from .solver import Problem, solve_milp

_ZERO = Fraction(0)


class ScheduleError(Exception):
    """Scheduling failed (infeasible system or exhausted horizon)."""


def edge_key(e: Edge) -> str:
    return f"{e.producer}->{e.consumer}"


def _frac_to_json(x: Fraction) -> int | str:
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _frac_from_json(v: int | str) -> Fraction:
    return Fraction(v) if isinstance(v, int) else Fraction(v)


@dataclass
class _EdgeInfo:
    edge: Edge
    volume: int
    out_rate: Fraction       # producer write rate
    in_rate: Fraction        # consumer read rate
    depth_p: int
    depth_c: int
    dur_p: Fraction          # producer active cycles (volume / out_rate)
    dur_c: Fraction          # consumer active cycles (U_c / in_rate)
    drain: Fraction          # cycles to retire this edge's volume (V / in_rate)
    is_global: bool


def _edge_infos(graph: PipelineGraph) -> list[_EdgeInfo]:
    infos = []
    for e in graph.edges:
        p = graph.stage(e.producer)
        c = graph.stage(e.consumer)
        v = graph.edge_volume[e]
        out_rate = p.throughputs().tau_out
        in_rate = c.throughputs().tau_in
        infos.append(
            _EdgeInfo(
                edge=e,
                volume=v,
                out_rate=out_rate,
                in_rate=in_rate,
                depth_p=p.stage_depth,
                depth_c=c.stage_depth,
                dur_p=Fraction(v) / out_rate,
                dur_c=graph.duration[e.consumer],
                drain=Fraction(v) / in_rate,
                is_global=c.dependency_class == GLOBAL,
            )
        )
    return infos


def default_horizon(graph: PipelineGraph) -> int:
    """Start-cycle search window: 4x the summed active durations."""
    return ceil(4 * sum(graph.duration.values()))


def earliest_starts(graph: PipelineGraph, horizon: int) -> dict[str, int]:
    """Cascaded earliest feasible start per stage; error if past the horizon."""
    starts: dict[str, int] = {}
    infos = {i.edge: i for i in _edge_infos(graph)}
    for sid in graph.topo_order:
        lo = 0
        for e in graph.edges:
            if e.consumer != sid:
                continue
            info = infos[e]
            if info.is_global:
                gap = Fraction(info.depth_p) + info.dur_p
            else:
                gap_avail = Fraction(info.depth_p - info.depth_c + 1)
                # producer must reach V by the consumer's demand saturation
                gap_rate = (
                    info.dur_p + 1 + info.depth_p - info.depth_c - info.drain
                )
                gap = max(gap_avail, gap_rate)
            lo = max(lo, ceil(Fraction(starts[e.producer]) + gap))
        if lo > horizon:
            raise ScheduleError(
                f"stage {sid!r} cannot start before cycle {lo}, past horizon {horizon}; "
                "raise the horizon"
            )
        starts[sid] = lo
    return starts


@dataclass
class ConstraintSystem:
    """Linear rows over start cycles, overwrite starts, and buffer sizes."""

    graph: PipelineGraph
    pruned: bool
    horizon: int
    problem: Problem
    start_var: dict[str, int]
    overwrite_var: dict[Edge, int]
    buffer_var: dict[Edge, int]
    row_labels: list[str]

    @property
    def constraint_count(self) -> int:
        return len(self.row_labels)


def build_constraints(
    graph: PipelineGraph, pruned: bool = True, horizon: int | None = None
) -> ConstraintSystem:
    """Emit the schedule feasibility and buffer-size rows for ``graph``.

    Pruned mode emits only the two dependency endpoint rows per local edge;
    unpruned mode emits the full per-timestamp availability family over each
    consumer's read window (on a grid fine enough to hit every rate kink),
    which is equivalent but far larger. Buffer rows are the two peak
    branches in both modes.
    """
    if horizon is None:
        horizon = default_horizon(graph)
    earliest = earliest_starts(graph, horizon)  # raises if past the horizon

    infos = _edge_infos(graph)
    prob = Problem()
    labels: list[str] = []
    start_var: dict[str, int] = {}
    overwrite_var: dict[Edge, int] = {}
    buffer_var: dict[Edge, int] = {}

    for s in graph.stages:
        # The cascade bound is implied by the dependency rows; installing
        # it as a variable bound just tightens the relaxation.
        start_var[s.id] = prob.add_variable(
            f"start[{s.id}]", lower=earliest[s.id], upper=horizon, integer=True
        )
        labels.append(f"start-nonnegative[{s.id}]")

    # Large enough to disable a branch row anywhere in the bounded box.
    for info in infos:
        e = info.edge
        key = edge_key(e)
        sp = start_var[e.producer]
        sc = start_var[e.consumer]
        to_var = prob.add_variable(f"overwrite[{key}]", lower=0)
        lb_var = prob.add_variable(f"buffer[{key}]", lower=0, objective=1)
        overwrite_var[e] = to_var
        buffer_var[e] = lb_var

        v = Fraction(info.volume)
        w_p_const = Fraction(info.depth_p)          # w_p = s_p + depth_p
        e_p_const = w_p_const + info.dur_p          # e_p = s_p + depth_p + dur_p

        if info.is_global:
            # Consumer may not start until the producer finished writing.
            prob.add_ge({sc: 1, sp: -1}, e_p_const)
            labels.append(f"dep-global[{key}]")
            # Overwrite waits for the global consumer's completion.
            prob.add_ge(
                {to_var: 1, sc: -1}, Fraction(info.depth_c) + info.dur_c
            )
            labels.append(f"overwrite-start[{key}]")
            # Full buffering is forced; the peak is the whole volume.
            prob.add_ge({lb_var: 1}, v)
            labels.append(f"buffer-full[{key}]")
            continue

        # Availability boundary: first readable element appears one cycle
        # after the producer's first write.
        prob.add_ge({sc: 1, sp: -1}, Fraction(info.depth_p - info.depth_c + 1))
        labels.append(f"dep-start[{key}]")

        if pruned:
            # Window endpoint: supply covers the edge volume by the time the
            # consumer's cumulative demand saturates.
            rhs = v - info.out_rate * (
                Fraction(info.depth_c) + info.drain - 1 - w_p_const
            )
            prob.add_ge({sc: info.out_rate, sp: -info.out_rate}, rhs)
            labels.append(f"dep-end[{key}]")
        else:
            # Per-timestamp family over the consumer read window, offset s
            # from the consumer's start on a grid hitting every demand kink.
            grid = lcm(info.in_rate.denominator, info.drain.denominator)
            steps = int(info.drain * grid)
            for n in range(1, steps + 1):
                off = Fraction(info.depth_c) + Fraction(n, grid)
                demand = min(v, info.in_rate * (off - info.depth_c))
                rhs = demand - info.out_rate * (off - 1 - w_p_const)
                prob.add_ge({sc: info.out_rate, sp: -info.out_rate}, rhs)
                labels.append(f"dep-t[{key}]@{off}")

        # Overwrite may start once the consumer can retire data.
        prob.add_ge({to_var: 1, sc: -1}, Fraction(info.depth_c))
        labels.append(f"overwrite-start[{key}]")

        # Peak occupancy: min(V, max(b1, b2)) via a binary saturation
        # selector; both selections over-approximate the peak and their
        # minimum equals it, so minimization lands exactly on the peak.
        z_var = prob.add_variable(f"saturated[{key}]", lower=0, upper=1, integer=True)
        big_m = (
            max(info.out_rate, info.in_rate)
            * (horizon + info.depth_c + info.dur_c + info.dur_p + info.depth_p + 2)
            + v
            + 1
        )
        # b1 = out_rate * (t_o - w_p): occupancy when overwriting begins.
        prob.add_ge(
            {lb_var: 1, to_var: -info.out_rate, sp: info.out_rate, z_var: big_m},
            -info.out_rate * w_p_const,
        )
        labels.append(f"buffer-peak-at-overwrite[{key}]")
        # b2 = V - in_rate * (e_p - t_o): occupancy when writing ends.
        prob.add_ge(
            {lb_var: 1, to_var: -info.in_rate, sp: info.in_rate, z_var: big_m},
            v - info.in_rate * e_p_const,
        )
        labels.append(f"buffer-peak-at-write-end[{key}]")
        prob.add_ge({lb_var: 1, z_var: -v}, 0)
        labels.append(f"buffer-saturated[{key}]")
        # Redundant but selector-independent floor; keeps relaxation bounds
        # sharp while the selectors are still fractional.
        prob.variables[lb_var].lower = _edge_floor(info)

    return ConstraintSystem(
        graph=graph,
        pruned=pruned,
        horizon=horizon,
        problem=prob,
        start_var=start_var,
        overwrite_var=overwrite_var,
        buffer_var=buffer_var,
        row_labels=labels,
    )


def _min_edge_offset(info: _EdgeInfo) -> int:
    """Earliest feasible consumer-minus-producer start offset for one edge."""
    if info.is_global:
        return ceil(Fraction(info.depth_p) + info.dur_p)
    gap_avail = Fraction(info.depth_p - info.depth_c + 1)
    gap_rate = info.dur_p + 1 + info.depth_p - info.depth_c - info.drain
    return ceil(max(gap_avail, gap_rate))


def _edge_floor(info: _EdgeInfo) -> Fraction:
    """Peak occupancy at the earliest feasible offset: a valid lower bound
    on the edge's buffer in every feasible schedule, since the peak is
    nondecreasing in the consumer's start."""
    v = Fraction(info.volume)
    if info.is_global:
        return v
    offset = _min_edge_offset(info)
    t_o = Fraction(offset + info.depth_c)
    w_p = Fraction(info.depth_p)
    e_p = w_p + info.dur_p
    b1 = info.out_rate * (t_o - w_p)
    b2 = v - info.in_rate * (e_p - t_o)
    return max(_ZERO, min(v, max(b1, b2)))


def overwrite_start(graph: PipelineGraph, starts: dict[str, int], e: Edge) -> Fraction:
    """Earliest legal overwrite time for an edge under a start assignment."""
    c = graph.stage(e.consumer)
    if c.dependency_class == GLOBAL:
        return Fraction(starts[e.consumer] + c.stage_depth) + graph.duration[e.consumer]
    return Fraction(starts[e.consumer] + c.stage_depth)


def edge_peak(graph: PipelineGraph, starts: dict[str, int], e: Edge) -> Fraction:
    """Exact peak occupancy of one edge buffer under a start assignment."""
    p = graph.stage(e.producer)
    v = Fraction(graph.edge_volume[e])
    out_rate = p.throughputs().tau_out
    in_rate = graph.stage(e.consumer).throughputs().tau_in
    w_p = Fraction(starts[e.producer] + p.stage_depth)
    e_p = w_p + v / out_rate
    t_o = overwrite_start(graph, starts, e)
    b1 = out_rate * (t_o - w_p)
    b2 = v - in_rate * (e_p - t_o)
    return max(_ZERO, min(v, max(b1, b2)))


@dataclass
class ScheduleSolution:
    """Optimal start cycles plus the per-edge line-buffer allocation.

    Buffer sizes are exact rationals (integral for integer-rate pipelines).
    Multi-chunk fields are populated by ``schedule_chunks``.
    """

    start_cycles: dict[str, int]
    buffer_sizes: dict[str, Fraction]
    overwrite_starts: dict[str, Fraction]
    total_buffer: Fraction
    makespan: Fraction
    initiation_interval: Fraction | None = None
    bubbles: dict[str, Fraction] | None = None
    chunk_count: int = 1
    constraint_counts: dict[str, int] = field(default_factory=dict)
    horizon: int | None = None

    def to_json_dict(self, element_bytes: int | None = None) -> dict:
        doc: dict = {
            "start_cycles": dict(sorted(self.start_cycles.items())),
            "buffer_sizes": {k: _frac_to_json(v) for k, v in sorted(self.buffer_sizes.items())},
            "overwrite_starts": {
                k: _frac_to_json(v) for k, v in sorted(self.overwrite_starts.items())
            },
            "total_buffer": _frac_to_json(self.total_buffer),
            "makespan": _frac_to_json(self.makespan),
            "chunk_count": self.chunk_count,
            "constraint_counts": self.constraint_counts,
            "horizon": self.horizon,
        }
        if self.initiation_interval is not None:
            doc["initiation_interval"] = _frac_to_json(self.initiation_interval)
        if self.bubbles is not None:
            doc["bubbles"] = {k: _frac_to_json(v) for k, v in sorted(self.bubbles.items())}
        if element_bytes is not None:
            doc["element_bytes"] = element_bytes
            doc["buffer_bytes"] = {
                k: ceil(v) * element_bytes for k, v in sorted(self.buffer_sizes.items())
            }
            doc["total_buffer_bytes"] = sum(doc["buffer_bytes"].values())
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScheduleSolution":
        return cls(
            start_cycles={k: int(v) for k, v in doc["start_cycles"].items()},
            buffer_sizes={k: _frac_from_json(v) for k, v in doc["buffer_sizes"].items()},
            overwrite_starts={
                k: _frac_from_json(v) for k, v in doc["overwrite_starts"].items()
            },
            total_buffer=_frac_from_json(doc["total_buffer"]),
            makespan=_frac_from_json(doc["makespan"]),
            initiation_interval=(
                _frac_from_json(doc["initiation_interval"])
                if "initiation_interval" in doc
                else None
            ),
            bubbles=(
                {k: _frac_from_json(v) for k, v in doc["bubbles"].items()}
                if "bubbles" in doc
                else None
            ),
            chunk_count=doc.get("chunk_count", 1),
            constraint_counts=doc.get("constraint_counts", {}),
            horizon=doc.get("horizon"),
        )

    def dumps(self, element_bytes: int | None = None) -> str:
        return json.dumps(self.to_json_dict(element_bytes), indent=2, sort_keys=True) + "\n"


def _solution_from_starts(
    graph: PipelineGraph, starts: dict[str, int], system: ConstraintSystem
) -> ScheduleSolution:
    buffers: dict[str, Fraction] = {}
    overwrites: dict[str, Fraction] = {}
    for e in graph.edges:
        buffers[edge_key(e)] = edge_peak(graph, starts, e)
        overwrites[edge_key(e)] = overwrite_start(graph, starts, e)
    write_ends = [
        Fraction(starts[s.id] + s.stage_depth) + graph.duration[s.id]
        for s in graph.stages
    ]
    makespan = max(write_ends) - min(Fraction(v) for v in starts.values())
    return ScheduleSolution(
        start_cycles=dict(starts),
        buffer_sizes=buffers,
        overwrite_starts=overwrites,
        total_buffer=sum(buffers.values(), _ZERO),
        makespan=makespan,
        horizon=system.horizon,
    )


def solve(system: ConstraintSystem) -> ScheduleSolution:
    """Exact optimum of the buffer-minimization program.

    Among all optimal schedules, returns the one with the lexicographically
    smallest start-cycle vector (stage declaration order), so repeated
    solves are bit-identical.
    """
    graph = system.graph
    if not graph.edges:
        starts = {s.id: 0 for s in graph.stages}
        return _solution_from_starts(graph, starts, system)

    # Seed the search with the earliest-start schedule: feasible by
    # construction, so its total is a valid optimum cutoff.
    greedy = earliest_starts(graph, system.horizon)
    greedy_total = sum(
        (edge_peak(graph, greedy, e) for e in graph.edges), _ZERO
    )
    base = system.problem.copy()
    base.add_le(
        {system.buffer_var[e]: Fraction(1) for e in graph.edges}, greedy_total
    )
    sol = solve_milp(base)
    if sol.status != solver.OPTIMAL:
        raise ScheduleError(f"schedule optimization {sol.status}")
    assert sol.objective is not None
    optimum = sol.objective

    # Lexicographic tie-break: pin the optimum, then minimize each start in
    # declaration order, fixing as we go.
    fixed: dict[str, int] = {}
    for s in graph.stages:
        prob = base.copy()
        for v in prob.variables:
            v.objective = _ZERO
        prob.add_eq(
            {system.buffer_var[e]: Fraction(1) for e in graph.edges}, optimum
        )
        for sid, val in fixed.items():
            prob.add_eq({system.start_var[sid]: 1}, val)
        prob.variables[system.start_var[s.id]].objective = Fraction(1)
        step = solve_milp(prob)
        if step.status != solver.OPTIMAL:
            raise ScheduleError("lexicographic refinement failed unexpectedly")
        assert step.values is not None
        fixed[s.id] = int(step.values[system.start_var[s.id]])

    solution = _solution_from_starts(graph, fixed, system)
    if solution.total_buffer != optimum:
        raise ScheduleError(
            f"internal inconsistency: recomputed total {solution.total_buffer} "
            f"!= solver optimum {optimum}"
        )
    return solution


def optimize(
    graph: PipelineGraph, pruned: bool = True, horizon: int | None = None
) -> ScheduleSolution:
    """Build constraints, solve, and attach pruned/unpruned row counts."""
    chosen = build_constraints(graph, pruned=pruned, horizon=horizon)
    other = build_constraints(graph, pruned=not pruned, horizon=chosen.horizon)
    solution = solve(chosen)
    counts = {
        "pruned": chosen.constraint_count if pruned else other.constraint_count,
        "unpruned": other.constraint_count if pruned else chosen.constraint_count,
    }
    solution.constraint_counts = counts
    return solution


def schedule_chunks(
    solution: ScheduleSolution, graph: PipelineGraph, chunk_count: int
) -> ScheduleSolution:
    """Extend a single-chunk schedule to ``chunk_count`` back-to-back chunks.

    Chunk k of stage i starts at ``start_cycles[i] + k*interval``; the
    initiation interval is the longest stage duration, stretched if needed so
    saturated edges drain one chunk before the next one lands. Stages
    shorter than the interval idle for the difference at the top of every
    chunk; those are the reported bubbles. Per-edge peak occupancy is
    unchanged from the single-chunk solution.
    """
    if chunk_count < 1:
        raise ValueError("chunk_count must be >= 1")
    interval = max(graph.duration.values())
    for e in graph.edges:
        key = edge_key(e)
        p = graph.stage(e.producer)
        v = Fraction(graph.edge_volume[e])
        out_rate = p.throughputs().tau_out
        in_rate = graph.stage(e.consumer).throughputs().tau_in
        w_p = Fraction(solution.start_cycles[e.producer] + p.stage_depth)
        e_p = w_p + v / out_rate
        t_o = solution.overwrite_starts[key]
        if t_o >= e_p:
            # Saturated edge: the next chunk's writes must never outrun the
            # previous chunk's frees.
            need = (t_o - w_p) + max(_ZERO, v / in_rate - v / out_rate)
            interval = max(interval, need)

    bubbles = {
        s.id: interval - graph.duration[s.id] for s in graph.stages
    }
    return ScheduleSolution(
        start_cycles=dict(solution.start_cycles),
        buffer_sizes=dict(solution.buffer_sizes),
        overwrite_starts=dict(solution.overwrite_starts),
        total_buffer=solution.total_buffer,
        makespan=solution.makespan + (chunk_count - 1) * interval,
        initiation_interval=interval,
        bubbles=bubbles,
        chunk_count=chunk_count,
        constraint_counts=dict(solution.constraint_counts),
        horizon=solution.horizon,
    )
