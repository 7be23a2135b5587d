"""Token-level checker for pipeline schedules.

Moves counted tokens, not point data: each stage writes at its output rate
once its pipeline depth has filled, and each edge buffer frees tokens at the
consumer's read rate from the edge's overwrite-start time. All bookkeeping
is exact rational arithmetic evaluated at every breakpoint of the piecewise
linear token curves, so measured peaks, stalls, and overflows are exact
rather than sampled.

The three per-edge cumulative curves:

- writes(t):  producer output landing in the buffer
- demand(t):  tokens the consumer must have been able to read by t; a token
  written at cycle x is readable from cycle x+1
- frees(t):   tokens retired (overwritable), never ahead of writes

A stall is any instant where demand exceeds readable supply; an overflow is
any instant where writes - frees exceeds the edge's allocated capacity. A
consumer of Global kind must not start before its producer finishes
writing; that check replaces the rate comparison on such edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil

from .graph import GLOBAL, Edge, PipelineGraph
from .optimizer import ScheduleSolution, edge_key

_ZERO = Fraction(0)


def _clamp(x: Fraction, lo: Fraction, hi: Fraction) -> Fraction:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class EdgeCurves:
    """Closed-form token curves for one edge under one chunk's schedule."""

    key: str
    volume: Fraction
    out_rate: Fraction
    in_rate: Fraction
    write_start: Fraction      # producer start + producer depth
    write_end: Fraction
    demand_start: Fraction     # consumer start + consumer depth
    overwrite_start: Fraction
    consumer_start: Fraction
    is_global: bool

    def writes(self, t: Fraction) -> Fraction:
        return _clamp(self.out_rate * (t - self.write_start), _ZERO, self.volume)

    def readable(self, t: Fraction) -> Fraction:
        # One-cycle write-to-read latency.
        return _clamp(self.out_rate * (t - 1 - self.write_start), _ZERO, self.volume)

    def demand(self, t: Fraction) -> Fraction:
        return _clamp(self.in_rate * (t - self.demand_start), _ZERO, self.volume)

    def frees(self, t: Fraction) -> Fraction:
        raw = _clamp(self.in_rate * (t - self.overwrite_start), _ZERO, self.volume)
        return min(self.writes(t), raw)

    def occupancy(self, t: Fraction) -> Fraction:
        return self.writes(t) - self.frees(t)

    @property
    def drain_end(self) -> Fraction:
        return self.overwrite_start + self.volume / self.in_rate

    def occupancy_kinks(self) -> list[Fraction]:
        pts = [
            self.write_start,
            self.write_end,
            self.overwrite_start,
            self.drain_end,
        ]
        # The write clamp on frees can add sign-change roots of
        # writes - raw_frees between known kinks.
        pts = sorted(set(pts))
        roots: list[Fraction] = []
        for a, b in zip(pts, pts[1:]):
            fa = self.writes(a) - self.in_rate * (a - self.overwrite_start)
            fb = self.writes(b) - self.in_rate * (b - self.overwrite_start)
            if (fa < 0 < fb) or (fb < 0 < fa):
                roots.append(a + (b - a) * fa / (fa - fb))
        return sorted(set(pts + roots))

    def stall_kinks(self) -> list[Fraction]:
        return sorted(
            {
                self.write_start + 1,
                self.write_end + 1,
                self.demand_start,
                self.demand_start + self.volume / self.in_rate,
            }
        )


def edge_curves(
    graph: PipelineGraph,
    starts: dict[str, int],
    e: Edge,
    overwrite: Fraction | None = None,
    shift: Fraction = _ZERO,
) -> EdgeCurves:
    """Curves for ``e`` under ``starts``, optionally time-shifted (chunks)."""
    p = graph.stage(e.producer)
    c = graph.stage(e.consumer)
    v = Fraction(graph.edge_volume[e])
    out_rate = p.throughputs().tau_out
    in_rate = c.throughputs().tau_in
    w_p = Fraction(starts[e.producer] + p.stage_depth)
    w_c = Fraction(starts[e.consumer] + c.stage_depth)
    if overwrite is None:
        overwrite = w_c + graph.duration[e.consumer] if c.dependency_class == GLOBAL else w_c
    return EdgeCurves(
        key=edge_key(e),
        volume=v,
        out_rate=out_rate,
        in_rate=in_rate,
        write_start=w_p + shift,
        write_end=w_p + v / out_rate + shift,
        demand_start=w_c + shift,
        overwrite_start=overwrite + shift,
        consumer_start=Fraction(starts[e.consumer]) + shift,
        is_global=c.dependency_class == GLOBAL,
    )


def edge_stall_margin(curves: EdgeCurves) -> tuple[Fraction, Fraction]:
    """(worst margin, time of worst margin); negative margin means a stall."""
    if curves.is_global:
        # Everything must be written before the consumer activates.
        margin = curves.writes(curves.consumer_start) - curves.volume
        return margin, curves.consumer_start
    worst = None
    worst_t = curves.demand_start
    for t in curves.stall_kinks():
        m = curves.readable(t) - curves.demand(t)
        if worst is None or m < worst:
            worst = m
            worst_t = t
    assert worst is not None
    return worst, worst_t


@dataclass
class StallEvent:
    cycle: int
    stage: str
    cause: str


@dataclass
class OverflowEvent:
    cycle: int
    edge: str
    occupancy: Fraction
    capacity: Fraction


@dataclass
class SimTrace:
    """Exact per-edge occupancy record of one run."""

    edge_order: list[str]
    peaks: dict[str, Fraction]
    capacities: dict[str, Fraction]
    stall_events: list[StallEvent]
    overflow_events: list[OverflowEvent]
    completion_cycle: int
    makespan: Fraction
    chunk_completions: list[Fraction]
    first_read: dict[str, int]
    first_output: dict[str, int]
    written_total: dict[str, Fraction]
    freed_total: dict[str, Fraction]
    _curves: dict[str, list[EdgeCurves]] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return not self.stall_events and not self.overflow_events

    def occupancy_at(self, key: str, t: Fraction | int) -> Fraction:
        t = Fraction(t)
        return sum((c.occupancy(t) for c in self._curves[key]), _ZERO)

    def sample_rows(self, stride: int = 1):
        """Yield (cycle, edge, occupancy) rows at integer cycles."""
        for cyc in range(0, self.completion_cycle + 1, stride):
            for key in self.edge_order:
                yield cyc, key, self.occupancy_at(key, cyc)

    def summary_dict(self) -> dict:
        from .optimizer import _frac_to_json

        return {
            "peaks": {k: _frac_to_json(v) for k, v in sorted(self.peaks.items())},
            "capacities": {k: _frac_to_json(v) for k, v in sorted(self.capacities.items())},
            "stalls": [
                {"cycle": s.cycle, "stage": s.stage, "cause": s.cause}
                for s in self.stall_events
            ],
            "overflows": [
                {
                    "cycle": o.cycle,
                    "edge": o.edge,
                    "occupancy": _frac_to_json(o.occupancy),
                    "capacity": _frac_to_json(o.capacity),
                }
                for o in self.overflow_events
            ],
            "completion_cycle": self.completion_cycle,
            "makespan": _frac_to_json(self.makespan),
            "chunk_completions": [_frac_to_json(c) for c in self.chunk_completions],
            "first_read": dict(sorted(self.first_read.items())),
            "first_output": dict(sorted(self.first_output.items())),
            "ok": self.ok,
        }


def simulate(
    graph: PipelineGraph,
    solution: ScheduleSolution,
    chunk_count: int = 1,
) -> SimTrace:
    """Run the token model and record stalls, overflows, and exact peaks.

    Violations are reported in the trace, never raised. ``chunk_count > 1``
    requires the solution's initiation interval (see ``schedule_chunks``).
    """
    if chunk_count > 1 and solution.initiation_interval is None:
        raise ValueError("multi-chunk simulation needs a chunked schedule")
    interval = solution.initiation_interval or _ZERO
    starts = solution.start_cycles

    stall_events: list[StallEvent] = []
    overflow_events: list[OverflowEvent] = []
    peaks: dict[str, Fraction] = {}
    written: dict[str, Fraction] = {}
    freed: dict[str, Fraction] = {}
    curves_by_key: dict[str, list[EdgeCurves]] = {}
    end_of_run = _ZERO

    for e in graph.edges:
        key = edge_key(e)
        overwrite = solution.overwrite_starts.get(key)
        chunk_curves = [
            edge_curves(graph, starts, e, overwrite=overwrite, shift=k * interval)
            for k in range(chunk_count)
        ]
        curves_by_key[key] = chunk_curves

        for k, cur in enumerate(chunk_curves):
            margin, when = edge_stall_margin(cur)
            if margin < 0:
                cause = (
                    "producer incomplete at global consumer start"
                    if cur.is_global
                    else "consumer demand outruns readable supply"
                )
                stall_events.append(
                    StallEvent(cycle=ceil(when), stage=e.consumer, cause=cause)
                )

        scan = sorted({t for cur in chunk_curves for t in cur.occupancy_kinks()})
        peak = _ZERO
        peak_t = _ZERO
        for t in scan:
            occ = sum((cur.occupancy(t) for cur in chunk_curves), _ZERO)
            if occ > peak:
                peak = occ
                peak_t = t
        peaks[key] = peak

        capacity = solution.buffer_sizes.get(key)
        if capacity is not None and peak > capacity:
            overflow_events.append(
                OverflowEvent(
                    cycle=ceil(peak_t), edge=key, occupancy=peak, capacity=capacity
                )
            )

        quiesce = max(cur.drain_end for cur in chunk_curves)
        end_of_run = max(end_of_run, quiesce)
        written[key] = sum((cur.writes(quiesce) for cur in chunk_curves), _ZERO)
        freed[key] = sum((cur.frees(quiesce) for cur in chunk_curves), _ZERO)

    first_read: dict[str, int] = {}
    first_output: dict[str, int] = {}
    write_ends: list[Fraction] = []
    for s in graph.stages:
        w = Fraction(starts[s.id] + s.stage_depth)
        first_read[s.id] = starts[s.id] + 1
        first_output[s.id] = ceil(w + 1 / s.throughputs().tau_out)
        write_ends.append(w + graph.duration[s.id])
    chunk_completions = [
        max(write_ends) + k * interval for k in range(chunk_count)
    ]
    makespan = chunk_completions[-1] - min(Fraction(v) for v in starts.values())
    end_of_run = max(end_of_run, chunk_completions[-1])

    return SimTrace(
        edge_order=[edge_key(e) for e in graph.edges],
        peaks=peaks,
        capacities={
            k: v for k, v in solution.buffer_sizes.items()
        },
        stall_events=sorted(stall_events, key=lambda s: (s.cycle, s.stage)),
        overflow_events=sorted(overflow_events, key=lambda o: (o.cycle, o.edge)),
        completion_cycle=ceil(end_of_run),
        makespan=makespan,
        chunk_completions=chunk_completions,
        first_read=first_read,
        first_output=first_output,
        written_total=written,
        freed_total=freed,
        _curves=curves_by_key,
    )


def peak_occupancy(trace: SimTrace) -> dict[str, Fraction]:
    """Per-edge maximum buffer occupancy over the whole run."""
    return dict(trace.peaks)


# -- banked on-chip memory model ----------------------------------------------

STALL_POLICY = "stall"
ELIDE_POLICY = "elide"


@dataclass(frozen=True)
class BankModel:
    """Word-interleaved banking: element i lives in bank i mod bank_count,
    one access granted per bank per cycle."""

    bank_count: int
    ports_per_bank: int = 1

    def __post_init__(self) -> None:
        if self.bank_count < 1:
            raise ValueError("bank_count must be >= 1")
        if self.ports_per_bank != 1:
            raise ValueError("only single-ported banks are modeled")

    def bank_of(self, element: int) -> int:
        return element % self.bank_count


@dataclass
class BankAccessLog:
    """Per-cycle grant/deny record for a set of access streams."""

    grants: list[tuple[int, int, int]]    # (cycle, agent, element)
    denials: list[tuple[int, int, int]]
    cycles: int


def simulate_banked(
    accesses: list[list[int]], model: BankModel, policy: str = STALL_POLICY
) -> BankAccessLog:
    """Arbitrate per-agent element-access streams over banked memory.

    On a conflict the lowest-numbered agent wins. Under the stall policy a
    denied agent retries the same access next cycle; under the elide policy
    it skips it (the search kernels interpret a skip as bypassing the
    subtree beneath the conflicted node).
    """
    if policy not in (STALL_POLICY, ELIDE_POLICY):
        raise ValueError(f"unknown policy {policy!r}")
    cursors = [0] * len(accesses)
    grants: list[tuple[int, int, int]] = []
    denials: list[tuple[int, int, int]] = []
    cycle = 0
    while any(c < len(stream) for c, stream in zip(cursors, accesses)):
        taken: dict[int, int] = {}
        for agent, stream in enumerate(accesses):
            if cursors[agent] >= len(stream):
                continue
            element = stream[cursors[agent]]
            bank = model.bank_of(element)
            if bank not in taken:
                taken[bank] = agent
                grants.append((cycle, agent, element))
                cursors[agent] += 1
            else:
                denials.append((cycle, agent, element))
                if policy == ELIDE_POLICY:
                    cursors[agent] += 1
        cycle += 1
    return BankAccessLog(grants=grants, denials=denials, cycles=cycle)
