"""Dataflow graph for streaming point-cloud pipelines.

A pipeline is an ordered DAG of stages. Each stage declares its input/output
shape and frequency, its input reuse pattern, and its pipeline depth; from
those the per-stage consume/produce rates follow. Every producer->consumer
edge carries one line buffer whose capacity is sized by the optimizer.

All rate arithmetic is exact (``fractions.Fraction``); no floats enter any
derivation here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable


class PipelineError(Exception):
    """Base class for pipeline description problems."""


class ParseError(PipelineError):
    """Malformed pipeline document (syntax or schema)."""


class ValidationError(PipelineError):
    """Structurally parsed but semantically invalid pipeline."""


class StageKind(Enum):
    ELEMENTWISE = "Elementwise"
    STENCIL = "Stencil"
    REDUCTION = "Reduction"
    GLOBAL = "Global"


LOCAL = "local"
GLOBAL = "global"


@dataclass(frozen=True)
class Shape:
    """2-D payload shape: a block of `rows` points with `attrs` values each."""

    rows: int
    attrs: int

    def __post_init__(self) -> None:
        if not (isinstance(self.rows, int) and isinstance(self.attrs, int)):
            raise ValidationError(f"shape fields must be integers, got {self!r}")
        if self.rows < 1 or self.attrs < 1:
            raise ValidationError(f"shape dimensions must be >= 1, got {self!r}")

    @property
    def elements(self) -> int:
        return self.rows * self.attrs


@dataclass(frozen=True)
class Throughputs:
    """Exact per-cycle consume/produce rates of one stage.

    ``tau_in`` counts unique input elements per cycle (reuse divided out),
    ``tau_out`` counts output elements per cycle.
    """

    tau_in: Fraction
    tau_out: Fraction

    def __post_init__(self) -> None:
        if self.tau_in <= 0 or self.tau_out <= 0:
            raise ValidationError(f"throughputs must be positive, got {self!r}")


@dataclass(frozen=True)
class StageSpec:
    """One pipeline stage.

    ``i_freq``/``o_freq`` are cycles per read/write burst. ``reuse`` gives the
    per-dimension input reuse factor (meaningful for stencils; all-ones
    elsewhere). ``stage_depth`` is the stage's internal pipeline depth in
    cycles: the first output trails the first read by this much.
    """

    id: str
    kind: StageKind
    i_shape: Shape
    o_shape: Shape
    i_freq: int = 1
    o_freq: int = 1
    reuse: tuple[int, int] = (1, 1)
    stage_depth: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("stage id must be a non-empty string")
        if self.i_freq < 1 or self.o_freq < 1:
            raise ValidationError(f"stage {self.id!r}: frequencies must be >= 1")
        if len(self.reuse) != 2 or any(r < 1 for r in self.reuse):
            raise ValidationError(
                f"stage {self.id!r}: reuse must be a pair of positive integers"
            )
        if self.stage_depth < 0:
            raise ValidationError(f"stage {self.id!r}: stage depth must be >= 0")
        if self.kind in (StageKind.ELEMENTWISE, StageKind.REDUCTION):
            if self.reuse != (1, 1):
                raise ValidationError(
                    f"stage {self.id!r}: {self.kind.value} stages take reuse [1, 1]"
                )

    @property
    def dependency_class(self) -> str:
        return GLOBAL if self.kind is StageKind.GLOBAL else LOCAL

    @property
    def reuse_total(self) -> int:
        # Reuse scales unique-input consumption for stencils only.
        if self.kind is StageKind.STENCIL:
            return self.reuse[0] * self.reuse[1]
        return 1

    def throughputs(self) -> Throughputs:
        tau_in = Fraction(self.i_shape.elements, self.reuse_total * self.i_freq)
        tau_out = Fraction(self.o_shape.elements, self.o_freq)
        return Throughputs(tau_in=tau_in, tau_out=tau_out)


@dataclass(frozen=True)
class Edge:
    producer: str
    consumer: str


@dataclass
class PipelineGraph:
    """Validated stage DAG plus derived per-stage work and rates.

    Derived quantities (filled by ``validate``):

    - ``input_volume[s]``: unique input elements stage ``s`` consumes per chunk
    - ``work[s]``: output elements stage ``s`` produces per chunk (integral)
    - ``duration[s]``: active cycles, ``input_volume/tau_in == work/tau_out``
    - ``edge_volume[e]``: elements transported over edge ``e`` (the producer's
      full output; multi-consumer producers broadcast)
    """

    stages: list[StageSpec]
    edges: list[Edge]
    input_work: int

    topo_order: list[str] = field(default_factory=list, repr=False)
    input_volume: dict[str, int] = field(default_factory=dict, repr=False)
    work: dict[str, int] = field(default_factory=dict, repr=False)
    duration: dict[str, Fraction] = field(default_factory=dict, repr=False)
    edge_volume: dict[Edge, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.validate()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PipelineGraph):
            return NotImplemented
        return (
            self.stages == other.stages
            and self.edges == other.edges
            and self.input_work == other.input_work
        )

    # -- structure ---------------------------------------------------------

    def stage(self, stage_id: str) -> StageSpec:
        return self._by_id[stage_id]

    def producers_of(self, stage_id: str) -> list[str]:
        return [e.producer for e in self.edges if e.consumer == stage_id]

    def consumers_of(self, stage_id: str) -> list[str]:
        return [e.consumer for e in self.edges if e.producer == stage_id]

    @property
    def sources(self) -> list[str]:
        has_in = {e.consumer for e in self.edges}
        return [s.id for s in self.stages if s.id not in has_in]

    def validate(self) -> None:
        if self.input_work < 1:
            raise ValidationError("input_work must be >= 1")
        if not self.stages:
            raise ValidationError("pipeline needs at least one stage")
        ids = [s.id for s in self.stages]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate stage ids")
        self._by_id = {s.id: s for s in self.stages}
        for e in self.edges:
            for endpoint in (e.producer, e.consumer):
                if endpoint not in self._by_id:
                    raise ValidationError(f"edge references undeclared stage {endpoint!r}")
            if e.producer == e.consumer:
                raise ValidationError(f"self edge on stage {e.producer!r}")
        if len(set(self.edges)) != len(self.edges):
            raise ValidationError("duplicate edge")

        self.topo_order = self._toposort()
        self._derive()

    def _toposort(self) -> list[str]:
        indeg = {s.id: 0 for s in self.stages}
        for e in self.edges:
            indeg[e.consumer] += 1
        # Kahn's algorithm, declaration order as the tie break.
        order: list[str] = []
        ready = [s.id for s in self.stages if indeg[s.id] == 0]
        while ready:
            sid = ready.pop(0)
            order.append(sid)
            for e in self.edges:
                if e.producer == sid:
                    indeg[e.consumer] -= 1
                    if indeg[e.consumer] == 0:
                        ready.append(e.consumer)
        if len(order) != len(self.stages):
            raise ValidationError("pipeline graph contains a cycle")
        return order

    # -- derived work ------------------------------------------------------

    def _derive(self) -> None:
        """Propagate work totals through the DAG in exact arithmetic.

        Sources consume the external input (``input_work`` elements each).
        A stage active for D cycles consumes U = D * tau_in unique elements
        and produces W = D * tau_out, so W = U * tau_out / tau_in. Every W
        must land on an integer or the description is rejected.
        """
        self.input_volume = {}
        self.work = {}
        self.duration = {}
        self.edge_volume = {}
        for sid in self.topo_order:
            spec = self._by_id[sid]
            producers = self.producers_of(sid)
            if producers:
                volume = sum(self.work[p] for p in producers)
            else:
                volume = self.input_work
            t = spec.throughputs()
            w = Fraction(volume) * t.tau_out / t.tau_in
            if w.denominator != 1:
                raise ValidationError(
                    f"stage {sid!r}: derived work {w} is not an integer "
                    f"(input volume {volume}, tau_in {t.tau_in}, tau_out {t.tau_out})"
                )
            if w <= 0:
                raise ValidationError(f"stage {sid!r}: derived work must be positive")
            self.input_volume[sid] = volume
            self.work[sid] = int(w)
            self.duration[sid] = Fraction(volume) / t.tau_in
        for e in self.edges:
            self.edge_volume[e] = self.work[e.producer]


def derive_work(graph: PipelineGraph) -> dict[str, int]:
    """Per-stage output-element totals for one chunk."""
    return dict(graph.work)


# -- pipeline description files ---------------------------------------------

_STAGE_KEYS = {"id", "kind", "i_shape", "o_shape", "i_freq", "o_freq", "reuse", "stage"}
_TOP_KEYS = {"input_work", "stages", "edges"}


def _as_shape(value: object, where: str) -> Shape:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ParseError(f"{where}: shape must be a [rows, attrs] pair of integers")
    return Shape(rows=value[0], attrs=value[1])


def _as_int(value: object, where: str, minimum: int = 0) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ParseError(f"{where}: expected an integer >= {minimum}")
    return value


def parse_pipeline(document: str) -> PipelineGraph:
    """Parse and validate a JSON pipeline description.

    Raises ``ParseError`` with line/column for malformed JSON or schema
    violations, ``ValidationError`` for semantic problems (dangling edges,
    non-integer derived work, ...).
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ParseError("top-level document must be an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown top-level keys: {sorted(unknown)}")
    for key in _TOP_KEYS:
        if key not in data:
            raise ParseError(f"missing required key {key!r}")

    input_work = _as_int(data["input_work"], "input_work", minimum=1)

    if not isinstance(data["stages"], list):
        raise ParseError("'stages' must be a list")
    stages = []
    for idx, raw in enumerate(data["stages"]):
        where = f"stages[{idx}]"
        if not isinstance(raw, dict):
            raise ParseError(f"{where}: stage must be an object")
        unknown = set(raw) - _STAGE_KEYS
        if unknown:
            raise ParseError(f"{where}: unknown keys: {sorted(unknown)}")
        for key in ("id", "kind", "i_shape", "o_shape", "stage"):
            if key not in raw:
                raise ParseError(f"{where}: missing required key {key!r}")
        if not isinstance(raw["id"], str):
            raise ParseError(f"{where}: id must be a string")
        try:
            kind = StageKind(raw["kind"])
        except ValueError:
            known = ", ".join(k.value for k in StageKind)
            raise ParseError(
                f"{where}: unknown stage kind {raw['kind']!r} (expected one of {known})"
            ) from None
        reuse_raw = raw.get("reuse", [1, 1])
        if (
            not isinstance(reuse_raw, list)
            or len(reuse_raw) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in reuse_raw)
        ):
            raise ParseError(f"{where}: reuse must be a pair of integers")
        try:
            stages.append(
                StageSpec(
                    id=raw["id"],
                    kind=kind,
                    i_shape=_as_shape(raw["i_shape"], where),
                    o_shape=_as_shape(raw["o_shape"], where),
                    i_freq=_as_int(raw.get("i_freq", 1), f"{where}.i_freq", minimum=1),
                    o_freq=_as_int(raw.get("o_freq", 1), f"{where}.o_freq", minimum=1),
                    reuse=(reuse_raw[0], reuse_raw[1]),
                    stage_depth=_as_int(raw["stage"], f"{where}.stage", minimum=0),
                )
            )
        except ValidationError as exc:
            raise ParseError(f"{where}: {exc}") from exc

    if not isinstance(data["edges"], list):
        raise ParseError("'edges' must be a list")
    edges = []
    for idx, raw in enumerate(data["edges"]):
        if not isinstance(raw, list) or len(raw) != 2 or not all(isinstance(v, str) for v in raw):
            raise ParseError(f"edges[{idx}]: edge must be a [producer, consumer] pair")
        edges.append(Edge(producer=raw[0], consumer=raw[1]))

    return PipelineGraph(stages=stages, edges=edges, input_work=input_work)


def serialize_pipeline(graph: PipelineGraph) -> str:
    """Canonical JSON for a graph; ``parse_pipeline`` round-trips it exactly."""
    stages = []
    for s in graph.stages:
        rec: dict[str, object] = {
            "id": s.id,
            "kind": s.kind.value,
            "i_shape": [s.i_shape.rows, s.i_shape.attrs],
            "o_shape": [s.o_shape.rows, s.o_shape.attrs],
            "stage": s.stage_depth,
        }
        if s.i_freq != 1:
            rec["i_freq"] = s.i_freq
        if s.o_freq != 1:
            rec["o_freq"] = s.o_freq
        if s.reuse != (1, 1):
            rec["reuse"] = list(s.reuse)
        stages.append(rec)
    doc = {
        "input_work": graph.input_work,
        "stages": stages,
        "edges": [[e.producer, e.consumer] for e in graph.edges],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_pipeline(path: str) -> PipelineGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_pipeline(fh.read())


def check_duration_identity(graph: PipelineGraph) -> None:
    """Assert U/tau_in == W/tau_out for every stage (exact)."""
    for s in graph.stages:
        t = s.throughputs()
        lhs = Fraction(graph.input_volume[s.id]) / t.tau_in
        rhs = Fraction(graph.work[s.id]) / t.tau_out
        if lhs != rhs:
            raise ValidationError(f"stage {s.id!r}: duration identity violated")
