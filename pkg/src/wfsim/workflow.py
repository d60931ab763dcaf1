"""Workflow state machines and the utility semantics of their end states.

A workflow is a small directed acyclic graph.  Patients enter at the single
start node, pass through decision nodes (guarded by a score threshold or a
Bernoulli draw) and capacity-limited resource nodes, and stop at a terminal
node that fixes their treatment outcome.  A terminal may instead be marked
``optimal``: whoever reaches it receives the best outcome for their true
disease state, which is how a specialist visit is represented.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Union

__all__ = [
    "DiseaseState",
    "Outcome",
    "ServiceOrder",
    "UtilityTable",
    "PAD_UTILITIES",
    "Node",
    "Edge",
    "ScoreGuard",
    "BernoulliGuard",
    "ResourceGuard",
    "WorkflowGraph",
    "ValidationIssue",
    "ValidationReport",
    "WorkflowError",
    "validate_workflow",
    "lookup_utility",
    "optimal_outcome",
    "nurse_workflow",
    "doctor_workflow",
]


class DiseaseState(enum.IntEnum):
    NO_DISEASE = 0
    MODERATE = 1
    SEVERE = 2


class Outcome(enum.IntEnum):
    # Integer order doubles as the tie-break order: least invasive first.
    UNTREATED = 0
    MEDICATION = 1
    SURGERY = 2


class ServiceOrder(str, enum.Enum):
    BY_RISK_DESCENDING = "by_risk_descending"
    ARRIVAL_ORDER = "arrival_order"
    RANDOM_SUBSET = "random_subset"


class WorkflowError(ValueError):
    """Raised when a workflow or utility table is used before it validates."""


@dataclass(frozen=True)
class UtilityTable:
    """Quality-of-life multiplier for every (true state, outcome) pair.

    ``extrapolated`` names the cells whose value is a modelling default
    rather than a sourced estimate; they are reported as warnings by
    :func:`validate_workflow`.
    """

    values: Mapping[tuple[DiseaseState, Outcome], float]
    extrapolated: frozenset = frozenset()

    def __post_init__(self):
        cleaned = {}
        for (state, outcome), value in dict(self.values).items():
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise ValueError(
                    f"utility for ({DiseaseState(state).name}, {Outcome(outcome).name}) "
                    f"must lie in [0, 1], got {value}"
                )
            cleaned[(DiseaseState(state), Outcome(outcome))] = value
        object.__setattr__(self, "values", cleaned)
        object.__setattr__(self, "extrapolated", frozenset(self.extrapolated))

    def missing_cells(self) -> list[tuple[DiseaseState, Outcome]]:
        return [
            (s, o) for s in DiseaseState for o in Outcome if (s, o) not in self.values
        ]

    def without(self, state: DiseaseState, outcome: Outcome) -> "UtilityTable":
        values = {k: v for k, v in self.values.items() if k != (state, outcome)}
        return UtilityTable(values, self.extrapolated - {(state, outcome)})

    def replace(self, updates: Mapping[tuple[DiseaseState, Outcome], float]) -> "UtilityTable":
        values = dict(self.values)
        values.update(updates)
        return UtilityTable(values, self.extrapolated - set(updates))

    def as_matrix(self):
        """3x3 array indexed ``[state, outcome]``; requires a complete table."""
        import numpy as np

        missing = self.missing_cells()
        if missing:
            raise WorkflowError(f"utility table is missing cells {missing}")
        out = np.empty((len(DiseaseState), len(Outcome)))
        for (s, o), v in self.values.items():
            out[int(s), int(o)] = v
        return out


_D, _O = DiseaseState, Outcome

PAD_UTILITIES = UtilityTable(
    {
        (_D.NO_DISEASE, _O.UNTREATED): 1.0,
        (_D.NO_DISEASE, _O.MEDICATION): 0.95,
        (_D.NO_DISEASE, _O.SURGERY): 0.7,
        (_D.MODERATE, _O.UNTREATED): 0.85,
        (_D.MODERATE, _O.MEDICATION): 0.9,
        (_D.MODERATE, _O.SURGERY): 0.68,
        (_D.SEVERE, _O.UNTREATED): 0.6,
        # severe disease without surgery, medicated or not
        (_D.SEVERE, _O.MEDICATION): 0.6,
        (_D.SEVERE, _O.SURGERY): 0.68,
    },
    extrapolated=frozenset({(_D.MODERATE, _O.SURGERY), (_D.SEVERE, _O.MEDICATION)}),
)


def lookup_utility(table: UtilityTable, state: DiseaseState, outcome: Outcome) -> float:
    return table.values[(DiseaseState(state), Outcome(outcome))]


def optimal_outcome(table: UtilityTable, state: DiseaseState) -> Outcome:
    """Best outcome for ``state``; ties go to the least invasive option."""
    best = None
    for outcome in Outcome:  # ascending invasiveness, strict > keeps the first max
        u = lookup_utility(table, state, outcome)
        if best is None or u > best[1]:
            best = (outcome, u)
    return best[0]


# --------------------------------------------------------------------------
# graph model

Number = Union[int, float]
ParamRef = Union[str, Number]


@dataclass(frozen=True)
class ScoreGuard:
    op: str  # one of > >= < <=
    threshold: ParamRef

    _OPS = (">", ">=", "<", "<=")
    _COMPLEMENT = {">": "<=", ">=": "<", "<": ">=", "<=": ">"}

    def __post_init__(self):
        if self.op not in self._OPS:
            raise ValueError(f"score guard op must be one of {self._OPS}, got {self.op!r}")


@dataclass(frozen=True)
class BernoulliGuard:
    probability: ParamRef
    value: bool


@dataclass(frozen=True)
class ResourceGuard:
    admitted: bool


Guard = Union[ScoreGuard, BernoulliGuard, ResourceGuard, None]


@dataclass(frozen=True)
class Node:
    id: str
    kind: str  # start | decision | resource | terminal
    capacity: ParamRef | None = None
    service_order: ServiceOrder | None = None
    outcome: Outcome | None = None  # terminal only; None means optimal treatment
    label: str = ""

    KINDS = ("start", "decision", "resource", "terminal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"node {self.id!r}: unknown kind {self.kind!r}")
        if self.service_order is not None:
            object.__setattr__(self, "service_order", ServiceOrder(self.service_order))
        if self.outcome is not None:
            object.__setattr__(self, "outcome", Outcome(self.outcome))

    @property
    def optimal(self) -> bool:
        return self.kind == "terminal" and self.outcome is None


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: Guard = None


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.target == node_id]

    @property
    def start(self) -> str:
        starts = [n.id for n in self.nodes if n.kind == "start"]
        if len(starts) != 1:
            raise WorkflowError(f"expected exactly one start node, found {len(starts)}")
        return starts[0]

    def topological_order(self) -> list[str]:
        """Kahn order preserving declaration order among ready nodes."""
        indeg = {n.id: 0 for n in self.nodes}
        for e in self.edges:
            if e.target in indeg:
                indeg[e.target] += 1
        ready = deque(n.id for n in self.nodes if indeg[n.id] == 0)
        order = []
        while ready:
            nid = ready.popleft()
            order.append(nid)
            for e in self.out_edges(nid):
                if e.target in indeg:
                    indeg[e.target] -= 1
                    if indeg[e.target] == 0:
                        ready.append(e.target)
        if len(order) != len(self.nodes):
            raise WorkflowError("workflow graph contains a cycle")
        return order

    def parameters(self) -> set[str]:
        """Names of configuration parameters the graph refers to."""
        names = set()
        for n in self.nodes:
            if isinstance(n.capacity, str):
                names.add(n.capacity)
        for e in self.edges:
            g = e.guard
            if isinstance(g, ScoreGuard) and isinstance(g.threshold, str):
                names.add(g.threshold)
            elif isinstance(g, BernoulliGuard) and isinstance(g.probability, str):
                names.add(g.probability)
        return names


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    where: str
    message: str

    def __str__(self):
        return f"{self.code} [{self.where}]: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...] = ()
    warnings: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> list[str]:
        return [e.code for e in self.errors]

    def format(self) -> str:
        lines = ["status: " + ("ok" if self.ok else "invalid")]
        lines += [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _guard_issues(graph: WorkflowGraph, node: Node) -> list[ValidationIssue]:
    out = graph.out_edges(node.id)
    guards = [e.guard for e in out]
    bad = lambda msg: [ValidationIssue("NonExhaustiveGuards", node.id, msg)]  # noqa: E731

    if node.kind == "terminal":
        if out:
            return [ValidationIssue("NonTerminatingPath", node.id, "terminal node has outgoing edges")]
        return []
    if not out:
        return [ValidationIssue("NonTerminatingPath", node.id, f"{node.kind} node has no outgoing edge")]

    if node.kind == "start":
        if len(out) != 1 or guards[0] is not None:
            return bad("start node needs exactly one unguarded edge")
        return []

    if node.kind == "resource":
        kinds = sorted((g.admitted for g in guards if isinstance(g, ResourceGuard)))
        if len(out) != 2 or kinds != [False, True]:
            return bad("resource node needs exactly one admitted and one rejected edge")
        return []

    # decision
    if len(out) != 2:
        return bad("decision node needs exactly two guarded edges")
    a, b = guards
    if isinstance(a, ScoreGuard) and isinstance(b, ScoreGuard):
        if a.threshold != b.threshold or ScoreGuard._COMPLEMENT[a.op] != b.op:
            return bad(f"score guards {a.op} {a.threshold!r} / {b.op} {b.threshold!r} do not partition the scores")
        return []
    if isinstance(a, BernoulliGuard) and isinstance(b, BernoulliGuard):
        if a.probability != b.probability or a.value == b.value:
            return bad("Bernoulli guards must share a probability and cover true and false")
        return []
    return bad("decision guards must be two score guards or two Bernoulli guards")


def validate_workflow(
    graph: WorkflowGraph,
    utilities: UtilityTable,
    parameters: Mapping[str, object] | None = None,
) -> ValidationReport:
    """Check the structural invariants of ``graph`` against ``utilities``.

    ``parameters``, when given, is the set of configuration values the
    graph's named capacities/thresholds resolve against; unknown names and
    negative capacities are then reported too.
    """
    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    ids = [n.id for n in graph.nodes]
    id_set = set(ids)

    for nid in sorted({i for i in ids if ids.count(i) > 1}):
        errors.append(ValidationIssue("DuplicateNode", nid, "node id declared more than once"))
    for e in graph.edges:
        for end in (e.source, e.target):
            if end not in id_set:
                errors.append(ValidationIssue("UnknownNode", f"{e.source}->{e.target}", f"edge refers to undeclared node {end!r}"))

    starts = [n.id for n in graph.nodes if n.kind == "start"]
    if not starts:
        errors.append(ValidationIssue("NoStart", "graph", "no start node"))
    elif len(starts) > 1:
        errors.append(ValidationIssue("MultipleStart", ",".join(starts), "more than one start node"))
    for s in starts:
        if graph.in_edges(s):
            errors.append(ValidationIssue("NonTerminatingPath", s, "start node has inbound edges"))

    if len(starts) == 1:
        seen = {starts[0]}
        queue = deque(seen)
        while queue:
            nid = queue.popleft()
            for e in graph.out_edges(nid):
                if e.target in id_set and e.target not in seen:
                    seen.add(e.target)
                    queue.append(e.target)
        for n in graph.nodes:
            if n.id not in seen:
                errors.append(ValidationIssue("UnreachableNode", n.id, "not reachable from the start node"))

    try:
        graph.topological_order()
    except WorkflowError:
        errors.append(ValidationIssue("NonTerminatingPath", "graph", "cycle detected; some paths never terminate"))

    for n in graph.nodes:
        errors.extend(_guard_issues(graph, n))
        if n.kind == "resource":
            cap = n.capacity
            if isinstance(cap, str) and parameters is not None:
                cap = parameters.get(cap, cap)
            if cap is None:
                errors.append(ValidationIssue("NegativeCapacity", n.id, "resource has no capacity"))
            elif not isinstance(cap, str) and (int(cap) != cap or cap < 0):
                errors.append(ValidationIssue("NegativeCapacity", n.id, f"capacity must be a non-negative integer, got {cap}"))
            if n.service_order is None:
                errors.append(ValidationIssue("MissingServiceOrder", n.id, "resource has no service order"))

    if parameters is not None:
        for name in sorted(graph.parameters()):
            if name not in parameters:
                errors.append(ValidationIssue("UnknownParameter", name, "graph refers to an unknown configuration parameter"))

    terminal_outcomes = set()
    for n in graph.nodes:
        if n.kind == "terminal":
            terminal_outcomes.update(Outcome if n.optimal else [n.outcome])
    for state in DiseaseState:
        for outcome in sorted(terminal_outcomes):
            if (state, outcome) not in utilities.values:
                errors.append(ValidationIssue("MissingUtilityCell", f"{state.name},{outcome.name}", "utility not defined"))
    for state, outcome in sorted(utilities.extrapolated):
        warnings.append(ValidationIssue("ExtrapolatedUtility", f"{state.name},{outcome.name}", "default value is an extrapolation, not a sourced estimate"))

    return ValidationReport(tuple(errors), tuple(warnings))


# --------------------------------------------------------------------------
# built-in PAD screening workflows


def nurse_workflow(strategy: str = "ranked") -> WorkflowGraph:
    """Central nursing team reviews the day's predictions and refers to a specialist.

    ``ranked``: nurses take the top ``nurse_capacity`` patients by score and
    the specialist sees referrals highest-risk first.  ``thresholded``: a
    uniform random ``nurse_capacity`` of the patients scoring above
    ``cutoff``; the specialist sees them in arrival order.
    """
    if strategy not in ("ranked", "thresholded"):
        raise ValueError(f"unknown nurse strategy {strategy!r}")
    ranked = strategy == "ranked"
    nurse_order = ServiceOrder.BY_RISK_DESCENDING if ranked else ServiceOrder.RANDOM_SUBSET
    spec_order = ServiceOrder.BY_RISK_DESCENDING if ranked else ServiceOrder.ARRIVAL_ORDER
    nodes = (
        Node("visit", "start", label="Patient visits clinic"),
        Node("flag", "decision", label="Model score above cutoff?"),
        Node("nurse", "resource", capacity="nurse_capacity", service_order=nurse_order, label="Nurse review"),
        Node("specialist", "resource", capacity="specialist_capacity", service_order=spec_order, label="Specialist visit"),
        Node("treated", "terminal", outcome=None, label="Specialist treats optimally"),
        Node("untreated", "terminal", outcome=Outcome.UNTREATED, label="Untreated"),
    )
    edges = (
        Edge("visit", "flag"),
        Edge("flag", "nurse", ScoreGuard(">", "cutoff")),
        Edge("flag", "untreated", ScoreGuard("<=", "cutoff")),
        Edge("nurse", "specialist", ResourceGuard(True)),
        Edge("nurse", "untreated", ResourceGuard(False)),
        Edge("specialist", "treated", ResourceGuard(True)),
        Edge("specialist", "untreated", ResourceGuard(False)),
    )
    return WorkflowGraph(nodes, edges, name=f"nurse_{strategy}")


def doctor_workflow() -> WorkflowGraph:
    """Real-time EHR alert to the attending physician.

    An alert fires when the score is at least ``cutoff``.  The physician
    reads it with probability ``alert_read_prob``; a read alert scoring at
    least ``referral_cutoff`` goes to the specialist, otherwise the
    physician prescribes medication.
    """
    nodes = (
        Node("visit", "start", label="Patient visits clinic"),
        Node("alert", "decision", label="Alert fires?"),
        Node("read", "decision", label="Physician reads alert?"),
        Node("judge", "decision", label="Refer or treat?"),
        Node("specialist", "resource", capacity="specialist_capacity",
             service_order=ServiceOrder.ARRIVAL_ORDER, label="Specialist visit"),
        Node("treated", "terminal", outcome=None, label="Specialist treats optimally"),
        Node("medication", "terminal", outcome=Outcome.MEDICATION, label="Physician prescribes medication"),
        Node("untreated", "terminal", outcome=Outcome.UNTREATED, label="Untreated"),
    )
    edges = (
        Edge("visit", "alert"),
        Edge("alert", "read", ScoreGuard(">=", "cutoff")),
        Edge("alert", "untreated", ScoreGuard("<", "cutoff")),
        Edge("read", "judge", BernoulliGuard("alert_read_prob", True)),
        Edge("read", "untreated", BernoulliGuard("alert_read_prob", False)),
        Edge("judge", "specialist", ScoreGuard(">=", "referral_cutoff")),
        Edge("judge", "medication", ScoreGuard("<", "referral_cutoff")),
        Edge("specialist", "treated", ResourceGuard(True)),
        Edge("specialist", "untreated", ResourceGuard(False)),
    )
    return WorkflowGraph(nodes, edges, name="doctor_alert")
