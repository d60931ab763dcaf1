import pytest

from wfsim import (
    PAD_UTILITIES,
    BernoulliGuard,
    DiseaseState as S,
    Edge,
    Node,
    Outcome as O,
    ResourceGuard,
    ScoreGuard,
    ServiceOrder,
    UtilityTable,
    WorkflowError,
    WorkflowGraph,
    doctor_workflow,
    lookup_utility,
    nurse_workflow,
    optimal_outcome,
    validate_workflow,
)


def simple_graph(**over):
    nodes = over.pop("nodes", (
        Node("start", "start"),
        Node("d", "decision"),
        Node("r", "resource", capacity=1, service_order=ServiceOrder.ARRIVAL_ORDER),
        Node("ok", "terminal", outcome=None),
        Node("no", "terminal", outcome=O.UNTREATED),
    ))
    edges = over.pop("edges", (
        Edge("start", "d"),
        Edge("d", "r", ScoreGuard(">", 0.5)),
        Edge("d", "no", ScoreGuard("<=", 0.5)),
        Edge("r", "ok", ResourceGuard(True)),
        Edge("r", "no", ResourceGuard(False)),
    ))
    return WorkflowGraph(nodes, edges)


def test_pad_values():
    assert lookup_utility(PAD_UTILITIES, S.NO_DISEASE, O.MEDICATION) == 0.95
    assert lookup_utility(PAD_UTILITIES, S.NO_DISEASE, O.UNTREATED) == 1.0
    assert lookup_utility(PAD_UTILITIES, S.SEVERE, O.UNTREATED) == 0.6
    assert not PAD_UTILITIES.missing_cells()


def test_optimal_outcomes():
    assert optimal_outcome(PAD_UTILITIES, S.NO_DISEASE) is O.UNTREATED
    assert optimal_outcome(PAD_UTILITIES, S.MODERATE) is O.MEDICATION
    assert optimal_outcome(PAD_UTILITIES, S.SEVERE) is O.SURGERY


def test_optimal_tie_goes_least_invasive():
    t = PAD_UTILITIES.replace({(S.SEVERE, O.MEDICATION): 0.68})
    assert optimal_outcome(t, S.SEVERE) is O.MEDICATION
    flat = UtilityTable({(s, o): 0.5 for s in S for o in O})
    assert all(optimal_outcome(flat, s) is O.UNTREATED for s in S)


def test_utility_range_checked():
    with pytest.raises(ValueError):
        PAD_UTILITIES.replace({(S.SEVERE, O.SURGERY): 1.2})


@pytest.mark.parametrize("graph", [nurse_workflow("ranked"), nurse_workflow("thresholded"), doctor_workflow()])
def test_builtin_workflows_validate(graph):
    rep = validate_workflow(graph, PAD_UTILITIES)
    assert rep.ok, rep.format()
    assert {w.code for w in rep.warnings} == {"ExtrapolatedUtility"}


def test_unreachable_terminal():
    g = simple_graph(nodes=simple_graph().nodes + (Node("orphan", "terminal", outcome=O.SURGERY),))
    rep = validate_workflow(g, PAD_UTILITIES)
    assert "UnreachableNode" in rep.codes()
    assert any(e.where == "orphan" for e in rep.errors)


def test_missing_utility_cell():
    rep = validate_workflow(nurse_workflow(), PAD_UTILITIES.without(S.SEVERE, O.MEDICATION))
    assert "MissingUtilityCell" in rep.codes()
    assert any(e.where == "SEVERE,MEDICATION" for e in rep.errors)


def test_start_errors():
    g = simple_graph()
    no_start = WorkflowGraph(tuple(n for n in g.nodes if n.kind != "start"), g.edges[1:])
    assert "NoStart" in validate_workflow(no_start, PAD_UTILITIES).codes()
    two = WorkflowGraph(g.nodes + (Node("s2", "start"),), g.edges + (Edge("s2", "d"),))
    assert "MultipleStart" in validate_workflow(two, PAD_UTILITIES).codes()


def test_cycle_is_non_terminating():
    g = simple_graph(edges=(
        Edge("start", "d"),
        Edge("d", "r", ScoreGuard(">", 0.5)),
        Edge("d", "no", ScoreGuard("<=", 0.5)),
        Edge("r", "d", ResourceGuard(True)),
        Edge("r", "no", ResourceGuard(False)),
    ))
    assert "NonTerminatingPath" in validate_workflow(g, PAD_UTILITIES).codes()
    with pytest.raises(WorkflowError):
        g.topological_order()


def test_dead_end_is_non_terminating():
    g = simple_graph(nodes=simple_graph().nodes + (Node("dead", "decision"),),
                     edges=simple_graph().edges[:-1] + (Edge("r", "dead", ResourceGuard(False)),))
    assert "NonTerminatingPath" in validate_workflow(g, PAD_UTILITIES).codes()


def test_negative_capacity():
    base = simple_graph()
    nodes = tuple(Node("r", "resource", capacity=-1, service_order=ServiceOrder.ARRIVAL_ORDER) if n.id == "r" else n
                  for n in base.nodes)
    assert "NegativeCapacity" in validate_workflow(WorkflowGraph(nodes, base.edges), PAD_UTILITIES).codes()
    # a named capacity is resolved against the supplied parameters
    rep = validate_workflow(nurse_workflow(), PAD_UTILITIES,
                            {"nurse_capacity": -2, "specialist_capacity": 2, "cutoff": 0.5})
    assert "NegativeCapacity" in rep.codes()


@pytest.mark.parametrize("guards", [
    (ScoreGuard(">", 0.5), ScoreGuard("<", 0.5)),       # misses score == 0.5
    (ScoreGuard(">", 0.5), ScoreGuard("<=", 0.4)),      # different thresholds
    (BernoulliGuard("p", True), BernoulliGuard("p", True)),
    (BernoulliGuard("p", True), BernoulliGuard("q", False)),
    (ScoreGuard(">", 0.5), BernoulliGuard("p", False)),
])
def test_non_exhaustive_guards(guards):
    g = simple_graph(edges=(
        Edge("start", "d"),
        Edge("d", "r", guards[0]),
        Edge("d", "no", guards[1]),
        Edge("r", "ok", ResourceGuard(True)),
        Edge("r", "no", ResourceGuard(False)),
    ))
    assert "NonExhaustiveGuards" in validate_workflow(g, PAD_UTILITIES).codes()


def test_unknown_parameter_and_node():
    rep = validate_workflow(nurse_workflow(), PAD_UTILITIES, {"nurse_capacity": 1, "specialist_capacity": 1})
    assert "UnknownParameter" in rep.codes()
    g = simple_graph(edges=simple_graph().edges + (Edge("r", "ghost", None),))
    assert "UnknownNode" in validate_workflow(g, PAD_UTILITIES).codes()


def test_validation_is_pure():
    g = doctor_workflow()
    assert validate_workflow(g, PAD_UTILITIES) == validate_workflow(g, PAD_UTILITIES)


def test_topological_order_starts_at_start():
    order = nurse_workflow().topological_order()
    assert order[0] == "visit"
    assert order.index("nurse") < order.index("specialist") < order.index("treated")
