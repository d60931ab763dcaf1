"""Capacity-constrained execution of a workflow over a cohort.

Patients arrive in daily batches.  Within one day every node sees its whole
inflow before it acts, so a resource with capacity ``k`` admits at most
``k`` patients per day and turns the rest away along its ``rejected`` edge.
Nothing carries over between days, which lets each node process every day
of the horizon in one vectorised pass.

Randomness is drawn per node: node ``j`` owns a stream seeded from
``(seed, j)`` that yields one uniform per cohort position.  A patient's
draw therefore does not depend on who else reached the node, so results
are independent of evaluation order and comparable across configurations
(common random numbers).
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .cohort import Cohort, Patient
from .workflow import (
    DiseaseState,
    Outcome,
    ScoreGuard,
    ServiceOrder,
    UtilityTable,
    WorkflowError,
    WorkflowGraph,
    optimal_outcome,
    validate_workflow,
)

__all__ = [
    "Strategy",
    "SimConfig",
    "SimResult",
    "DegenerateBaselines",
    "CohortEmpty",
    "simulate",
    "select_ranked",
    "select_thresholded",
    "relative_utility",
    "find_optimal_cutoff",
    "derive_seed",
]


class Strategy(str, enum.Enum):
    RANKED = "ranked"
    THRESHOLDED = "thresholded"
    DOCTOR_ALERT = "doctor_alert"
    TREAT_NONE = "treat_none"
    TREAT_ALL = "treat_all"
    OPTIMISTIC = "optimistic"


BASELINES = (Strategy.TREAT_NONE, Strategy.TREAT_ALL, Strategy.OPTIMISTIC)


class DegenerateBaselines(ValueError):
    """The optimistic scenario adds no utility over treating nobody."""


class CohortEmpty(ValueError):
    pass


def derive_seed(root: int, *keys: int) -> int:
    """64-bit seed that depends only on ``root`` and the integer ``keys``."""
    seq = np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SimConfig:
    """One simulation arm.

    ``cutoff``, ``alert_read_prob`` and ``referral_cutoff`` are only read
    by workflows that refer to them by name; ``referral_cutoff`` falls
    back to ``cutoff``.  Baseline strategies keep the arm's parameters and
    replace only the model's scores.
    """

    strategy: Strategy = Strategy.RANKED
    nurse_capacity: int = 3
    specialist_capacity: int = 2
    cutoff: float = 0.0
    alert_read_prob: float = 1.0
    referral_cutoff: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        for name in ("nurse_capacity", "specialist_capacity"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))
        for name in ("cutoff", "alert_read_prob", "referral_cutoff"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def parameters(self) -> dict[str, float | int]:
        return {
            "nurse_capacity": self.nurse_capacity,
            "specialist_capacity": self.specialist_capacity,
            "cutoff": self.cutoff,
            "alert_read_prob": self.alert_read_prob,
            "referral_cutoff": self.cutoff if self.referral_cutoff is None else self.referral_cutoff,
        }

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimResult:
    strategy: Strategy
    mean_utility: float
    outcome_counts: Mapping[tuple[DiseaseState, Outcome], int]
    resource_utilization: Mapping[str, float]
    patients_seen_by_specialist: int
    n_patients: int
    relative_utility: float | None = None
    treat_none_utility: float | None = None
    optimistic_utility: float | None = None
    config: SimConfig | None = field(default=None, compare=False)

    def recomputed_mean_utility(self, utilities: UtilityTable) -> float:
        return _mean_from_counts(self.outcome_counts, utilities.as_matrix(), self.n_patients)


def relative_utility(u_model: float, u_none: float, u_optimistic: float) -> float:
    """Share (percent) of the optimistic gain over Treat None that was realised."""
    if not u_optimistic > u_none:
        raise DegenerateBaselines(
            f"optimistic utility {u_optimistic} does not exceed treat-none utility {u_none}"
        )
    return 100.0 * (u_model - u_none) / (u_optimistic - u_none)


# --------------------------------------------------------------------------
# single-batch selection rules


def select_ranked(batch: Sequence[Patient], k: int) -> list[Patient]:
    """The ``k`` highest-scoring patients, highest first; ties go to the lower id."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return sorted(batch, key=lambda p: (-p.risk_score, p.id))[:k]


def select_thresholded(
    batch: Sequence[Patient], k: int, cutoff: float, rng: np.random.Generator
) -> list[Patient]:
    """Uniform random ``min(k, m)`` of the ``m`` patients scoring above ``cutoff``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    eligible = [p for p in batch if p.risk_score > cutoff]
    take = min(k, len(eligible))
    picks = rng.choice(len(eligible), size=take, replace=False) if take else []
    return [eligible[i] for i in picks]


# --------------------------------------------------------------------------
# engine

_OPS = {">": operator.gt, ">=": operator.ge, "<": operator.lt, "<=": operator.le}


def _resolve(value, params: Mapping[str, float]):
    return params[value] if isinstance(value, str) else value


def _rank_within_day(days_sorted: np.ndarray) -> np.ndarray:
    first = np.searchsorted(days_sorted, days_sorted, side="left")
    return np.arange(len(days_sorted)) - first


def _mean_from_counts(counts, matrix: np.ndarray, n: int) -> float:
    total = 0.0
    for (s, o), c in sorted(counts.items()):
        total += c * matrix[int(s), int(o)]
    return total / n


def _counts(state: np.ndarray, outcome: np.ndarray) -> dict[tuple[DiseaseState, Outcome], int]:
    flat = np.bincount(state.astype(np.int64) * 3 + outcome, minlength=9)
    return {(s, o): int(flat[int(s) * 3 + int(o)]) for s in DiseaseState for o in Outcome}


class _Run:
    def __init__(self, graph: WorkflowGraph, utilities: UtilityTable, cohort: Cohort, params, seed: int):
        self.graph = graph
        self.cohort = cohort
        self.params = params
        self.seed = seed
        self.best = np.array([int(optimal_outcome(utilities, s)) for s in DiseaseState])
        self.utilization: dict[str, float] = {}
        self.seen = 0

    def uniforms(self, node_index: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(node_index,)))
        return rng.random(len(self.cohort))

    def execute(self) -> np.ndarray:
        g, c = self.graph, self.cohort
        day, score, ids = c.arrival_day, c.risk_score, c.ids
        outcome = np.full(len(c), -1, dtype=np.int64)
        inbox: dict[str, list[np.ndarray]] = {n.id: [] for n in g.nodes}
        inbox[g.start].append(np.lexsort((ids, day)))

        for j, nid in enumerate(g.topological_order()):
            node = g.node(nid)
            chunks = inbox.pop(nid)
            idx = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
            idx = idx[np.argsort(day[idx], kind="stable")]  # arrival order within each day
            out = g.out_edges(nid)

            if node.kind == "terminal":
                outcome[idx] = self.best[c.true_state[idx]] if node.optimal else int(node.outcome)
                if node.optimal:
                    self.seen += len(idx)
            elif node.kind == "start":
                inbox[out[0].target].append(idx)
            elif node.kind == "resource":
                admitted, rejected = self._admit(node, j, idx)
                for e in out:
                    inbox[e.target].append(admitted if e.guard.admitted else rejected)
            else:
                guard = out[0].guard
                if isinstance(guard, ScoreGuard):
                    for e in out:
                        thr = _resolve(e.guard.threshold, self.params)
                        inbox[e.target].append(idx[_OPS[e.guard.op](score[idx], thr)])
                else:
                    p = _resolve(guard.probability, self.params)
                    hit = self.uniforms(j)[idx] < p
                    for e in out:
                        inbox[e.target].append(idx[hit] if e.guard.value else idx[~hit])

        if (outcome < 0).any():
            raise WorkflowError("some patients never reached a terminal node")
        return outcome

    def _admit(self, node, j: int, idx: np.ndarray):
        c = self.cohort
        cap = int(_resolve(node.capacity, self.params))
        day = c.arrival_day[idx]
        if node.service_order is ServiceOrder.BY_RISK_DESCENDING:
            order = np.lexsort((c.ids[idx], -c.risk_score[idx], day))
        elif node.service_order is ServiceOrder.RANDOM_SUBSET:
            order = np.lexsort((c.ids[idx], self.uniforms(j)[idx], day))
        else:
            order = np.arange(len(idx))  # already in arrival order
        ordered = idx[order]
        keep = _rank_within_day(day[order]) < cap
        admitted = ordered[keep]
        slots = cap * c.horizon_days
        self.utilization[node.id] = len(admitted) / slots if slots else 0.0
        return admitted, ordered[~keep]


def _check(graph: WorkflowGraph, utilities: UtilityTable, config: SimConfig) -> None:
    report = validate_workflow(graph, utilities, config.parameters())
    if not report.ok:
        raise WorkflowError("UnvalidatedWorkflow: " + "; ".join(str(e) for e in report.errors))
    missing = utilities.missing_cells()
    if missing:
        raise WorkflowError(f"UnvalidatedWorkflow: utility table is missing {missing}")


def _simulate_arm(graph, utilities, cohort: Cohort, config: SimConfig) -> SimResult:
    matrix = utilities.as_matrix()
    n = len(cohort)
    if config.strategy is Strategy.OPTIMISTIC:
        best = np.array([int(optimal_outcome(utilities, s)) for s in DiseaseState])
        outcome = best[cohort.true_state]
        utilization: dict[str, float] = {}
        seen = n
    else:
        run_cohort = cohort
        if config.strategy is Strategy.TREAT_NONE:
            run_cohort = cohort.with_scores(0.0)
        elif config.strategy is Strategy.TREAT_ALL:
            run_cohort = cohort.with_scores(1.0)
        run = _Run(graph, utilities, run_cohort, config.parameters(), config.seed)
        outcome = run.execute()
        utilization, seen = run.utilization, run.seen
    counts = _counts(cohort.true_state, outcome)
    return SimResult(
        strategy=config.strategy,
        mean_utility=_mean_from_counts(counts, matrix, n),
        outcome_counts=counts,
        resource_utilization=dict(utilization),
        patients_seen_by_specialist=int(seen),
        n_patients=n,
        config=config,
    )


def simulate(
    graph: WorkflowGraph,
    utilities: UtilityTable,
    cohort: Cohort | Sequence[Patient],
    config: SimConfig,
    baselines: bool = True,
) -> SimResult:
    """Run one arm; with ``baselines`` the Treat None and Optimistic runs are
    made on the same cohort and seed and the relative utility is attached."""
    cohort = Cohort.from_patients(cohort)
    if len(cohort) == 0:
        raise CohortEmpty("cohort has no patients")
    _check(graph, utilities, config)
    result = _simulate_arm(graph, utilities, cohort, config)
    if not baselines:
        return result

    none = result if config.strategy is Strategy.TREAT_NONE else _simulate_arm(
        graph, utilities, cohort, config.with_(strategy=Strategy.TREAT_NONE))
    best = result if config.strategy is Strategy.OPTIMISTIC else _simulate_arm(
        graph, utilities, cohort, config.with_(strategy=Strategy.OPTIMISTIC))
    try:
        rel = relative_utility(result.mean_utility, none.mean_utility, best.mean_utility)
    except DegenerateBaselines:
        rel = None
    return replace(
        result,
        relative_utility=rel,
        treat_none_utility=none.mean_utility,
        optimistic_utility=best.mean_utility,
    )


def find_optimal_cutoff(
    graph: WorkflowGraph,
    utilities: UtilityTable,
    cohort: Cohort | Sequence[Patient],
    base_config: SimConfig,
    candidate_cutoffs: Sequence[float],
    replicates: int = 1,
) -> tuple[float, SimResult]:
    """Cutoff with the highest mean relative utility over ``replicates`` seeds.

    Replicate ``r`` uses seed ``derive_seed(base_config.seed, r)`` for every
    candidate.  Ties go to the lowest cutoff.  The returned result is the
    winning cutoff's first replicate.
    """
    if not candidate_cutoffs:
        raise ValueError("candidate_cutoffs is empty")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    best = None
    for cutoff in sorted(set(float(c) for c in candidate_cutoffs)):
        runs = [
            simulate(graph, utilities, cohort, base_config.with_(cutoff=cutoff, seed=derive_seed(base_config.seed, r)))
            for r in range(replicates)
        ]
        if any(r.relative_utility is None for r in runs):
            raise DegenerateBaselines("cohort gives identical treat-none and optimistic utility")
        score = float(np.mean([r.relative_utility for r in runs]))
        if best is None or score > best[0]:
            best = (score, cutoff, runs[0])
    return best[1], best[2]
