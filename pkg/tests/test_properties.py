import itertools

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from wfsim import (
    PERTURBABLE,
    Binormal,
    Cohort,
    CohortSpec,
    DiseaseState as S,
    FinancialModel,
    LabeledPrediction,
    ObservationWindow,
    Outcome as O,
    PAD_UTILITIES,
    SimConfig,
    Strategy,
    TrialArm,
    UtilityTable,
    allocate_arms,
    auroc,
    binormal_auroc,
    build_baseline,
    calibrate_separation,
    check_drift,
    doctor_workflow,
    generate_cohort,
    lookup_utility,
    nurse_workflow,
    optimal_outcome,
    project_cashflow,
    sensitivity_analysis,
    simulate,
    time_stratified_sensitivity,
)

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def cohorts(draw):
    n_day = draw(st.integers(1, 15))
    days = draw(st.integers(1, 6))
    n = n_day * days
    state = draw(st.lists(st.sampled_from([0, 1, 2]), min_size=n, max_size=n))
    # coarse grid so ties in score occur
    score = draw(st.lists(st.integers(0, 10).map(lambda k: k / 10), min_size=n, max_size=n))
    return Cohort(np.arange(n), state, score, np.repeat(np.arange(days), n_day), days)


configs = st.builds(
    SimConfig,
    nurse_capacity=st.integers(0, 6),
    specialist_capacity=st.integers(0, 6),
    cutoff=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]),
    alert_read_prob=st.sampled_from([0.0, 0.3, 0.7, 1.0]),
    seed=st.integers(0, 2**32),
)
arms = st.sampled_from([
    (nurse_workflow("ranked"), Strategy.RANKED),
    (nurse_workflow("thresholded"), Strategy.THRESHOLDED),
    (doctor_workflow(), Strategy.DOCTOR_ALERT),
])


def brute(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    return sum(1.0 if p > q else 0.5 if p == q else 0.0 for p, q in itertools.product(pos, neg)) / (len(pos) * len(neg))


@FAST
@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), min_size=2, max_size=80))
def test_auroc_equals_brute_force(pairs):
    pairs = [(0, True), (0, False)] + pairs
    s = [p[0] / 20 for p in pairs]
    l = [p[1] for p in pairs]
    assert auroc(s, l) == brute(s, l)


@FAST
@given(st.floats(0.5, 0.999))
def test_calibration_inverts(a):
    assert abs(binormal_auroc(calibrate_separation(a)) - a) < 1e-9


@FAST
@given(st.lists(st.floats(0, 1), min_size=9, max_size=9))
def test_optimal_outcome_maximises(vals):
    t = UtilityTable({(s, o): vals[3 * s + o] for s in S for o in O})
    for s in S:
        best = optimal_outcome(t, s)
        us = [lookup_utility(t, s, o) for o in O]
        assert us[best] == max(us)
        assert best == us.index(max(us))  # first maximum, i.e. least invasive


@FAST
@given(cohorts(), configs, arms)
def test_simulation_invariants(cohort, cfg, arm):
    graph, strat = arm
    cfg = cfg.with_(strategy=strat)
    res = simulate(graph, PAD_UTILITIES, cohort, cfg)
    assert sum(res.outcome_counts.values()) == len(cohort)
    assert abs(res.recomputed_mean_utility(PAD_UTILITIES) - res.mean_utility) < 1e-12
    assert res.patients_seen_by_specialist <= cfg.specialist_capacity * cohort.horizon_days
    assert all(0 <= u <= 1 for u in res.resource_utilization.values())
    assert simulate(graph, PAD_UTILITIES, cohort, cfg) == res
    if res.relative_utility is not None:
        none = simulate(graph, PAD_UTILITIES, cohort, cfg.with_(strategy=Strategy.TREAT_NONE))
        best = simulate(graph, PAD_UTILITIES, cohort, cfg.with_(strategy=Strategy.OPTIMISTIC))
        assert none.relative_utility == 0.0
        assert abs(best.relative_utility - 100.0) < 1e-9
        assert -1e-9 <= res.relative_utility <= 100.0 + 1e-9


@FAST
@given(cohorts(), st.integers(0, 6), st.sampled_from([0.0, 0.3, 0.6]))
def test_ranked_monotone(cohort, spec_cap, cutoff):
    vals = [simulate(nurse_workflow(), PAD_UTILITIES, cohort,
                     SimConfig(nurse_capacity=k, specialist_capacity=spec_cap, cutoff=cutoff), baselines=False).mean_utility
            for k in range(8)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


@FAST
@given(st.integers(0, 2**40))
def test_cohort_seeded(seed):
    spec = CohortSpec(5, 3, classifier=Binormal(1.0), seed=seed)
    assert generate_cohort(spec).equals(generate_cohort(spec))


@FAST
@given(st.lists(st.integers(-50, 50), min_size=2, max_size=20), st.integers(-100, 100), st.sampled_from([0.5, 1.0, 2.0]))
def test_drift_strict_inequality(base, obs, thr):
    b = build_baseline({"m": base})
    ref = b.get("m")
    alert = check_drift(ObservationWindow("m", (obs,), "i"), b, thr)
    diff = abs(obs - ref.mean)
    if ref.std == 0:
        assert (alert is not None) == (diff != 0)
    else:
        assert (alert is not None) == (diff > thr * ref.std)


record = st.builds(
    lambda pid, pos, ev, t, h: LabeledPrediction(str(pid), pos, ev, t if ev else None, h),
    st.integers(0, 10**6), st.booleans(), st.booleans(), st.integers(0, 365), st.integers(0, 400),
)


@FAST
@given(st.lists(record, max_size=30), st.integers(0, 200))
def test_sensitivity_monotone_in_horizon(recs, extra):
    edges = (0, 90, 180, 270, 365)
    later = [LabeledPrediction(r.patient_id, r.predicted_positive, r.event_observed, r.time_to_event, r.analysis_horizon + extra)
             for r in recs]
    a = time_stratified_sensitivity(recs, edges)
    b = time_stratified_sensitivity(later, edges)
    assert all(y.events >= x.events and y.detected >= x.detected for x, y in zip(a, b))


@FAST
@given(st.lists(st.integers(), unique=True, max_size=40), st.sampled_from(list(TrialArm)), st.randoms())
def test_allocation_alternates(ids, first, rnd):
    arms_ = allocate_arms(ids, first)
    counts = [sum(1 for v in arms_.values() if v is a) for a in TrialArm]
    assert abs(counts[0] - counts[1]) <= 1
    # assignment depends only on position in the evaluation order
    shuffled = list(ids)
    rnd.shuffle(shuffled)
    other = allocate_arms(shuffled, first)
    assert [arms_[i] for i in ids] == [other[i] for i in shuffled]


money = st.floats(0, 1e4)
frac = st.floats(0, 1)
models = st.builds(
    FinancialModel, horizon_years=st.integers(1, 8), volume_y0=st.floats(0, 1e5), volume_growth=frac,
    retention_rate=frac, flag_rate=frac, ppv=frac, revenue_per_true_positive=money, revenue_per_false_positive=money,
    cost_fixed_y0=st.floats(0, 1e6), cost_maintenance=money, cost_per_intervention=money,
    operating_cost_rate=frac, inflation_rate=st.floats(0, 0.2),
)


@FAST
@given(models)
def test_accounting_identity(m):
    for y in project_cashflow(m).years:
        assert y.margin == y.revenue - y.cost
        assert y.cost == y.cost_fixed + y.cost_maintenance + y.cost_intervention + y.cost_operating


@FAST
@given(models)
def test_sensitivity_structure(m):
    rep = sensitivity_analysis(m)
    assert sorted(rep.ranking()) == sorted(PERTURBABLE)
    mags = [abs(e.delta_abs) for e in rep.entries]
    assert mags == sorted(mags, reverse=True)
