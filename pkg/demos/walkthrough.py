"""Library walkthrough: simulate the PAD screening workflows, sweep nurse
capacity, and project the financial case.

    python3 demos/walkthrough.py
"""

from wfsim import (
    PAD_UTILITIES,
    Arm,
    Axis,
    Binormal,
    CohortSpec,
    SimConfig,
    Strategy,
    SweepSpec,
    doctor_workflow,
    example_config_path,
    generate_cohort,
    load_config,
    nurse_workflow,
    project_cashflow,
    saturation_point,
    sensitivity_analysis,
    simulate,
    sweep_capacity,
    format_money,
)

spec = CohortSpec(n_per_day=100, horizon_days=100, prevalence=0.10, severe_fraction=0.5,
                  classifier=Binormal.from_auroc(0.9), seed=1)
cohort = generate_cohort(spec)
print(f"cohort: {len(cohort)} patients, {cohort.diseased.mean():.1%} with PAD")

nurse = nurse_workflow("ranked")
for strat in (Strategy.RANKED, Strategy.TREAT_ALL, Strategy.TREAT_NONE, Strategy.OPTIMISTIC):
    res = simulate(nurse, PAD_UTILITIES, cohort, SimConfig(strat, nurse_capacity=3, specialist_capacity=2, seed=1))
    print(f"  nurse workflow, {strat.value:<12} relative utility {res.relative_utility:6.2f}%")

res = simulate(doctor_workflow(), PAD_UTILITIES, cohort,
               SimConfig(Strategy.DOCTOR_ALERT, specialist_capacity=2, cutoff=0.5, alert_read_prob=0.6, seed=1))
print(f"  doctor alerts read 60% of the time: {res.relative_utility:.2f}%")

sweep = sweep_capacity(SweepSpec(
    Axis("nurse_capacity", tuple(range(11))), spec,
    nurse=Arm(nurse, SimConfig(Strategy.RANKED, specialist_capacity=2)),
    replicates=10, seed=7,
))
print("nurse capacity sweep (mean +- SE):")
for cap, m, se in zip(sweep.axis1.values, sweep.mean, sweep.stderr):
    print(f"  {cap:>2} {m:6.2f} +- {se:.2f}")
print(f"saturates at nurse capacity {saturation_point(sweep)}")

model = load_config(example_config_path()).finance
flow = project_cashflow(model)
print("margin by year:", ", ".join(f"Y{y.year} $ {format_money(y.margin)}" for y in flow.years))
top = sensitivity_analysis(model, 0.10).most_sensitive[:3]
print("most sensitive inputs:", ", ".join(e.parameter for e in top))
