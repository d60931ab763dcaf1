"""Command-line front end.

    wfsim validate --config run.yaml
    wfsim simulate --config run.yaml --out out/ --seed 7 --replicates 5
    wfsim sweep    --config run.yaml --threads 4 --format both
    wfsim finance  --config run.yaml
    wfsim monitor  --config run.yaml
    wfsim report   --config run.yaml

Exit status: 0 success, 1 invalid configuration or workflow, 2 runtime
error, 3 I/O error.  Failures print one JSON line to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .cohort import generate_cohort
from .config import ConfigError, RunConfig, load_config
from .engine import BASELINES, derive_seed, simulate
from .finance import cashflow_csv, project_cashflow, sensitivity_analysis, sensitivity_csv
from .monitor import alerts_csv, run_monitoring
from .plotting import emit_plot
from .report import assemble_report
from .sweep import (
    Arm,
    Axis,
    SweepSpec,
    emit_csv,
    incremental_gain_heatmap,
    sweep_alert_fatigue,
    sweep_capacity,
    sweep_parameter,
    write_atomic,
)
from .workflow import DiseaseState, Outcome, WorkflowError, validate_workflow

COMMANDS = ("validate", "simulate", "sweep", "finance", "monitor", "report")
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3



def _out_dir(cfg: RunConfig, args) -> Path:
    # relative output directories resolve against the working directory
    return Path(args.out) if args.out else Path(cfg.output_directory)


def _root_seed(cfg: RunConfig, args) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigError("a root seed is required: set 'seed' in the config or pass --seed")
    return seed


def cmd_validate(cfg: RunConfig, args) -> int:
    used = {}
    for arm in cfg.arms:
        used.setdefault(arm.workflow, []).append(arm)
    status = EXIT_OK
    for name, graph in cfg.workflows.items():
        contexts = [(a.name, a.config.parameters()) for a in used.get(name, [])] or [(None, None)]
        for arm_name, params in contexts:
            report = validate_workflow(graph, cfg.utilities, params)
            title = f"workflow {name}" + (f" (arm {arm_name})" if arm_name else "")
            print(f"{title}\n{report.format()}")
            if not report.ok:
                status = EXIT_INVALID
    if status == EXIT_OK:
        print("config ok")
    return status


_COUNT_COLS = [(s, o) for s in DiseaseState for o in Outcome]


def cmd_simulate(cfg: RunConfig, args) -> int:
    root = _root_seed(cfg, args)
    reps = args.replicates or cfg.sim_replicates
    if not cfg.arms:
        raise ConfigError("simulation.arms is empty")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm", "workflow", "strategy", "replicate", "mean_utility", "relative_utility_pct",
                "treat_none_utility", "optimistic_utility", "patients_seen_by_specialist", "n_patients",
                "resource_utilization"] + [f"n_{s.name.lower()}_{o.name.lower()}" for s, o in _COUNT_COLS])
    for r in range(reps):
        cohort = generate_cohort(replace(cfg.cohort, seed=derive_seed(root, 0, r)))
        for arm in cfg.arms:
            graph = cfg.workflows[arm.workflow]
            strategies = [arm.config.strategy] + [b for b in BASELINES if b is not arm.config.strategy]
            for strat in strategies:
                res = simulate(graph, cfg.utilities, cohort, arm.config.with_(strategy=strat, seed=derive_seed(root, 1, r)))
                util = ";".join(f"{k}={v:.6f}" for k, v in sorted(res.resource_utilization.items()))
                w.writerow([
                    arm.name, arm.workflow, strat.value, r, f"{res.mean_utility:.9f}",
                    "" if res.relative_utility is None else f"{res.relative_utility:.6f}",
                    f"{res.treat_none_utility:.9f}", f"{res.optimistic_utility:.9f}",
                    res.patients_seen_by_specialist, res.n_patients, util,
                ] + [res.outcome_counts[c] for c in _COUNT_COLS])
    path = write_atomic(_out_dir(cfg, args) / "simulation.csv", buf.getvalue())
    print(f"wrote {path}")
    return EXIT_OK


def _arm(cfg: RunConfig, name: str, overrides) -> Arm:
    a = cfg.arm(name)
    return Arm(cfg.workflows[a.workflow], a.config.with_(**dict(overrides)))


def cmd_sweep(cfg: RunConfig, args) -> int:
    root = _root_seed(cfg, args)
    if not cfg.sweeps:
        raise ConfigError("no sweeps configured")
    fmt = args.format or cfg.output_format
    out = _out_dir(cfg, args)
    for sw in cfg.sweeps:
        spec = SweepSpec(
            axis1=Axis(*sw.axis1),
            axis2=Axis(*sw.axis2) if sw.axis2 else None,
            cohort=cfg.cohort,
            utilities=cfg.utilities,
            replicates=args.replicates or sw.replicates,
            seed=root,
            threads=args.threads,
            cutoff_candidates=sw.cutoff_candidates,
            nurse=_arm(cfg, sw.nurse_arm or sw.arm, sw.overrides) if sw.kind in ("capacity", "heatmap") else None,
            doctor=_arm(cfg, sw.doctor_arm or sw.arm, sw.overrides) if sw.kind in ("alert_fatigue", "heatmap") else None,
        )
        extra = {}
        if sw.kind == "capacity":
            results = [sweep_capacity(spec)]
        elif sw.kind == "alert_fatigue":
            model, treat_all = sweep_alert_fatigue(spec)
            results, extra = [model, treat_all], {"treat_all": treat_all}
        elif sw.kind == "heatmap":
            results = [incremental_gain_heatmap(spec)]
        else:
            results = [sweep_parameter(spec, _arm(cfg, sw.arm, sw.overrides), label=sw.arm)]
        if fmt in ("csv", "both"):
            print(f"wrote {emit_csv(results[0], out / f'sweep_{sw.name}.csv')}")
            for suffix, res in extra.items():
                print(f"wrote {emit_csv(res, out / f'sweep_{sw.name}_{suffix}.csv')}")
        if fmt in ("plot", "both"):
            print(f"wrote {emit_plot(results, out / f'sweep_{sw.name}.svg')}")
    return EXIT_OK


def cmd_finance(cfg: RunConfig, args) -> int:
    if cfg.finance is None:
        raise ConfigError("no finance section in the config")
    out = _out_dir(cfg, args)
    flow = project_cashflow(cfg.finance)
    report = sensitivity_analysis(cfg.finance, cfg.finance_perturbation, cfg.finance_target_year)
    print(f"wrote {write_atomic(out / 'cashflow.csv', cashflow_csv(flow))}")
    print(f"wrote {write_atomic(out / 'sensitivity.csv', sensitivity_csv(report))}")
    return EXIT_OK


def cmd_monitor(cfg: RunConfig, args) -> int:
    if cfg.monitor is None:
        raise ConfigError("no monitor section in the config")
    out = _out_dir(cfg, args)
    res = run_monitoring(cfg.monitor["predictions"], cfg.monitor.get("labels"), cfg.monitor.get("adherence"), cfg.monitor_settings)
    print(f"wrote {write_atomic(out / 'alerts.csv', alerts_csv(res.alerts))}")
    sens = ["lower_days,upper_days,events,detected,sensitivity"] + [
        f"{b.lower:g},{b.upper:g},{b.events},{b.detected},{'' if b.sensitivity is None else f'{b.sensitivity:.6f}'}"
        for b in res.sensitivity
    ]
    print(f"wrote {write_atomic(out / 'sensitivity_by_time.csv', chr(10).join(sens) + chr(10))}")
    adh = ["interval,flagged,orders,completed,uptake,adoption"] + [
        ",".join([i, str(f), str(o), str(c), "" if u is None else f"{u:.6f}", "" if a is None else f"{a:.6f}"])
        for i, f, o, c, u, a in res.adherence
    ]
    print(f"wrote {write_atomic(out / 'adherence.csv', chr(10).join(adh) + chr(10))}")
    summary = {
        "recommendation": res.recommendation.value,
        "baseline_intervals": list(res.baseline_intervals),
        "intervals": list(res.intervals),
        "n_alerts": len(res.alerts),
        "alerts": [
            {"interval": a.interval, "metric": a.metric, "stratum": a.stratum,
             "deviation_std": "inf" if abs(a.deviation) == float("inf") else f"{a.deviation:.3f}"}
            for a in res.alerts
        ],
    }
    print(f"wrote {write_atomic(out / 'monitor_summary.json', json.dumps(summary, indent=2, sort_keys=True) + chr(10))}")
    print(f"recommendation: {res.recommendation.value}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg, args)
    candidates = {"simulation": out / "simulation.csv", "cashflow": out / "cashflow.csv",
                  "sensitivity": out / "sensitivity.csv", "monitor_summary": out / "monitor_summary.json"}
    sweeps = []
    for sw in cfg.sweeps:
        candidates[f"sweep:{sw.name}"] = out / f"sweep_{sw.name}.csv"
        sweeps.append({"name": sw.name, "kind": sw.kind, "axis1": sw.axis1[0], "axis2": sw.axis2[0] if sw.axis2 else None})
    artifacts = {k: p for k, p in candidates.items() if p.is_file()}
    plan = None
    if cfg.monitor_settings is not None:
        s = cfg.monitor_settings
        plan = {
            "interval": "monthly",
            "alert_trigger": f"> {s.threshold:g} std change in mean vs. the first {s.baseline_intervals} intervals",
            "time_to_event_bins_days": ", ".join(f"{e:g}" for e in s.bin_edges),
            "retirement_review_after": f"{s.retire_after} consecutive triggered intervals",
        }
    text = assemble_report(artifacts, cfg.use_case, sweeps, plan)
    print(f"wrote {write_atomic(out / 'report.md', text)}")
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "finance": cmd_finance,
    "monitor": cmd_monitor,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wfsim", description="Usefulness simulation, financial projection and monitoring for model-guided workflows.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="root seed override")
    p.add_argument("--replicates", type=int, help="replicate count override")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    p.add_argument("--format", choices=("csv", "plot", "both"), help="sweep output format")
    return p


def _fail(code: int, kind: str, exc: BaseException) -> int:
    print(json.dumps({"status": code, "error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.replicates is not None and args.replicates < 1:
        return _fail(EXIT_INVALID, "ConfigError", ValueError("--replicates must be >= 1"))
    if args.threads < 1:
        return _fail(EXIT_INVALID, "ConfigError", ValueError("--threads must be >= 1"))
    try:
        cfg = load_config(args.config)
        return HANDLERS[args.command](cfg, args)
    except (ConfigError, WorkflowError) as exc:
        return _fail(EXIT_INVALID, type(exc).__name__, exc)
    except OSError as exc:
        return _fail(EXIT_IO, type(exc).__name__, exc)
    except Exception as exc:  # noqa: BLE001
        return _fail(EXIT_RUNTIME, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
