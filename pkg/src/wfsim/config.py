"""Run configuration: a YAML document with a closed schema.

Unknown keys anywhere are errors.  Relative file paths resolve against the
directory holding the config file.  :func:`canonical` re-emits a parsed
config with every default spelled out and every workflow written as
explicit nodes and edges; parsing that output gives an identical config.

Top-level sections::

    seed: 20240614                 # required for simulate / sweep
    use_case: {name: ..., ...}     # free-form strings, echoed into the report
    utilities: {no_disease: {untreated: 1.0, ...}, moderate: {...}, severe: {...}}
    workflows: {nurse: {preset: nurse_ranked}, custom: {nodes: [...], edges: [...]}}
    cohort: {n_per_day, horizon_days, prevalence, severe_fraction,
             classifier: {kind: binormal, auroc: 0.9}}
    simulation: {replicates: 1, arms: [{name, workflow, strategy, ...SimConfig fields}]}
    sweeps: [{name, kind: capacity|alert_fatigue|heatmap|parameter, arm | nurse_arm + doctor_arm,
              axis1: {name, values}, axis2: {...}, replicates, overrides, cutoff_candidates}]
    finance: {...FinancialModel fields, target_year, perturbation}
    monitor: {predictions, labels, adherence, baseline_intervals, threshold,
              bin_edges, analysis_date, retire_after}
    output: {directory: out, format: both}

Node schema: ``{id, kind: start|decision|resource|terminal, capacity,
service_order, outcome: untreated|medication|surgery|optimal, label}``.
Edge schema: ``{from, to, guard}`` with guard one of ``{score: ">", threshold: cutoff}``,
``{bernoulli: alert_read_prob, value: true}``, ``admitted`` or ``rejected``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .cohort import Binormal, CohortSpec, Constant, Empirical
from .engine import SimConfig, Strategy
from .finance import FinancialModel
from .monitor import MonitorSettings
from .workflow import (
    PAD_UTILITIES,
    BernoulliGuard,
    DiseaseState,
    Edge,
    Node,
    Outcome,
    ResourceGuard,
    ScoreGuard,
    UtilityTable,
    WorkflowGraph,
    doctor_workflow,
    nurse_workflow,
)

__all__ = ["ConfigError", "ArmConfig", "SweepConfig", "RunConfig", "load_config", "parse_config", "canonical", "dump_config"]


class ConfigError(ValueError):
    pass


PRESETS = {
    "nurse_ranked": lambda: nurse_workflow("ranked"),
    "nurse_thresholded": lambda: nurse_workflow("thresholded"),
    "doctor_alert": doctor_workflow,
}

_STATE_KEYS = {"no_disease": DiseaseState.NO_DISEASE, "moderate": DiseaseState.MODERATE, "severe": DiseaseState.SEVERE}
_OUTCOME_KEYS = {"untreated": Outcome.UNTREATED, "medication": Outcome.MEDICATION, "surgery": Outcome.SURGERY}
_SIM_FIELDS = [f.name for f in fields(SimConfig) if f.name not in ("strategy", "seed")]
_FIN_FIELDS = [f.name for f in fields(FinancialModel)]
SWEEP_KINDS = ("capacity", "alert_fatigue", "heatmap", "parameter")


def _section(data, where: str, allowed, required=()) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"{where}: missing required key(s) {', '.join(missing)}")
    return data


def _number(v, where: str, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{where}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _wrap(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


# --------------------------------------------------------------------------
# workflows


def _param(v, where):
    if isinstance(v, str):
        return v
    return _number(v, where)


def _parse_guard(g, where):
    if g is None:
        return None
    if g == "admitted":
        return ResourceGuard(True)
    if g == "rejected":
        return ResourceGuard(False)
    if isinstance(g, dict) and "score" in g:
        _section(g, where, ("score", "threshold"), ("score", "threshold"))
        return _wrap(where, ScoreGuard, g["score"], _param(g["threshold"], where))
    if isinstance(g, dict) and "bernoulli" in g:
        _section(g, where, ("bernoulli", "value"), ("bernoulli", "value"))
        if not isinstance(g["value"], bool):
            raise ConfigError(f"{where}: bernoulli value must be true or false")
        return BernoulliGuard(_param(g["bernoulli"], where), g["value"])
    raise ConfigError(f"{where}: unrecognised guard {g!r}")


def _guard_dict(g):
    if g is None:
        return None
    if isinstance(g, ResourceGuard):
        return "admitted" if g.admitted else "rejected"
    if isinstance(g, ScoreGuard):
        return {"score": g.op, "threshold": g.threshold}
    return {"bernoulli": g.probability, "value": g.value}


def parse_workflow(data, where: str) -> WorkflowGraph:
    data = _section(data, where, ("preset", "nodes", "edges", "name"))
    if "preset" in data:
        if set(data) != {"preset"}:
            raise ConfigError(f"{where}: a preset workflow takes no other keys")
        if data["preset"] not in PRESETS:
            raise ConfigError(f"{where}: unknown preset {data['preset']!r}; choose from {', '.join(PRESETS)}")
        return PRESETS[data["preset"]]()
    _section(data, where, ("nodes", "edges", "name"), ("nodes", "edges"))
    nodes = []
    for k, nd in enumerate(data["nodes"] or []):
        w = f"{where}.nodes[{k}]"
        nd = _section(nd, w, ("id", "kind", "capacity", "service_order", "outcome", "label"), ("id", "kind"))
        outcome = nd.get("outcome")
        if nd["kind"] == "terminal":
            if outcome not in list(_OUTCOME_KEYS) + ["optimal"]:
                raise ConfigError(f"{w}: terminal outcome must be untreated, medication, surgery or optimal")
            outcome = None if outcome == "optimal" else _OUTCOME_KEYS[outcome]
        elif outcome is not None:
            raise ConfigError(f"{w}: only terminal nodes take an outcome")
        cap = nd.get("capacity")
        if cap is not None and not isinstance(cap, str):
            cap = _number(cap, w, integer=True)
        nodes.append(_wrap(w, Node, str(nd["id"]), nd["kind"], cap, nd.get("service_order"), outcome, nd.get("label", "")))
    edges = []
    for k, ed in enumerate(data["edges"] or []):
        w = f"{where}.edges[{k}]"
        ed = _section(ed, w, ("from", "to", "guard"), ("from", "to"))
        edges.append(Edge(str(ed["from"]), str(ed["to"]), _parse_guard(ed.get("guard"), w)))
    return WorkflowGraph(tuple(nodes), tuple(edges), name=str(data.get("name", "")))


def workflow_dict(g: WorkflowGraph) -> dict:
    nodes = []
    for n in g.nodes:
        d: dict[str, Any] = {"id": n.id, "kind": n.kind}
        if n.capacity is not None:
            d["capacity"] = n.capacity
        if n.service_order is not None:
            d["service_order"] = n.service_order.value
        if n.kind == "terminal":
            d["outcome"] = "optimal" if n.outcome is None else n.outcome.name.lower()
        if n.label:
            d["label"] = n.label
        nodes.append(d)
    edges = []
    for e in g.edges:
        d = {"from": e.source, "to": e.target}
        if e.guard is not None:
            d["guard"] = _guard_dict(e.guard)
        edges.append(d)
    return {"name": g.name, "nodes": nodes, "edges": edges}


# --------------------------------------------------------------------------
# other sections


def parse_utilities(data) -> UtilityTable:
    if data is None:
        return PAD_UTILITIES
    data = _section(data, "utilities", _STATE_KEYS)
    updates = {}
    for skey, row in data.items():
        row = _section(row, f"utilities.{skey}", _OUTCOME_KEYS)
        for okey, v in row.items():
            updates[(_STATE_KEYS[skey], _OUTCOME_KEYS[okey])] = _number(v, f"utilities.{skey}.{okey}")
    return _wrap("utilities", PAD_UTILITIES.replace, updates)


def utilities_dict(t: UtilityTable) -> dict:
    # extrapolated cells are untouched defaults and stay implicit
    out = {}
    for s, sv in _STATE_KEYS.items():
        row = {o: t.values[(sv, ov)] for o, ov in _OUTCOME_KEYS.items()
               if (sv, ov) in t.values and (sv, ov) not in t.extrapolated}
        if row:
            out[s] = row
    return out


def _parse_classifier(data, base: Path):
    data = _section(data, "cohort.classifier", ("kind", "auroc", "separation", "score", "path"), ("kind",))
    kind = data["kind"]
    w = "cohort.classifier"
    if kind == "binormal":
        _section(data, w, ("kind", "auroc", "separation"))
        if ("auroc" in data) == ("separation" in data):
            raise ConfigError(f"{w}: binormal needs exactly one of auroc, separation")
        if "auroc" in data:
            return _wrap(w, Binormal.from_auroc, _number(data["auroc"], w)), {"kind": kind, "auroc": float(data["auroc"])}
        return _wrap(w, Binormal, _number(data["separation"], w)), {"kind": kind, "separation": float(data["separation"])}
    if kind == "constant":
        _section(data, w, ("kind", "score"), ("score",))
        return _wrap(w, Constant, _number(data["score"], w)), {"kind": kind, "score": float(data["score"])}
    if kind == "empirical":
        _section(data, w, ("kind", "path"), ("path",))
        path = (base / data["path"]).resolve()
        try:
            clf = Empirical.from_file(path)
        except ValueError as exc:
            raise ConfigError(f"{w}: {exc}") from exc
        return clf, {"kind": kind, "path": str(path)}
    raise ConfigError(f"{w}: unknown kind {kind!r}")


def parse_cohort(data, base: Path):
    data = _section(data, "cohort", ("n_per_day", "horizon_days", "prevalence", "severe_fraction", "classifier"))
    d = CohortSpec()
    clf, clf_raw = _parse_classifier(data.get("classifier", {"kind": "binormal", "auroc": 0.9}), base)
    spec = CohortSpec(
        n_per_day=_number(data.get("n_per_day", d.n_per_day), "cohort.n_per_day", integer=True),
        horizon_days=_number(data.get("horizon_days", d.horizon_days), "cohort.horizon_days", integer=True),
        prevalence=_number(data.get("prevalence", d.prevalence), "cohort.prevalence"),
        severe_fraction=_number(data.get("severe_fraction", d.severe_fraction), "cohort.severe_fraction"),
        classifier=clf,
    )
    _wrap("cohort", spec.validate)
    return spec, clf_raw


def _parse_sim_fields(data, where, into: dict):
    for name in _SIM_FIELDS:
        if name in data and data[name] is not None:
            into[name] = _number(data[name], f"{where}.{name}", integer=name.endswith("capacity"))


@dataclass(frozen=True)
class ArmConfig:
    name: str
    workflow: str
    config: SimConfig


@dataclass(frozen=True)
class SweepConfig:
    name: str
    kind: str
    axis1: tuple[str, tuple]
    axis2: tuple[str, tuple] | None = None
    arm: str | None = None
    nurse_arm: str | None = None
    doctor_arm: str | None = None
    replicates: int = 20
    overrides: tuple = ()
    cutoff_candidates: tuple | None = None


def _parse_axis(data, where):
    data = _section(data, where, ("name", "values"), ("name", "values"))
    vals = data["values"]
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"{where}.values: expected a non-empty list")
    vals = tuple(v if isinstance(v, int) and not isinstance(v, bool) else _number(v, f"{where}.values") for v in vals)
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{where}.values: must be strictly increasing")
    return (str(data["name"]), vals)


def parse_sweep(data, k, arms: dict[str, ArmConfig]) -> SweepConfig:
    w = f"sweeps[{k}]"
    data = _section(data, w, ("name", "kind", "arm", "nurse_arm", "doctor_arm", "axis1", "axis2", "replicates", "overrides", "cutoff_candidates"), ("name", "kind", "axis1"))
    kind = data["kind"]
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"{w}.kind: must be one of {', '.join(SWEEP_KINDS)}")
    for ref in ("arm", "nurse_arm", "doctor_arm"):
        if data.get(ref) is not None and data[ref] not in arms:
            raise ConfigError(f"{w}.{ref}: unknown arm {data[ref]!r}")
    if kind == "heatmap":
        if not data.get("nurse_arm") or not data.get("doctor_arm") or "axis2" not in data:
            raise ConfigError(f"{w}: heatmap needs nurse_arm, doctor_arm and axis2")
    elif not data.get("arm"):
        raise ConfigError(f"{w}: {kind} sweep needs an arm")
    overrides: dict = {}
    _parse_sim_fields(_section(data.get("overrides"), f"{w}.overrides", _SIM_FIELDS), f"{w}.overrides", overrides)
    cands = data.get("cutoff_candidates")
    if cands is not None:
        cands = tuple(_number(c, f"{w}.cutoff_candidates") for c in cands)
    return SweepConfig(
        name=str(data["name"]),
        kind=kind,
        axis1=_parse_axis(data["axis1"], f"{w}.axis1"),
        axis2=_parse_axis(data["axis2"], f"{w}.axis2") if "axis2" in data else None,
        arm=data.get("arm"),
        nurse_arm=data.get("nurse_arm"),
        doctor_arm=data.get("doctor_arm"),
        replicates=_number(data.get("replicates", 20), f"{w}.replicates", integer=True),
        overrides=tuple(sorted(overrides.items())),
        cutoff_candidates=cands,
    )


@dataclass(frozen=True)
class RunConfig:
    seed: int | None
    use_case: dict
    utilities: UtilityTable
    workflows: dict
    cohort: CohortSpec
    classifier_raw: dict
    arms: tuple[ArmConfig, ...]
    sim_replicates: int
    sweeps: tuple[SweepConfig, ...]
    finance: FinancialModel | None
    finance_target_year: int | None
    finance_perturbation: float
    monitor: dict | None
    monitor_settings: MonitorSettings | None
    output_directory: str
    output_format: str
    source: Path | None = field(default=None, compare=False)

    def arm(self, name: str) -> ArmConfig:
        for a in self.arms:
            if a.name == name:
                return a
        raise KeyError(name)


TOP_LEVEL = ("seed", "use_case", "utilities", "workflows", "cohort", "simulation", "sweeps", "finance", "monitor", "output")


def parse_config(data: dict, base_dir: Path | str = ".") -> RunConfig:
    base = Path(base_dir)
    data = _section(data, "config", TOP_LEVEL)
    seed = data.get("seed")
    if seed is not None:
        seed = _number(seed, "seed", integer=True)
        if seed < 0:
            raise ConfigError("seed must be >= 0")

    use_case = _section(data.get("use_case"), "use_case", [k for k in (data.get("use_case") or {})])
    use_case = {str(k): str(v) for k, v in use_case.items()}

    utilities = parse_utilities(data.get("utilities"))

    wf_data = _section(data.get("workflows"), "workflows", list((data.get("workflows") or {}).keys()))
    workflows = {str(name): parse_workflow(wd, f"workflows.{name}") for name, wd in wf_data.items()}

    cohort, clf_raw = parse_cohort(data.get("cohort"), base)

    sim = _section(data.get("simulation"), "simulation", ("replicates", "arms"))
    arms = []
    for k, ad in enumerate(sim.get("arms") or []):
        w = f"simulation.arms[{k}]"
        ad = _section(ad, w, ["name", "workflow", "strategy", *_SIM_FIELDS], ("name", "workflow", "strategy"))
        if ad["workflow"] not in workflows:
            raise ConfigError(f"{w}.workflow: unknown workflow {ad['workflow']!r}")
        kwargs: dict = {}
        _parse_sim_fields(ad, w, kwargs)
        cfg = _wrap(w, SimConfig, strategy=_wrap(f"{w}.strategy", Strategy, ad["strategy"]), **kwargs)
        arms.append(ArmConfig(str(ad["name"]), str(ad["workflow"]), cfg))
    names = [a.name for a in arms]
    if len(set(names)) != len(names):
        raise ConfigError("simulation.arms: arm names must be unique")
    arm_map = {a.name: a for a in arms}
    sim_reps = _number(sim.get("replicates", 1), "simulation.replicates", integer=True)
    if sim_reps < 1:
        raise ConfigError("simulation.replicates must be >= 1")

    sweeps_raw = data.get("sweeps") or []
    if not isinstance(sweeps_raw, list):
        raise ConfigError("sweeps: expected a list")
    sweeps = tuple(parse_sweep(sd, k, arm_map) for k, sd in enumerate(sweeps_raw))
    if len({s.name for s in sweeps}) != len(sweeps):
        raise ConfigError("sweeps: names must be unique")

    finance = target_year = None
    perturbation = 0.10
    if data.get("finance") is not None:
        fd = _section(data["finance"], "finance", [*_FIN_FIELDS, "target_year", "perturbation"])
        kwargs = {n: _number(fd[n], f"finance.{n}", integer=(n == "horizon_years")) for n in _FIN_FIELDS if n in fd}
        finance = FinancialModel(**kwargs)
        _wrap("finance", finance.validate)
        if fd.get("target_year") is not None:
            target_year = _number(fd["target_year"], "finance.target_year", integer=True)
        perturbation = _number(fd.get("perturbation", 0.10), "finance.perturbation")

    monitor = settings = None
    if data.get("monitor") is not None:
        md = _section(data["monitor"], "monitor", ("predictions", "labels", "adherence", "baseline_intervals", "threshold", "bin_edges", "analysis_date", "retire_after"), ("predictions",))
        monitor = {k: str((base / md[k]).resolve()) for k in ("predictions", "labels", "adherence") if md.get(k)}
        d = MonitorSettings()
        settings = MonitorSettings(
            baseline_intervals=_number(md.get("baseline_intervals", d.baseline_intervals), "monitor.baseline_intervals", integer=True),
            threshold=_number(md.get("threshold", d.threshold), "monitor.threshold"),
            bin_edges=tuple(_number(e, "monitor.bin_edges") for e in md.get("bin_edges", d.bin_edges)),
            analysis_date=None if md.get("analysis_date") is None else str(md["analysis_date"]),
            retire_after=_number(md.get("retire_after", d.retire_after), "monitor.retire_after", integer=True),
        )

    out = _section(data.get("output"), "output", ("directory", "format"))
    fmt = out.get("format", "both")
    if fmt not in ("csv", "plot", "both"):
        raise ConfigError("output.format must be csv, plot or both")

    return RunConfig(
        seed=seed,
        use_case=use_case,
        utilities=utilities,
        workflows=workflows,
        cohort=cohort,
        classifier_raw=clf_raw,
        arms=tuple(arms),
        sim_replicates=sim_reps,
        sweeps=sweeps,
        finance=finance,
        finance_target_year=target_year,
        finance_perturbation=perturbation,
        monitor=monitor,
        monitor_settings=settings,
        output_directory=str(out.get("directory", "out")),
        output_format=fmt,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    cfg = parse_config(data or {}, path.parent)
    return replace(cfg, source=path)


def canonical(cfg: RunConfig) -> dict:
    """Plain-data form of ``cfg`` with defaults filled in."""
    out: dict[str, Any] = {}
    if cfg.seed is not None:
        out["seed"] = cfg.seed
    out["use_case"] = dict(cfg.use_case)
    out["utilities"] = utilities_dict(cfg.utilities)
    out["workflows"] = {k: workflow_dict(g) for k, g in cfg.workflows.items()}
    c = cfg.cohort
    out["cohort"] = {
        "n_per_day": c.n_per_day,
        "horizon_days": c.horizon_days,
        "prevalence": c.prevalence,
        "severe_fraction": c.severe_fraction,
        "classifier": dict(cfg.classifier_raw),
    }
    arms = []
    for a in cfg.arms:
        d = {"name": a.name, "workflow": a.workflow, "strategy": a.config.strategy.value}
        for n in _SIM_FIELDS:
            if getattr(a.config, n) is not None:
                d[n] = getattr(a.config, n)
        arms.append(d)
    out["simulation"] = {"replicates": cfg.sim_replicates, "arms": arms}
    sweeps = []
    for s in cfg.sweeps:
        d: dict[str, Any] = {"name": s.name, "kind": s.kind, "axis1": {"name": s.axis1[0], "values": list(s.axis1[1])}}
        if s.axis2 is not None:
            d["axis2"] = {"name": s.axis2[0], "values": list(s.axis2[1])}
        for ref in ("arm", "nurse_arm", "doctor_arm"):
            if getattr(s, ref) is not None:
                d[ref] = getattr(s, ref)
        d["replicates"] = s.replicates
        if s.overrides:
            d["overrides"] = dict(s.overrides)
        if s.cutoff_candidates is not None:
            d["cutoff_candidates"] = list(s.cutoff_candidates)
        sweeps.append(d)
    out["sweeps"] = sweeps
    if cfg.finance is not None:
        fin = {n: getattr(cfg.finance, n) for n in _FIN_FIELDS}
        if cfg.finance_target_year is not None:
            fin["target_year"] = cfg.finance_target_year
        fin["perturbation"] = cfg.finance_perturbation
        out["finance"] = fin
    if cfg.monitor is not None:
        s = cfg.monitor_settings
        mon = dict(cfg.monitor)
        mon.update(
            baseline_intervals=s.baseline_intervals,
            threshold=s.threshold,
            bin_edges=list(s.bin_edges),
            retire_after=s.retire_after,
        )
        if s.analysis_date is not None:
            mon["analysis_date"] = s.analysis_date
        out["monitor"] = mon
    out["output"] = {"directory": cfg.output_directory, "format": cfg.output_format}
    return copy.deepcopy(out)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(canonical(cfg), sort_keys=False)
