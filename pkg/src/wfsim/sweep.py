"""Parameter grids over simulation arms.

Every replicate ``r`` draws its cohort from ``derive_seed(seed, 0, r)`` and
its simulation streams from ``derive_seed(seed, 1, r)``.  All cells of a
sweep therefore share the same patients and the same random draws per
replicate (common random numbers): differences between cells reflect the
parameter change, not resampling noise, and no cell depends on the order in
which cells are computed.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .cohort import Binormal, CohortSpec, generate_cohort
from .engine import DegenerateBaselines, SimConfig, Strategy, derive_seed, simulate
from .workflow import PAD_UTILITIES, UtilityTable, WorkflowGraph

__all__ = [
    "Axis",
    "Arm",
    "SweepSpec",
    "SweepResult",
    "AlertFatigueSweep",
    "sweep_capacity",
    "sweep_alert_fatigue",
    "incremental_gain_heatmap",
    "sweep_parameter",
    "saturation_point",
    "emit_csv",
    "read_csv",
    "CSV_HEADER",
]

CSV_HEADER = ("axis1", "axis2", "mean_relative_utility_pct", "stderr_pct", "replicates")
_CONFIG_FIELDS = {f.name for f in fields(SimConfig)} - {"strategy", "seed"}
COHORT_AXES = {"auroc", "prevalence", "severe_fraction"}


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError(f"axis {self.name!r} has no values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"axis {self.name!r} values must be strictly increasing")
        if self.name not in _CONFIG_FIELDS | COHORT_AXES:
            raise ValueError(f"cannot sweep over {self.name!r}")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Arm:
    graph: WorkflowGraph
    config: SimConfig


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    cohort: CohortSpec
    nurse: Arm | None = None
    doctor: Arm | None = None
    axis2: Axis | None = None
    replicates: int = 20
    utilities: UtilityTable = PAD_UTILITIES
    seed: int = 0
    cutoff_candidates: tuple | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


@dataclass(frozen=True)
class SweepResult:
    axis1: Axis
    mean: np.ndarray
    stderr: np.ndarray
    replicates: int
    axis2: Axis | None = None
    label: str = ""
    samples: np.ndarray | None = None  # grid shape + (replicates,)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mean.shape

    def cells(self):
        """Row-major ``(axis1 value, axis2 value or None, mean, stderr)``."""
        if self.axis2 is None:
            for i, a in enumerate(self.axis1.values):
                yield a, None, float(self.mean[i]), float(self.stderr[i])
        else:
            for i, a in enumerate(self.axis1.values):
                for j, b in enumerate(self.axis2.values):
                    yield a, b, float(self.mean[i, j]), float(self.stderr[i, j])


class AlertFatigueSweep(NamedTuple):
    model: SweepResult
    treat_all: SweepResult


def _summarise(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = samples.mean(axis=-1)
    r = samples.shape[-1]
    if r < 2:
        return mean, np.zeros_like(mean)  # one replicate carries no spread estimate
    return mean, samples.std(axis=-1, ddof=1) / np.sqrt(r)


class _Evaluator:
    """Caches cohorts per replicate and evaluates relative utility per cell."""

    def __init__(self, spec: SweepSpec):
        self.spec = spec
        self._cohorts: dict = {}

    def cohort(self, r: int, overrides: dict):
        key = (r,) + tuple(sorted((k, v) for k, v in overrides.items() if k in COHORT_AXES))
        if key not in self._cohorts:
            cs = replace(self.spec.cohort, seed=derive_seed(self.spec.seed, 0, r))
            if "auroc" in overrides:
                cs = replace(cs, classifier=Binormal.from_auroc(overrides["auroc"]))
            for name in ("prevalence", "severe_fraction"):
                if name in overrides:
                    cs = replace(cs, **{name: overrides[name]})
            self._cohorts[key] = generate_cohort(cs)
        return self._cohorts[key]

    def value(self, arm: Arm, overrides: dict, r: int, strategy: Strategy | None = None) -> float:
        cfg_changes = {k: v for k, v in overrides.items() if k in _CONFIG_FIELDS}
        cfg = arm.config.with_(seed=derive_seed(self.spec.seed, 1, r), **cfg_changes)
        if strategy is not None:
            cfg = cfg.with_(strategy=strategy)
        res = simulate(arm.graph, self.spec.utilities, self.cohort(r, overrides), cfg)
        if res.relative_utility is None:
            raise DegenerateBaselines(f"replicate {r}: no utility to gain over treat-none")
        return res.relative_utility

    def run(self, tasks: list[tuple]) -> list[float]:
        # cohorts are generated up front so worker threads only read the cache
        for _, overrides, r, _ in tasks:
            self.cohort(r, overrides)
        call = lambda t: self.value(*t)  # noqa: E731
        if self.spec.threads > 1:
            with ThreadPoolExecutor(self.spec.threads) as pool:
                return list(pool.map(call, tasks))
        return [call(t) for t in tasks]


def _curve(ev: _Evaluator, arm: Arm, axis: Axis, strategy=None, extra=None) -> np.ndarray:
    """Samples of shape ``(len(axis), replicates)``."""
    R = ev.spec.replicates
    extra = extra or {}
    tasks = [(arm, {**extra, axis.name: v}, r, strategy) for v in axis.values for r in range(R)]
    return np.asarray(ev.run(tasks)).reshape(len(axis), R)


def _curve_best_cutoff(ev: _Evaluator, arm: Arm, axis: Axis, candidates) -> np.ndarray:
    R = ev.spec.replicates
    cands = sorted(set(float(c) for c in candidates))
    tasks = [(arm, {axis.name: v, "cutoff": c}, r, None) for v in axis.values for c in cands for r in range(R)]
    vals = np.asarray(ev.run(tasks)).reshape(len(axis), len(cands), R)
    best = np.argmax(vals.mean(axis=-1), axis=1)  # argmax keeps the first, i.e. lowest, cutoff
    return vals[np.arange(len(axis)), best]


def _result(samples, spec: SweepSpec, label: str, axis1=None, axis2=None) -> SweepResult:
    mean, se = _summarise(samples)
    return SweepResult(axis1 or spec.axis1, mean, se, spec.replicates, axis2, label, samples)


def sweep_parameter(spec: SweepSpec, arm: Arm, label: str = "", strategy: Strategy | None = None) -> SweepResult:
    """1-D relative-utility curve of ``arm`` along ``spec.axis1``."""
    samples = _curve(_Evaluator(spec), arm, spec.axis1, strategy)
    return _result(samples, spec, label or arm.graph.name)


def sweep_capacity(spec: SweepSpec) -> SweepResult:
    """Nurse-driven workflow across nurse capacities.

    With ``cutoff_candidates`` set, each cell reports the cutoff with the
    best mean relative utility over the replicates.
    """
    if spec.nurse is None:
        raise ValueError("capacity sweep needs a nurse arm")
    if spec.axis1.name != "nurse_capacity":
        raise ValueError("capacity sweep runs along nurse_capacity")
    ev = _Evaluator(spec)
    if spec.cutoff_candidates:
        samples = _curve_best_cutoff(ev, spec.nurse, spec.axis1, spec.cutoff_candidates)
    else:
        samples = _curve(ev, spec.nurse, spec.axis1)
    return _result(samples, spec, spec.nurse.graph.name)


def sweep_alert_fatigue(spec: SweepSpec) -> AlertFatigueSweep:
    """Doctor-driven workflow across alert-read probabilities, with Treat All."""
    if spec.doctor is None:
        raise ValueError("alert-fatigue sweep needs a doctor arm")
    if spec.axis1.name != "alert_read_prob":
        raise ValueError("alert-fatigue sweep runs along alert_read_prob")
    ev = _Evaluator(spec)
    model = _curve(ev, spec.doctor, spec.axis1)
    treat_all = _curve(ev, spec.doctor, spec.axis1, Strategy.TREAT_ALL)
    return AlertFatigueSweep(
        _result(model, spec, spec.doctor.graph.name),
        _result(treat_all, spec, "treat_all"),
    )


def incremental_gain_heatmap(spec: SweepSpec) -> SweepResult:
    """Cell ``(i, j)``: nurse arm at ``axis1[i]`` minus doctor arm at ``axis2[j]``.

    Positive values favour the nurse-driven workflow.  Differences are taken
    per replicate before averaging, so the standard error is that of the
    paired difference.
    """
    if spec.nurse is None or spec.doctor is None or spec.axis2 is None:
        raise ValueError("heatmap needs nurse and doctor arms and two axes")
    if spec.axis1.name != "nurse_capacity" or spec.axis2.name != "alert_read_prob":
        raise ValueError("heatmap axes are nurse_capacity x alert_read_prob")
    ev = _Evaluator(spec)
    nurse = _curve(ev, spec.nurse, spec.axis1)
    doctor = _curve(ev, spec.doctor, spec.axis2)
    gain = nurse[:, None, :] - doctor[None, :, :]
    return _result(gain, spec, "incremental_gain", spec.axis1, spec.axis2)


def saturation_point(result: SweepResult, tolerance: float = 1.0):
    """Smallest axis value from which every later cell is within ``tolerance`` of the best."""
    if result.axis2 is not None:
        raise ValueError("saturation is defined for 1-D sweeps")
    mean = result.mean
    top = mean.max()
    for i, v in enumerate(result.axis1.values):
        if np.all(mean[i:] >= top - tolerance):
            return v
    return result.axis1.values[-1]


# --------------------------------------------------------------------------
# CSV


def _fmt_axis(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _parse_axis(text: str):
    return float(text) if any(ch in text for ch in ".eE") else int(text)


def write_atomic(dest, text: str) -> Path:
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, dest)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return dest


def format_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for a, b, m, s in result.cells():
        w.writerow([_fmt_axis(a), _fmt_axis(b), f"{m:.6f}", f"{s:.6f}", result.replicates])
    return buf.getvalue()


def emit_csv(result: SweepResult, destination) -> Path:
    return write_atomic(destination, format_csv(result))


def read_csv(path, axis1_name: str, axis2_name: str | None = None, label: str = "") -> SweepResult:
    """Inverse of :func:`emit_csv` (values at the file's 6-decimal precision)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[:1]}")
    rows = rows[1:]
    a_vals, b_vals = [], []
    for r in rows:
        a = _parse_axis(r[0])
        if a not in a_vals:
            a_vals.append(a)
        if r[1] != "":
            b = _parse_axis(r[1])
            if b not in b_vals:
                b_vals.append(b)
    reps = {int(r[4]) for r in rows}
    if len(reps) != 1:
        raise ValueError(f"{path}: inconsistent replicate counts {sorted(reps)}")
    shape = (len(a_vals), len(b_vals)) if b_vals else (len(a_vals),)
    if len(rows) != int(np.prod(shape)):
        raise ValueError(f"{path}: {len(rows)} rows do not fill a {shape} grid")
    mean = np.array([float(r[2]) for r in rows]).reshape(shape)
    se = np.array([float(r[3]) for r in rows]).reshape(shape)
    axis1 = Axis(axis1_name, a_vals)
    axis2 = Axis(axis2_name, b_vals) if b_vals else None
    if b_vals and axis2_name is None:
        raise ValueError("file has a second axis; pass axis2_name")
    return SweepResult(axis1, mean, se, reps.pop(), axis2, label)
