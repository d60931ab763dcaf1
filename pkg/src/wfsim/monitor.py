"""Post-deployment monitoring: drift triggers, lag-aware sensitivity, adherence.

Reference statistics come from a baseline period (a retrospective test set
or a silent deployment).  A later window raises an alert when its mean moves
by more than ``threshold`` reference standard deviations.  Outcome labels
arrive late (negatives only after a full year), so performance is tracked
as sensitivity within time-to-event bins, counting only the events that are
already observable at the analysis date.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "BaselineStat",
    "MonitorBaseline",
    "ObservationWindow",
    "AlertEvent",
    "LabeledPrediction",
    "BinSensitivity",
    "TrialArm",
    "Recommendation",
    "UnknownMetric",
    "InsufficientSamples",
    "EmptyBinEdges",
    "CountOrderingViolation",
    "build_baseline",
    "check_drift",
    "time_stratified_sensitivity",
    "adherence_metrics",
    "allocate_arms",
    "evaluate_update_trigger",
    "MonitorSettings",
    "MonitorOutput",
    "run_monitoring",
    "alerts_csv",
    "LABEL_LAG_DAYS",
]

LABEL_LAG_DAYS = 365
ALL = "all"


class UnknownMetric(KeyError):
    pass


class InsufficientSamples(ValueError):
    pass


class EmptyBinEdges(ValueError):
    pass


class CountOrderingViolation(ValueError):
    pass


@dataclass(frozen=True)
class BaselineStat:
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class MonitorBaseline:
    stats: Mapping[tuple[str, str], BaselineStat]
    source: str = ""

    def get(self, metric: str, stratum: str = ALL) -> BaselineStat:
        try:
            return self.stats[(metric, stratum)]
        except KeyError:
            raise UnknownMetric(f"no baseline for metric {metric!r}, stratum {stratum!r}") from None


def build_baseline(samples: Mapping, source: str = "") -> MonitorBaseline:
    """Mean and population std (divisor n) for each metric, or (metric, stratum) key."""
    stats = {}
    for key, values in samples.items():
        metric, stratum = key if isinstance(key, tuple) else (key, ALL)
        arr = np.asarray(list(values), dtype=float)
        if arr.size < 2:
            raise InsufficientSamples(f"{metric}/{stratum}: need at least 2 samples, got {arr.size}")
        stats[(metric, stratum)] = BaselineStat(float(arr.mean()), float(arr.std(ddof=0)), int(arr.size))
    return MonitorBaseline(stats, source)


@dataclass(frozen=True)
class ObservationWindow:
    metric: str
    values: tuple
    interval: str
    stratum: str = ALL

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("observation window is empty")
        if not self.interval:
            raise ValueError("observation window needs an interval label")


@dataclass(frozen=True)
class AlertEvent:
    metric: str
    stratum: str
    observed_mean: float
    reference_mean: float
    reference_std: float
    deviation: float  # in reference std units; +-inf for a zero-std baseline
    interval: str
    degenerate: bool = False


def check_drift(window: ObservationWindow, baseline: MonitorBaseline, threshold: float = 1.0) -> AlertEvent | None:
    """Alert when ``|window mean - reference mean| > threshold * reference std``.

    A zero-std reference alerts on any change and marks the event degenerate.
    """
    ref = baseline.get(window.metric, window.stratum)
    observed = float(np.mean(window.values))
    diff = observed - ref.mean
    if ref.std == 0.0:
        if diff == 0.0:
            return None
        deviation, degenerate = math.copysign(math.inf, diff), True
    else:
        deviation, degenerate = diff / ref.std, False
        if not abs(diff) > threshold * ref.std:
            return None
    return AlertEvent(window.metric, window.stratum, observed, ref.mean, ref.std, deviation, window.interval, degenerate)


@dataclass(frozen=True)
class LabeledPrediction:
    patient_id: str
    predicted_positive: bool
    event_observed: bool
    time_to_event: float | None
    analysis_horizon: float

    def __post_init__(self):
        if self.event_observed != (self.time_to_event is not None):
            raise ValueError(f"{self.patient_id}: time_to_event is required exactly when an event was observed")
        if self.time_to_event is not None and not 0 <= self.time_to_event <= LABEL_LAG_DAYS:
            raise ValueError(f"{self.patient_id}: time_to_event {self.time_to_event} outside 0..{LABEL_LAG_DAYS} days")
        if self.analysis_horizon < 0:
            raise ValueError(f"{self.patient_id}: analysis_horizon must be >= 0")


@dataclass(frozen=True)
class BinSensitivity:
    lower: float
    upper: float
    events: int
    detected: int

    @property
    def sensitivity(self) -> float | None:
        return self.detected / self.events if self.events else None


def time_stratified_sensitivity(preds: Iterable[LabeledPrediction], bin_edges: Sequence[float]) -> list[BinSensitivity]:
    """Sensitivity among observable events, binned by time to event.

    Bins are ``(lo, hi]``, the first one closed on the left so same-day
    events count.  Events later than a patient's analysis horizon have not
    happened yet as far as the data knows, and are left out.
    """
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2:
        raise EmptyBinEdges("need at least two bin edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing")
    if edges[0] > 0 or edges[-1] < LABEL_LAG_DAYS:
        raise ValueError(f"bin edges must cover (0, {LABEL_LAG_DAYS}] days")
    events = [0] * (len(edges) - 1)
    detected = [0] * (len(edges) - 1)
    for p in preds:
        if not p.event_observed or p.time_to_event > p.analysis_horizon:
            continue
        t = p.time_to_event
        k = 0 if t <= edges[1] else int(np.searchsorted(edges, t, side="left")) - 1
        events[k] += 1
        detected[k] += bool(p.predicted_positive)
    return [BinSensitivity(edges[k], edges[k + 1], events[k], detected[k]) for k in range(len(events))]


def adherence_metrics(flagged: int, outreach_orders: int, completed_tests: int) -> tuple[float | None, float | None]:
    """(uptake, adoption); ``None`` where the denominator is zero."""
    if min(flagged, outreach_orders, completed_tests) < 0:
        raise CountOrderingViolation("counts must be >= 0")
    if outreach_orders > flagged or completed_tests > outreach_orders:
        raise CountOrderingViolation(
            f"expected completed <= orders <= flagged, got {completed_tests}, {outreach_orders}, {flagged}"
        )
    uptake = outreach_orders / flagged if flagged else None
    adoption = completed_tests / outreach_orders if outreach_orders else None
    return uptake, adoption


class TrialArm(str, enum.Enum):
    INTERVENTION = "intervention"
    CONTROL = "control"


def allocate_arms(ordered_patients: Sequence, first: TrialArm = TrialArm.INTERVENTION) -> dict:
    """Alternate arms down the evaluation order (highest risk first)."""
    first = TrialArm(first)
    other = TrialArm.CONTROL if first is TrialArm.INTERVENTION else TrialArm.INTERVENTION
    out = {}
    for k, pid in enumerate(ordered_patients):
        if pid in out:
            raise ValueError(f"patient {pid!r} listed twice")
        out[pid] = first if k % 2 == 0 else other
    return out


class Recommendation(str, enum.Enum):
    LEAVE_AS_IS = "leave_as_is"
    UPDATE = "update"
    CONSIDER_RETIRE = "consider_retire"


def evaluate_update_trigger(
    alert_history: Sequence[Sequence[AlertEvent]],
    retire_after: int = 4,
    trigger_metrics: Iterable[str] | None = None,
) -> Recommendation:
    """Recommendation for the latest interval of ``alert_history`` (oldest first).

    Each element holds one interval's alerts, including adherence alerts.
    ``trigger_metrics`` restricts which metrics count; ``None`` counts all.
    """
    allowed = None if trigger_metrics is None else set(trigger_metrics)
    fired = [
        any(allowed is None or a.metric in allowed for a in interval)
        for interval in alert_history
    ]
    if not fired or not fired[-1]:
        return Recommendation.LEAVE_AS_IS
    run = 0
    for f in reversed(fired):
        if not f:
            break
        run += 1
    return Recommendation.CONSIDER_RETIRE if run >= retire_after else Recommendation.UPDATE


# --------------------------------------------------------------------------
# log ingestion


@dataclass(frozen=True)
class MonitorSettings:
    baseline_intervals: int = 3
    threshold: float = 1.0
    bin_edges: tuple = (0, 90, 180, 270, 365)
    analysis_date: str | None = None
    retire_after: int = 4


@dataclass(frozen=True)
class MonitorOutput:
    alerts: tuple[AlertEvent, ...]
    sensitivity: tuple[BinSensitivity, ...]
    adherence: tuple[tuple[str, int, int, int, float | None, float | None], ...]
    intervals: tuple[str, ...]
    recommendation: Recommendation
    baseline_intervals: tuple[str, ...] = field(default=())


def _read(path, required: Sequence[str]) -> list[dict]:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        names = [n.strip() for n in (reader.fieldnames or [])]
        if names[: len(required)] != list(required):
            raise ValueError(f"{path}: expected columns {','.join(required)}, got {','.join(names)}")
        return [{k.strip(): (v or "").strip() for k, v in row.items()} for row in reader]


def _month(iso: str) -> str:
    return date.fromisoformat(iso).strftime("%Y-%m")


def _series_alerts(values_by_interval: Mapping[str, float | None], metric: str, base: Sequence[str], later: Sequence[str], threshold: float):
    samples = [values_by_interval[i] for i in base if values_by_interval.get(i) is not None]
    if len(samples) < 2:
        return []
    baseline = build_baseline({metric: samples}, source="baseline intervals")
    out = []
    for i in later:
        v = values_by_interval.get(i)
        if v is None:
            continue
        alert = check_drift(ObservationWindow(metric, (v,), i), baseline, threshold)
        if alert:
            out.append(alert)
    return out


def run_monitoring(predictions_path, labels_path=None, adherence_path=None, settings: MonitorSettings = MonitorSettings()) -> MonitorOutput:
    """Replay prediction, label and adherence logs into alerts and a recommendation.

    Predictions: ``patient_id,score,predicted_label,date`` with an optional
    ``stratum`` column.  Labels: ``patient_id,event,event_date``.  Adherence:
    ``interval,flagged,orders,completed``.  Intervals are calendar months;
    the first ``baseline_intervals`` months form the reference period.
    """
    preds = _read(predictions_path, ["patient_id", "score", "predicted_label", "date"])
    by_key: dict[tuple[str, str, str], list[float]] = defaultdict(list)
    first_pred: dict[str, dict] = {}
    for row in preds:
        month = _month(row["date"])
        strata = [ALL] + ([row["stratum"]] if row.get("stratum") else [])
        for s in strata:
            by_key[("score", s, month)].append(float(row["score"]))
            by_key[("predicted_label", s, month)].append(float(row["predicted_label"]))
        first_pred.setdefault(row["patient_id"], row)

    months = sorted({k[2] for k in by_key})
    base, later = months[: settings.baseline_intervals], months[settings.baseline_intervals:]
    alerts: list[AlertEvent] = []

    ref_samples = defaultdict(list)
    for (metric, stratum, month), vals in by_key.items():
        if month in base:
            ref_samples[(metric, stratum)].extend(vals)
    if ref_samples:
        baseline = build_baseline({k: v for k, v in ref_samples.items() if len(v) >= 2}, "baseline intervals")
        for (metric, stratum, month), vals in sorted(by_key.items()):
            if month in later and (metric, stratum) in baseline.stats:
                a = check_drift(ObservationWindow(metric, vals, month, stratum), baseline, settings.threshold)
                if a:
                    alerts.append(a)

    bins: list[BinSensitivity] = []
    if labels_path is not None:
        labels = {r["patient_id"]: r for r in _read(labels_path, ["patient_id", "event", "event_date"])}
        all_dates = [r["date"] for r in preds] + [r["event_date"] for r in labels.values() if r["event_date"]]
        as_of = date.fromisoformat(settings.analysis_date or max(all_dates))
        records, month_of = [], []
        for pid, p in first_pred.items():
            lab = labels.get(pid)
            pdate = date.fromisoformat(p["date"])
            event = bool(lab and lab["event"] == "1")
            tte = (date.fromisoformat(lab["event_date"]) - pdate).days if event else None
            if tte is not None and tte > LABEL_LAG_DAYS:
                event, tte = False, None  # outside the outcome window
            records.append(LabeledPrediction(pid, p["predicted_label"] == "1", event, tte, max(0, (as_of - pdate).days)))
            month_of.append(_month(p["date"]))
        bins = time_stratified_sensitivity(records, settings.bin_edges)
        lo, hi = settings.bin_edges[0], settings.bin_edges[1]
        per_month = {}
        for m in months:
            sub = [r for r, mm in zip(records, month_of) if mm == m]
            per_month[m] = time_stratified_sensitivity(sub, settings.bin_edges)[0].sensitivity
        alerts += _series_alerts(per_month, f"sensitivity_{lo:g}_{hi:g}d", base, later, settings.threshold)

    adherence = []
    if adherence_path is not None:
        rows = _read(adherence_path, ["interval", "flagged", "orders", "completed"])
        uptake, adoption = {}, {}
        for r in rows:
            f, o, c = int(r["flagged"]), int(r["orders"]), int(r["completed"])
            u, a = adherence_metrics(f, o, c)
            adherence.append((r["interval"], f, o, c, u, a))
            uptake[r["interval"]], adoption[r["interval"]] = u, a
        order = [r["interval"] for r in rows]
        ab, al = order[: settings.baseline_intervals], order[settings.baseline_intervals:]
        alerts += _series_alerts(uptake, "uptake", ab, al, settings.threshold)
        alerts += _series_alerts(adoption, "adoption", ab, al, settings.threshold)
        later = sorted(set(later) | set(al))

    alerts.sort(key=lambda a: (a.interval, a.metric, a.stratum))
    history = [[a for a in alerts if a.interval == i] for i in later]
    rec = evaluate_update_trigger(history, settings.retire_after)
    return MonitorOutput(tuple(alerts), tuple(bins), tuple(adherence), tuple(later), rec, tuple(base))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "inf" if v == math.inf else "-inf" if v == -math.inf else f"{v:.6f}"
    return str(v)


def alerts_csv(alerts: Sequence[AlertEvent]) -> str:
    lines = ["metric,stratum,interval,observed_mean,reference_mean,reference_std,deviation_std,degenerate"]
    for a in alerts:
        lines.append(",".join([
            a.metric, a.stratum, a.interval, _fmt(a.observed_mean), _fmt(a.reference_mean),
            _fmt(a.reference_std), _fmt(a.deviation), "1" if a.degenerate else "0",
        ]))
    return "\n".join(lines) + "\n"
