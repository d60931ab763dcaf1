"""Multi-year margin projection, one-at-a-time sensitivities, and Little's Law.

Money is held as integer minor units (cents).  Each line item is rounded
once, and totals are sums of rounded items, so ``margin == revenue - cost``
and the breakdowns add up exactly.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Iterable

__all__ = [
    "FinancialModel",
    "YearFlow",
    "CashFlow",
    "SensitivityEntry",
    "SensitivityReport",
    "InvalidModel",
    "project_cashflow",
    "sensitivity_analysis",
    "PERTURBABLE",
    "Rate",
    "Duration",
    "UnitMismatch",
    "littles_law",
    "cashflow_csv",
    "sensitivity_csv",
    "format_money",
]


class InvalidModel(ValueError):
    pass


_FRACTIONS = ("volume_growth", "retention_rate", "flag_rate", "ppv", "operating_cost_rate", "inflation_rate")


@dataclass(frozen=True)
class FinancialModel:
    horizon_years: int = 5
    volume_y0: float = 0.0
    volume_growth: float = 0.0
    retention_rate: float = 1.0
    flag_rate: float = 0.0
    ppv: float = 0.0
    revenue_per_true_positive: float = 0.0
    revenue_per_false_positive: float = 0.0
    cost_fixed_y0: float = 0.0
    cost_maintenance: float = 0.0
    cost_per_intervention: float = 0.0
    operating_cost_rate: float = 0.0
    inflation_rate: float = 0.0

    def validate(self) -> None:
        if int(self.horizon_years) != self.horizon_years or self.horizon_years < 1:
            raise InvalidModel(f"horizon_years must be an integer >= 1, got {self.horizon_years}")
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InvalidModel(f"{f.name} must be finite, got {v}")
        for name in _FRACTIONS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidModel(f"{name} must lie in [0, 1], got {v}")
        if self.volume_y0 < 0:
            raise InvalidModel("volume_y0 must be >= 0")


PERTURBABLE = tuple(f.name for f in fields(FinancialModel) if f.name != "horizon_years")


def _cents(amount: float) -> int:
    return int(round(amount * 100))


def format_money(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    q, r = divmod(abs(int(cents)), 100)
    return f"{sign}{q}.{r:02d}"


@dataclass(frozen=True)
class YearFlow:
    year: int
    volume: float
    flagged: float
    true_positives: float
    false_positives: float
    revenue_tp: int
    revenue_fp: int
    cost_fixed: int
    cost_maintenance: int
    cost_intervention: int
    cost_operating: int

    @property
    def revenue(self) -> int:
        return self.revenue_tp + self.revenue_fp

    @property
    def cost(self) -> int:
        return self.cost_fixed + self.cost_maintenance + self.cost_intervention + self.cost_operating

    @property
    def margin(self) -> int:
        return self.revenue - self.cost


@dataclass(frozen=True)
class CashFlow:
    years: tuple[YearFlow, ...]

    @property
    def margins(self) -> list[int]:
        return [y.margin for y in self.years]

    def margin(self, year: int) -> int:
        return self.years[year].margin


def _project(m: FinancialModel) -> CashFlow:
    years = []
    for y in range(int(m.horizon_years) + 1):
        volume = m.volume_y0 * (1 + m.volume_growth) ** y * m.retention_rate ** y
        flagged = volume * m.flag_rate
        tp = flagged * m.ppv
        fp = flagged - tp
        revenue_tp = _cents(tp * m.revenue_per_true_positive)
        revenue_fp = _cents(fp * m.revenue_per_false_positive)
        inflate = (1 + m.inflation_rate) ** y
        years.append(YearFlow(
            year=y,
            volume=volume,
            flagged=flagged,
            true_positives=tp,
            false_positives=fp,
            revenue_tp=revenue_tp,
            revenue_fp=revenue_fp,
            cost_fixed=_cents(m.cost_fixed_y0) if y == 0 else 0,
            cost_maintenance=_cents(m.cost_maintenance * inflate),
            cost_intervention=_cents(flagged * m.cost_per_intervention * inflate),
            cost_operating=_cents(m.operating_cost_rate * (revenue_tp + revenue_fp) / 100 * inflate),
        ))
    return CashFlow(tuple(years))


def project_cashflow(model: FinancialModel) -> CashFlow:
    """Year-by-year revenue, cost and margin for Y0 (deployment) through Yn.

    Volume compounds with growth and retention; flagged patients split into
    true and false positives by PPV, each with its own revenue per patient.
    Maintenance, per-intervention and operating costs (a share of revenue)
    are inflated by ``(1 + inflation) ** y``; the fixed build cost falls in Y0.
    """
    model.validate()
    return _project(model)


@dataclass(frozen=True)
class SensitivityEntry:
    parameter: str
    delta_abs: int  # minor units
    delta_pct: float
    rank: int


@dataclass(frozen=True)
class SensitivityReport:
    entries: tuple[SensitivityEntry, ...]
    target_year: int
    perturbation: float
    base_margin: int

    @property
    def most_sensitive(self) -> tuple[SensitivityEntry, ...]:
        return self.entries[: (len(self.entries) + 1) // 2]

    @property
    def least_sensitive(self) -> tuple[SensitivityEntry, ...]:
        return self.entries[(len(self.entries) + 1) // 2:]

    def ranking(self) -> list[str]:
        return [e.parameter for e in self.entries]


def sensitivity_analysis(
    model: FinancialModel,
    perturbation: float = 0.10,
    target_year: int | None = None,
    parameters: Iterable[str] = PERTURBABLE,
) -> SensitivityReport:
    """Scale each parameter by ``1 + perturbation`` alone and record the margin change.

    Perturbed models are evaluated as-is, even when the scaled value leaves
    its nominal range (a PPV of 0.95 becomes 1.045): the point is the local
    response, not a second valid scenario.  Entries are ranked by absolute
    change, ties in declaration order.
    """
    model.validate()
    year = int(model.horizon_years) if target_year is None else int(target_year)
    if not 0 <= year <= model.horizon_years:
        raise InvalidModel(f"target_year {year} outside 0..{model.horizon_years}")
    base = _project(model).margin(year)
    raw = []
    for name in parameters:
        if name not in PERTURBABLE:
            raise InvalidModel(f"cannot perturb {name!r}")
        bumped = replace(model, **{name: getattr(model, name) * (1 + perturbation)})
        delta = _project(bumped).margin(year) - base
        pct = 100.0 * delta / abs(base) if base else (0.0 if delta == 0 else math.copysign(math.inf, delta))
        raw.append((name, delta, pct))
    order = sorted(range(len(raw)), key=lambda i: (-abs(raw[i][1]), i))
    entries = tuple(SensitivityEntry(raw[i][0], raw[i][1], raw[i][2], rank + 1) for rank, i in enumerate(order))
    return SensitivityReport(entries, year, perturbation, base)


def cashflow_csv(flow: CashFlow) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["year", "revenue", "cost", "margin"])
    for y in flow.years:
        w.writerow([y.year, format_money(y.revenue), format_money(y.cost), format_money(y.margin)])
    return buf.getvalue()


def sensitivity_csv(report: SensitivityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "delta_abs", "delta_pct", "rank"])
    for e in report.entries:
        w.writerow([e.parameter, format_money(e.delta_abs), f"{e.delta_pct:.6f}", e.rank])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Little's Law


class UnitMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Rate:
    """``value`` items per one ``per`` (e.g. 1 assessment per month)."""

    value: float | Fraction
    per: str


@dataclass(frozen=True)
class Duration:
    value: float | Fraction
    unit: str


def littles_law(arrival_rate, time_in_system):
    """Average work in progress ``L = lambda * W``.

    Either both arguments are plain numbers (units assumed consistent) or a
    :class:`Rate` and a :class:`Duration` in the same time unit.  Fractions
    stay exact.
    """
    if isinstance(arrival_rate, Rate) or isinstance(time_in_system, Duration):
        if not (isinstance(arrival_rate, Rate) and isinstance(time_in_system, Duration)):
            raise UnitMismatch("pass a Rate with a Duration, or two plain numbers")
        if arrival_rate.per != time_in_system.unit:
            raise UnitMismatch(f"rate is per {arrival_rate.per!r} but time is in {time_in_system.unit!r}")
        lam, w = arrival_rate.value, time_in_system.value
    else:
        lam, w = arrival_rate, time_in_system
    if lam < 0 or w < 0:
        raise ValueError("arrival rate and time in system must be >= 0")
    return lam * w
