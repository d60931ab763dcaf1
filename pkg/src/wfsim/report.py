"""Markdown summary assembled from the files other commands produced."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping

from .sweep import read_csv, saturation_point

__all__ = ["MissingArtifact", "assemble_report", "SECTIONS", "NOT_RUN"]

NOT_RUN = "_Not run._"
SECTIONS = (
    "Use Case",
    "Usefulness Estimates by Workflow Simulation",
    "Financial Projections",
    "Sensitivities",
    "Monitoring Plan",
)


class MissingArtifact(FileNotFoundError):
    pass


def _rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _table(header, rows) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return out


def _use_case(meta: Mapping[str, str]) -> list[str]:
    if not meta:
        return [NOT_RUN]
    return [f"- **{k.replace('_', ' ').capitalize()}:** {v}" for k, v in meta.items()]


def _usefulness(artifacts, sweeps) -> list[str]:
    lines = []
    sim = artifacts.get("simulation")
    if sim:
        acc: dict[tuple[str, str], list[float]] = {}
        for r in _rows(sim):
            if r["relative_utility_pct"] != "":
                acc.setdefault((r["arm"], r["strategy"]), []).append(float(r["relative_utility_pct"]))
        body = [(arm, strat, f"{sum(v) / len(v):.2f}%", len(v)) for (arm, strat), v in acc.items()]
        lines += ["Relative achieved utility per arm (Treat None = 0%, Optimistic = 100%):", ""]
        lines += _table(["Arm", "Strategy", "Relative utility", "Replicates"], body)
    for sw in sweeps:
        path = artifacts.get(f"sweep:{sw['name']}")
        if not path:
            continue
        res = read_csv(path, sw["axis1"], sw.get("axis2"))
        lines += ["", f"Sweep `{sw['name']}` ({sw['kind']}), {res.replicates} replicates:"]
        if res.axis2 is None:
            lines += [""] + _table(
                [sw["axis1"], "Relative utility (%)", "SE (%)"],
                [(a, f"{m:.2f}", f"{s:.2f}") for a, _, m, s in res.cells()],
            )
            if sw["kind"] == "capacity":
                lines += ["", f"Saturation {sw['axis1']} (within 1 pp of the best cell): {saturation_point(res)}"]
        else:
            lines += [""] + _table(
                [f"{sw['axis1']} \\ {sw['axis2']}"] + [f"{b:g}" for b in res.axis2.values],
                [[a] + [f"{res.mean[i, j]:.1f}" for j in range(res.mean.shape[1])] for i, a in enumerate(res.axis1.values)],
            )
    return lines or [NOT_RUN]


def _finance(artifacts) -> list[str]:
    path = artifacts.get("cashflow")
    if not path:
        return [NOT_RUN]
    rows = _rows(path)
    header = [""] + [("Y0 (Deployment)" if r["year"] == "0" else f"Y{r['year']}") for r in rows]
    body = [[label] + [f"$ {r[key]}" for r in rows] for label, key in (("Revenue", "revenue"), ("Cost", "cost"), ("Margin", "margin"))]
    return _table(header, body)


def _sensitivity(artifacts) -> list[str]:
    path = artifacts.get("sensitivity")
    if not path:
        return [NOT_RUN]
    rows = _rows(path)
    half = (len(rows) + 1) // 2
    fmt = lambda r: f"- {r['parameter'].replace('_', ' ')} ({float(r['delta_pct']):+.2f}% margin, $ {r['delta_abs']})"  # noqa: E731
    return (["Most sensitive to a 10% increase in:"] + [fmt(r) for r in rows[:half]]
            + ["", "Least sensitive to a 10% increase in:"] + [fmt(r) for r in rows[half:]])


def _monitoring(artifacts, plan) -> list[str]:
    lines = []
    if plan:
        lines += [f"- {k.replace('_', ' ')}: {v}" for k, v in plan.items()]
    summary = artifacts.get("monitor_summary")
    if summary:
        s = json.loads(Path(summary).read_text())
        lines += ["", f"Alerts raised: {s['n_alerts']} across {len(s['intervals'])} monitored intervals.",
                  f"Recommendation for the latest interval: **{s['recommendation']}**"]
        for a in s.get("alerts", []):
            lines.append(f"- {a['interval']} {a['metric']} [{a['stratum']}]: {a['deviation_std']} std")
    return lines or [NOT_RUN]


def assemble_report(artifacts: Mapping[str, str | Path], use_case=None, sweeps=(), monitoring_plan=None) -> str:
    """Build the summary document.

    ``artifacts`` maps artifact names (``simulation``, ``sweep:<name>``,
    ``cashflow``, ``sensitivity``, ``monitor_summary``) to files; sections
    without their artifact say so.
    """
    for name, path in artifacts.items():
        if not Path(path).is_file():
            raise MissingArtifact(f"artifact {name!r} not found at {path}")
    body = {
        "Use Case": _use_case(use_case or {}),
        "Usefulness Estimates by Workflow Simulation": _usefulness(artifacts, sweeps),
        "Financial Projections": _finance(artifacts),
        "Sensitivities": _sensitivity(artifacts),
        "Monitoring Plan": _monitoring(artifacts, monitoring_plan),
    }
    title = (use_case or {}).get("name", "Model-guided workflow")
    out = [f"# Assessment Summary: {title}", ""]
    for heading in SECTIONS:
        out += [f"## {heading}", ""] + body[heading] + [""]
    return "\n".join(out)
