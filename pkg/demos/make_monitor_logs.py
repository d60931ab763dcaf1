"""Regenerate the synthetic monitoring logs bundled with the PAD example.

Nine months of predictions.  From month seven on, scores drift upward and
referral completion falls off, so replaying the logs raises alerts.

    python3 demos/make_monitor_logs.py src/wfsim/data
"""

import csv
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

PER_MONTH = 40
MONTHS = 9


def main(dest: Path) -> None:
    rng = np.random.default_rng(11)
    preds, labels = [], []
    pid = 0
    for m in range(MONTHS):
        shift = 0.3 if m >= 6 else 0.0
        for k in range(PER_MONTH):
            day = date(2024, m + 1, 1) + timedelta(days=int(rng.integers(0, 28)))
            diseased = rng.random() < 0.12
            score = float(np.clip(rng.beta(2, 8) + (0.35 if diseased else 0.0) + shift, 0, 1))
            flagged = score > 0.45
            stratum = "clinic_a" if k % 2 == 0 else "clinic_b"
            preds.append((f"p{pid:04d}", f"{score:.4f}", int(flagged), day.isoformat(), stratum))
            if diseased:
                labels.append((f"p{pid:04d}", 1, (day + timedelta(days=int(rng.integers(5, 300)))).isoformat()))
            else:
                labels.append((f"p{pid:04d}", 0, ""))
            pid += 1
    adherence = []
    for m in range(MONTHS):
        flagged = sum(1 for p in preds if p[3].startswith(f"2024-{m + 1:02d}") and p[2])
        uptake = 0.8 if m < 6 else 0.45
        orders = round(flagged * uptake)
        adherence.append((f"2024-{m + 1:02d}", flagged, orders, round(orders * 0.6)))

    dest.mkdir(parents=True, exist_ok=True)
    for name, header, rows in (
        ("monitor_predictions.csv", ("patient_id", "score", "predicted_label", "date", "stratum"), preds),
        ("monitor_labels.csv", ("patient_id", "event", "event_date"), labels),
        ("monitor_adherence.csv", ("interval", "flagged", "orders", "completed"), adherence),
    ):
        with open(dest / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "src/wfsim/data"))
