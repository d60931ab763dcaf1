"""Synthetic patient cohorts and discrimination metrics.

Risk scores come from a parameterised classifier instead of a trained
model.  The binormal family is the workhorse: negatives score ``Phi(z)``
and positives ``Phi(z + d)`` with ``z`` standard normal, so the AUROC is
``Phi(d / sqrt(2))`` and one number fixes the model's discrimination.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import special, stats

from .workflow import DiseaseState

__all__ = [
    "Binormal",
    "Constant",
    "Empirical",
    "CohortSpec",
    "Patient",
    "Cohort",
    "InvalidSpec",
    "DegenerateLabels",
    "generate_cohort",
    "auroc",
    "binormal_auroc",
    "calibrate_separation",
    "load_empirical_scores",
]


class InvalidSpec(ValueError):
    pass


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class Binormal:
    separation: float

    def __post_init__(self):
        if not self.separation >= 0 or not math.isfinite(self.separation):
            raise InvalidSpec(f"binormal separation must be finite and >= 0, got {self.separation}")

    @classmethod
    def from_auroc(cls, target: float) -> "Binormal":
        return cls(calibrate_separation(target))


@dataclass(frozen=True)
class Constant:
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidSpec(f"constant score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class Empirical:
    """Resamples scores from a labelled score file, separately per class."""

    negatives: tuple[float, ...]
    positives: tuple[float, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "negatives", tuple(float(x) for x in self.negatives))
        object.__setattr__(self, "positives", tuple(float(x) for x in self.positives))
        if not self.negatives or not self.positives:
            raise InvalidSpec("empirical classifier needs at least one score per class")
        if any(not 0.0 <= x <= 1.0 for x in self.negatives + self.positives):
            raise InvalidSpec("empirical scores must lie in [0, 1]")

    @classmethod
    def from_file(cls, path) -> "Empirical":
        labels, scores = load_empirical_scores(path)
        return cls(
            negatives=tuple(scores[labels == 0]),
            positives=tuple(scores[labels == 1]),
            source=str(path),
        )


def load_empirical_scores(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``label,score`` file (header required); returns int labels, float scores."""
    labels, scores = [], []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["label", "score"]:
            raise InvalidSpec(f"{path}: expected header 'label,score', got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            label = row["label"].strip()
            if label not in ("0", "1"):
                raise InvalidSpec(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            score = float(row["score"])
            if not 0.0 <= score <= 1.0:
                raise InvalidSpec(f"{path}:{lineno}: score {score} outside [0, 1]")
            labels.append(int(label))
            scores.append(score)
    return np.asarray(labels, dtype=np.int8), np.asarray(scores, dtype=float)


Classifier = Binormal | Constant | Empirical


@dataclass(frozen=True)
class CohortSpec:
    n_per_day: int = 100
    horizon_days: int = 100
    prevalence: float = 0.10
    severe_fraction: float = 0.5
    classifier: Classifier = Binormal(0.0)
    seed: int = 0

    def validate(self) -> None:
        if int(self.n_per_day) != self.n_per_day or self.n_per_day < 0:
            raise InvalidSpec(f"n_per_day must be a non-negative integer, got {self.n_per_day}")
        if int(self.horizon_days) != self.horizon_days or self.horizon_days < 1:
            raise InvalidSpec(f"horizon_days must be an integer >= 1, got {self.horizon_days}")
        for name in ("prevalence", "severe_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidSpec(f"{name} must lie in [0, 1], got {v}")
        if not isinstance(self.classifier, (Binormal, Constant, Empirical)):
            raise InvalidSpec(f"unsupported classifier {self.classifier!r}")


@dataclass(frozen=True)
class Patient:
    id: int
    true_state: DiseaseState
    risk_score: float
    arrival_day: int


class Cohort(Sequence):
    """Column-oriented cohort; indexes and iterates as :class:`Patient` records."""

    def __init__(self, ids, true_state, risk_score, arrival_day, horizon_days=None):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.true_state = np.asarray(true_state, dtype=np.int8)
        self.risk_score = np.asarray(risk_score, dtype=float)
        self.arrival_day = np.asarray(arrival_day, dtype=np.int64)
        n = len(self.ids)
        if not (len(self.true_state) == len(self.risk_score) == len(self.arrival_day) == n):
            raise InvalidSpec("cohort columns differ in length")
        if horizon_days is None:
            horizon_days = int(self.arrival_day.max()) + 1 if n else 1
        self.horizon_days = int(horizon_days)
        for arr in (self.ids, self.true_state, self.risk_score, self.arrival_day):
            arr.setflags(write=False)

    @classmethod
    def from_patients(cls, patients: Sequence[Patient], horizon_days=None) -> "Cohort":
        if isinstance(patients, Cohort):
            return patients
        return cls(
            [p.id for p in patients],
            [int(p.true_state) for p in patients],
            [p.risk_score for p in patients],
            [p.arrival_day for p in patients],
            horizon_days,
        )

    def __len__(self):
        return len(self.ids)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return Patient(
            int(self.ids[i]),
            DiseaseState(int(self.true_state[i])),
            float(self.risk_score[i]),
            int(self.arrival_day[i]),
        )

    def __iter__(self) -> Iterator[Patient]:
        for i in range(len(self)):
            yield self[i]

    @property
    def diseased(self) -> np.ndarray:
        return self.true_state != DiseaseState.NO_DISEASE

    def with_scores(self, scores) -> "Cohort":
        scores = np.broadcast_to(np.asarray(scores, dtype=float), self.risk_score.shape)
        return Cohort(self.ids, self.true_state, scores.copy(), self.arrival_day, self.horizon_days)

    def equals(self, other: "Cohort") -> bool:
        return (
            self.horizon_days == other.horizon_days
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.true_state, other.true_state)
            and np.array_equal(self.risk_score, other.risk_score)
            and np.array_equal(self.arrival_day, other.arrival_day)
        )


def generate_cohort(spec: CohortSpec) -> Cohort:
    """Draw ``n_per_day * horizon_days`` patients; fully determined by ``spec.seed``."""
    spec.validate()
    n = int(spec.n_per_day) * int(spec.horizon_days)
    state_seq, score_seq = np.random.SeedSequence(spec.seed).spawn(2)
    state_rng = np.random.default_rng(state_seq)
    score_rng = np.random.default_rng(score_seq)

    u = state_rng.random((2, n))
    diseased = u[0] < spec.prevalence
    severe = diseased & (u[1] < spec.severe_fraction)
    true_state = np.where(severe, DiseaseState.SEVERE, np.where(diseased, DiseaseState.MODERATE, DiseaseState.NO_DISEASE))

    clf = spec.classifier
    if isinstance(clf, Constant):
        scores = np.full(n, clf.score)
    elif isinstance(clf, Binormal):
        raw = score_rng.standard_normal(n) + clf.separation * diseased
        scores = special.ndtr(raw)
    else:
        neg = np.asarray(clf.negatives)
        pos = np.asarray(clf.positives)
        pick_neg = neg[score_rng.integers(0, len(neg), n)]
        pick_pos = pos[score_rng.integers(0, len(pos), n)]
        scores = np.where(diseased, pick_pos, pick_neg)

    arrival_day = np.repeat(np.arange(spec.horizon_days), spec.n_per_day)
    return Cohort(np.arange(n), true_state, scores, arrival_day, spec.horizon_days)


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with ties counted as one half.

    ``labels`` are truthy for positives.  Sums of mid-ranks are exact
    multiples of 1/2, so the result equals the pairwise count exactly.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUROC needs at least one positive and one negative")
    ranks = stats.rankdata(scores)  # average ranks for ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def binormal_auroc(separation: float) -> float:
    return float(special.ndtr(separation / math.sqrt(2.0)))


def calibrate_separation(target_auroc: float) -> float:
    """Binormal separation whose equal-variance AUROC equals ``target_auroc``."""
    if not 0.5 <= target_auroc < 1.0:
        raise InvalidSpec(f"target AUROC must lie in [0.5, 1), got {target_auroc}")
    return float(math.sqrt(2.0) * special.ndtri(target_auroc))
