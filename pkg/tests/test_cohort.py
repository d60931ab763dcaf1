import itertools

import numpy as np
import pytest
from scipy import stats

from wfsim import (
    Binormal,
    CohortSpec,
    Constant,
    DegenerateLabels,
    Empirical,
    InvalidSpec,
    auroc,
    binormal_auroc,
    calibrate_separation,
    generate_cohort,
)


def brute_auroc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def bisect_separation(target, lo=0.0, hi=20.0):
    # oracle: invert Phi(d / sqrt 2) on the formula by bisection
    for _ in range(200):
        mid = (lo + hi) / 2
        if stats.norm.cdf(mid / np.sqrt(2)) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_constant_zero():
    c = generate_cohort(CohortSpec(10, 5, classifier=Constant(0.0)))
    assert len(c) == 50
    assert np.all(c.risk_score == 0.0)


def test_deterministic_and_seed_sensitive():
    spec = CohortSpec(50, 10, classifier=Binormal(1.0), seed=9)
    assert generate_cohort(spec).equals(generate_cohort(spec))
    assert not generate_cohort(spec).equals(generate_cohort(CohortSpec(50, 10, classifier=Binormal(1.0), seed=10)))


def test_structure():
    c = generate_cohort(CohortSpec(7, 4, seed=1))
    assert list(c.ids) == list(range(28))
    assert list(c.arrival_day) == [d for d in range(4) for _ in range(7)]
    p = c[3]
    assert p.id == 3 and p.arrival_day == 0 and 0 <= p.risk_score <= 1


def test_uninformative_binormal():
    c = generate_cohort(CohortSpec(1000, 100, classifier=Binormal(0.0), seed=2))
    assert abs(auroc(c.risk_score, c.diseased) - 0.5) < 0.01


def test_class_balance():
    spec = CohortSpec(1000, 50, prevalence=0.1, seed=4)
    c = generate_cohort(spec)
    n = len(c)
    se = np.sqrt(0.1 * 0.9 / n)
    assert abs(c.diseased.mean() - 0.1) < 3 * se


def test_invalid_spec():
    for bad in (dict(prevalence=1.5), dict(n_per_day=-1), dict(horizon_days=0), dict(severe_fraction=-0.1)):
        with pytest.raises(InvalidSpec):
            generate_cohort(CohortSpec(**bad))
    with pytest.raises(InvalidSpec):
        Binormal(-1.0)
    with pytest.raises(InvalidSpec):
        Constant(1.5)


def test_auroc_examples():
    assert auroc([0.9, 0.9, 0.1, 0.1], [1, 1, 0, 0]) == 1.0
    assert auroc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    s, l = [0.8, 0.4, 0.6, 0.2], [1, 0, 1, 0]
    assert auroc(s, l) == brute_auroc(s, l)
    with pytest.raises(DegenerateLabels):
        auroc([0.1, 0.2], [0, 0])


def test_auroc_matches_brute_force_with_ties():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 60))
        s = rng.integers(0, 5, n) / 4.0
        l = rng.random(n) < 0.4
        l[0], l[1] = True, False
        assert auroc(s, l) == brute_auroc(s, l)


def test_calibrate_separation():
    assert calibrate_separation(0.5) == 0.0
    d = calibrate_separation(0.9)
    assert abs(d - bisect_separation(0.9)) < 1e-9
    assert abs(binormal_auroc(d) - 0.9) < 1e-9
    assert calibrate_separation(0.8) < calibrate_separation(0.95)
    for bad in (0.4, 1.0):
        with pytest.raises(InvalidSpec):
            calibrate_separation(bad)


def test_empirical_file(tmp_path):
    f = tmp_path / "scores.csv"
    f.write_text("label,score\n0,0.1\n0,0.2\n1,0.8\n1,0.9\n")
    clf = Empirical.from_file(f)
    c = generate_cohort(CohortSpec(100, 10, prevalence=0.3, classifier=clf, seed=1))
    assert set(np.unique(c.risk_score[c.diseased])) <= {0.8, 0.9}
    assert set(np.unique(c.risk_score[~c.diseased])) <= {0.1, 0.2}
    assert auroc(c.risk_score, c.diseased) == 1.0


def test_empirical_file_errors(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("score,label\n0.1,0\n")
    with pytest.raises(InvalidSpec):
        Empirical.from_file(f)
    f.write_text("label,score\n0,1.5\n1,0.5\n")
    with pytest.raises(InvalidSpec):
        Empirical.from_file(f)
    f.write_text("label,score\n0,0.5\n")
    with pytest.raises(InvalidSpec):
        Empirical.from_file(f)
