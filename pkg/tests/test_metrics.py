import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from neoseize.errors import EmptyEvaluation, LengthMismatch, NonBinaryValue, SingleClassLabels
from neoseize.metrics import ConfusionCounts, auc, confusion, evaluate, metrics, roc_curve


def hand_metrics(tp, fp, tn, fn):
    def div(a, b):
        return a / b if b else 0.0

    return {
        "accuracy": (tp + tn) / (tp + fp + tn + fn),
        "precision1": div(tp, tp + fp),
        "recall1": div(tp, tp + fn),
        "f1_1": div(2 * tp, 2 * tp + fp + fn),
        "precision0": div(tn, tn + fn),
        "recall0": div(tn, tn + fp),
        "f1_0": div(2 * tn, 2 * tn + fn + fp),
    }


class TestConfusion:
    def test_perfect(self):
        assert confusion([1, 1, 0, 0], [1, 1, 0, 0]) == ConfusionCounts(2, 0, 2, 0)

    def test_all_wrong_positive(self):
        assert confusion([1] * 5, [0] * 5) == ConfusionCounts(0, 5, 0, 0)

    def test_counting_oracle(self, rng):
        p, t = rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)
        c = confusion(p, t)
        tally = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
        for a, b in zip(p, t):
            tally[("t" if a == b else "f") + ("p" if a else "n")] += 1
        assert c == ConfusionCounts(**tally)
        assert c.total == 1000

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            confusion([0, 1], [0])
        with pytest.raises(NonBinaryValue):
            confusion([0, 2], [0, 1])


class TestMetrics:
    def test_worked_example(self):
        r = metrics(ConfusionCounts(tp=3, fp=1, tn=4, fn=2))
        assert r.precision[1] == 0.75
        assert r.recall[1] == 0.6
        assert r.f1[1] == pytest.approx(2 / 3, abs=1e-12)
        assert r.accuracy == 0.7
        assert r.sensitivity == r.recall[1]

    def test_perfect(self):
        r = metrics(ConfusionCounts(tp=4, fp=0, tn=6, fn=0))
        assert r.accuracy == r.precision[1] == r.recall[1] == r.f1[1] == 1.0
        assert not r.degenerate

    def test_no_positives_flagged(self):
        r = metrics(ConfusionCounts(tp=0, fp=0, tn=5, fn=0))
        assert r.recall[1] == 0.0 and "recall1" in r.degenerate
        assert r.precision[1] == 0.0 and "precision1" in r.degenerate

    def test_random_against_hand_values(self, rng):
        for _ in range(20):
            tp, fp, tn, fn = (int(v) for v in rng.integers(0, 50, 4))
            if tp + fp + tn + fn == 0:
                continue
            r = metrics(ConfusionCounts(tp, fp, tn, fn))
            ref = hand_metrics(tp, fp, tn, fn)
            got = {"accuracy": r.accuracy, "precision1": r.precision[1], "recall1": r.recall[1],
                   "f1_1": r.f1[1], "precision0": r.precision[0], "recall0": r.recall[0],
                   "f1_0": r.f1[0]}
            for key, value in ref.items():
                assert abs(got[key] - value) <= 1e-12, key

    @given(st.tuples(*[st.integers(0, 30)] * 4).filter(lambda c: sum(c) > 0))
    @settings(max_examples=200, deadline=None)
    def test_ranges_and_harmonic_mean(self, c):
        r = metrics(ConfusionCounts(*c))
        for value in (r.accuracy, *r.precision, *r.recall, *r.f1):
            assert 0.0 <= value <= 1.0
        for cls in (0, 1):
            p, q = r.precision[cls], r.recall[cls]
            if p + q > 0:
                assert r.f1[cls] == pytest.approx(2 * p * q / (p + q), abs=1e-12)
        assert r.accuracy == (c[0] + c[2]) / sum(c)

    def test_empty(self):
        with pytest.raises(EmptyEvaluation):
            metrics(ConfusionCounts(0, 0, 0, 0))


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_equal(self):
        assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    def test_pair_counting_oracle(self, rng):
        for _ in range(10):
            s = np.round(rng.random(200), 2)  # rounding creates ties
            y = rng.integers(0, 2, 200)
            assert abs(auc(s, y) - oracles.auc_pairs(s.tolist(), y.tolist())) <= 1e-12

    def test_monotone_transform_invariance(self, rng):
        s = rng.normal(size=100)
        y = rng.integers(0, 2, 100)
        base = auc(s, y)
        for f in (np.exp, lambda v: 3 * v + 1, lambda v: np.arctan(v) ** 3):
            assert auc(f(s), y) == pytest.approx(base, abs=1e-12)

    def test_curve_endpoints(self, rng):
        fpr, tpr = roc_curve(rng.random(50), np.r_[np.zeros(25), np.ones(25)].astype(int))
        assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0.0, 0.0, 1.0, 1.0)
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)

    def test_single_class(self):
        with pytest.raises(SingleClassLabels):
            auc([0.1, 0.2], [1, 1])


def test_evaluate(rng):
    y = rng.integers(0, 2, 50)
    s = rng.random(50)
    r = evaluate((s > 0.5).astype(int), y, s)
    assert r.auc == auc(s, y)
    assert evaluate(y, y).auc is None
