import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfqnn import metrics
from hfqnn.errors import DataError


def tally(pred, truth):
    counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for p, t in zip(pred, truth):
        key = ("t" if p == t else "f") + ("p" if p == 1 else "n")
        counts[key] += 1
    return counts


def test_perfect_prediction():
    cm = metrics.confusion([1, 1, 0, 0], [1, 1, 0, 0])
    assert cm == metrics.ConfusionMatrix(tp=2, tn=2, fp=0, fn=0)
    m = metrics.derive(cm)
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)
    assert m.undefined == ()


def test_swapped_errors():
    cm = metrics.confusion([1, 0], [0, 1])
    assert (cm.fp, cm.fn, cm.tp, cm.tn) == (1, 1, 0, 0)


def test_brute_force_tally(rng):
    pred, truth = rng.integers(0, 2, 200), rng.integers(0, 2, 200)
    assert metrics.confusion(pred, truth) == metrics.ConfusionMatrix(**tally(pred, truth))


def test_no_positives_flags_undefined():
    m = metrics.derive(metrics.ConfusionMatrix(tp=0, tn=10, fp=0, fn=0))
    assert m.accuracy == 1.0
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    assert set(m.undefined) == {"precision", "recall", "f1"}


def test_substitution_values():
    m = metrics.derive(metrics.ConfusionMatrix(tp=90, tn=80, fp=10, fn=20))
    assert m.accuracy == pytest.approx(0.85, abs=1e-15)
    assert m.precision == pytest.approx(0.9, abs=1e-15)
    assert m.recall == pytest.approx(90 / 110, abs=1e-15)
    assert m.recall == pytest.approx(0.81818, abs=1e-5)
    assert m.f1 == pytest.approx(0.85714, abs=1e-5)


def test_errors():
    with pytest.raises(DataError):
        metrics.confusion([0, 1], [0])
    with pytest.raises(DataError):
        metrics.confusion([0, 2], [0, 1])
    with pytest.raises(DataError):
        metrics.derive(metrics.ConfusionMatrix(0, 0, 0, 0))


labels = st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200)


@settings(max_examples=200, deadline=None)
@given(pairs=labels)
def test_metric_properties(pairs):
    pred, truth = map(list, zip(*pairs))
    cm = metrics.confusion(pred, truth)
    assert cm.total == len(pred)
    m = metrics.derive(cm)
    for v in (m.accuracy, m.precision, m.recall, m.f1):
        assert 0.0 <= v <= 1.0
    if "f1" not in m.undefined:
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
    swapped = metrics.confusion(truth, pred)
    assert swapped == cm.transpose()
    assert metrics.derive(swapped).accuracy == m.accuracy
