import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hireg.bias_correction import SlidingWindow, batch_bias, correct, window_bias, window_push
from hireg.errors import DimensionError


def test_batch_identical_lists():
    xs = np.random.default_rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(batch_bias(xs, xs), np.zeros(3))


def test_batch_constant_difference():
    ls = np.random.default_rng(1).standard_normal((4, 3))
    d = np.array([0.1, -0.2, 0.3])
    np.testing.assert_allclose(batch_bias(ls + d, ls), d, rtol=1e-12)


def test_batch_two_pairs():
    hr = [[0.0, 1.0, 0.0], [0.0, 3.0, 0.0]]
    np.testing.assert_allclose(batch_bias(hr, np.zeros((2, 3))), [0.0, 2.0, 0.0])


@pytest.mark.parametrize("hr, ls", [(np.zeros((0, 3)), np.zeros((0, 3))), (np.zeros((2, 3)), np.zeros((3, 3)))])
def test_batch_rejects(hr, ls):
    with pytest.raises(DimensionError):
        batch_bias(hr, ls)


def test_push_into_empty():
    w = window_push(SlidingWindow(5, 3), np.ones(3))
    assert len(w) == 1
    assert w.tc == 0


def test_fifo_eviction():
    w = SlidingWindow(3, 1)
    for i in range(4):
        w.push([float(i)])
    assert [e[0] for e in w.entries] == [1.0, 2.0, 3.0]
    w.push([4.0])
    assert [e[0] for e in w.entries] == [2.0, 3.0, 4.0]


def test_push_dimension_mismatch():
    with pytest.raises(DimensionError):
        SlidingWindow(3, 3).push(np.ones(2))


def test_underfilled_bias_is_zero():
    w = SlidingWindow(4, 2)
    for _ in range(3):
        w.push([5.0, 5.0])
    np.testing.assert_array_equal(window_bias(w), np.zeros(2))
    np.testing.assert_array_equal(correct(np.array([1.0, 2.0]), w), [1.0, 2.0])


def test_full_constant_window():
    d = np.array([0.5, -1.0, 2.0])
    w = SlidingWindow(10, 3)
    for _ in range(10):
        w.push(d)
    np.testing.assert_allclose(w.bias(), d, rtol=1e-15)
    np.testing.assert_allclose(w.correct(np.array([1.0, 1.0, 1.0])), 1.0 - d, rtol=1e-15)


def test_full_window_mean_matches_recomputed():
    rng = np.random.default_rng(5)
    samples = rng.uniform(-1, 1, (250, 3))
    w = SlidingWindow(200, 3)
    for s in samples:
        w.push(s)
    np.testing.assert_allclose(w.bias(), samples[-200:].mean(axis=0), rtol=1e-12, atol=1e-15)


def test_bias_appears_exactly_at_capacity():
    w = SlidingWindow(200, 1)
    for i in range(199):
        w.push([1.0])
        assert w.bias()[0] == 0.0
    w.push([1.0])
    assert w.full
    assert w.bias()[0] == 1.0


def test_tick_tracking():
    w = SlidingWindow(5, 1, t0=10)
    assert w.tc == 9
    w.push([0.0])
    assert w.tc == 10
    w.push([0.0], tick=42)
    assert w.tc == 42


def test_capacity_must_be_positive():
    with pytest.raises(ValueError):
        SlidingWindow(0)


def test_correct_dimension_mismatch():
    with pytest.raises(DimensionError):
        SlidingWindow(2, 3).correct(np.ones(2))


@given(st.lists(st.floats(-100, 100), min_size=6, max_size=6), st.randoms())
@settings(max_examples=50)
def test_bias_permutation_invariant(values, rnd):
    w1, w2 = SlidingWindow(6, 1), SlidingWindow(6, 1)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    for a, b in zip(values, shuffled):
        w1.push([a])
        w2.push([b])
    assert w1.bias()[0] == pytest.approx(w2.bias()[0], rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("capacity, tol", [(50, 0.1), (200, 0.05), (1000, 0.025)])
def test_bias_concentrates_on_true_offset(capacity, tol):
    d = np.array([0.3, -0.1, 0.2])
    rng = np.random.default_rng(capacity)
    w = SlidingWindow(capacity, 3)
    for _ in range(capacity):
        w.push(d + rng.normal(0.0, 0.2, 3))
    # 0.2 / sqrt(capacity) standard error; tolerances are above 3.5 sigma
    assert np.max(np.abs(w.bias() - d)) <= tol
