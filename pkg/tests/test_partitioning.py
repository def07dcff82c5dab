import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exttraj.core import Partition
from exttraj.models import build_model
from exttraj.partitioning import (all_partitions, default_thresholds, distance_partitions,
                                  pool_singletons, with_pooled_singletons)

BELL = [1, 1, 2, 5, 15, 52, 203, 877]


def test_two_points():
    z = np.array([[0.0, 0.0], [0.1, 0.0]])
    assert distance_partitions(z, [0.05, 1.0]) == [Partition(((0,), (1,))), Partition(((0, 1),))]


def test_threshold_below_all_gaps():
    z = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 7.0]])
    assert distance_partitions(z, [1.0]) == [Partition(((0,), (1,), (2,)))]


def test_equally_spaced_line():
    z = np.column_stack([np.arange(4.0), np.zeros(4)])
    parts = distance_partitions(z, [0.5, 1.5, 2.5, 3.5])
    assert len(parts) <= 4
    assert parts[-1] == Partition(((0, 1, 2, 3),))


def test_strict_linking():
    z = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert distance_partitions(z, [1.0]) == [Partition(((0,), (1,)))]


def test_empty():
    assert distance_partitions(np.zeros((0, 2)), [1.0]) == [Partition(())]
    assert all_partitions(np.zeros((0, 2))) == [Partition(())]


def test_bad_thresholds():
    with pytest.raises(ValueError):
        distance_partitions(np.zeros((2, 2)), [2.0, 1.0])
    with pytest.raises(ValueError):
        distance_partitions(np.zeros((2, 2)), [])


@pytest.mark.parametrize("n", range(1, 8))
def test_bell_numbers(n):
    parts = all_partitions(np.random.default_rng(n).normal(size=(n, 2)))
    assert len(parts) == BELL[n]
    assert len(set(parts)) == BELL[n]
    for p in parts:
        p.validate(n)


def test_all_partitions_guard():
    with pytest.raises(ValueError):
        all_partitions(np.zeros((11, 2)))


def _connected_brute(z, d):
    # union-find oracle
    n = len(z)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(z[i] - z[j])) < d:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return Partition(tuple(tuple(g) for g in groups.values()))


points = st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(points, st.lists(st.floats(0.1, 30), min_size=1, max_size=4, unique=True), st.randoms())
def test_properties(pts, th, rnd):
    z = np.array(pts)
    th = sorted(th)
    parts = distance_partitions(z, th)
    for p in parts:
        p.validate(len(z))
    assert len(set(parts)) == len(parts)
    expected = []
    for d in th:
        q = _connected_brute(z, d)
        if q not in expected:
            expected.append(q)
    assert parts == expected
    assert set(parts) <= set(all_partitions(z))
    perm = list(range(len(z)))
    rnd.shuffle(perm)
    inv = np.argsort(perm)
    back = {Partition(tuple(tuple(int(inv[i]) for i in c) for c in p.cells))
            for p in distance_partitions(z[inv], th)}
    assert back == set(parts)


def test_pool_singletons():
    p = Partition(((0, 1), (2,), (3,), (4,)))
    assert pool_singletons(p) == Partition(((0, 1), (2, 3, 4)))
    assert pool_singletons(Partition(((0, 1), (2,)))) == Partition(((0, 1), (2,)))
    out = with_pooled_singletons([p, Partition(((0, 1, 2, 3, 4),))])
    assert out[:2] == [p, Partition(((0, 1, 2, 3, 4),))]
    assert len(out) == 3


def test_default_thresholds_scale():
    from exttraj.core import TargetState
    b = TargetState.from_parts([0, 0, 0, 0], [0, 45, 35], np.eye(4), np.eye(3))
    th = default_thresholds(build_model(birth=((0.1, b),)))
    sigma = np.sqrt(100 + 0.25 * (45 ** 2 + 35 ** 2) / 2)
    np.testing.assert_allclose(th, sigma * np.arange(1, 5))
