import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exttraj.core import (CardinalityPmf, InvalidShapeError, NumericalFailure, Partition,
                          TargetState, TrajectoryComponent, TrajectoryMixture, append_state,
                          check_end_times, extent_matrix, replace_current, wrap_angle)
from conftest import make_state


def test_extent_matrix_axis_aligned():
    np.testing.assert_allclose(extent_matrix((0.0, 3.0, 2.0)), np.diag([9.0, 4.0]))


def test_extent_matrix_rotation_swaps_axes():
    np.testing.assert_allclose(extent_matrix((math.pi / 2, 3.0, 2.0)), np.diag([4.0, 9.0]),
                               atol=1e-12)


@pytest.mark.parametrize("shape", [(0, 0, 1), (0, 1, -1), (np.nan, 1, 1)])
def test_extent_matrix_rejects_bad_shapes(shape):
    with pytest.raises(InvalidShapeError):
        extent_matrix(shape)


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_state_validate_cross_covariance():
    x = make_state()
    x.validate()
    cov = x.cov.copy()
    cov[0, 5] = cov[5, 0] = 1.0
    with pytest.raises(ValueError):
        TargetState(x.mean, cov).validate()


def test_state_accessors():
    x = make_state(px=1, py=2, theta=0.1, l1=5, l2=4)
    assert x.r.px == 1 and x.r.py == 2
    assert x.s.l1 == 5 and x.s.theta == pytest.approx(0.1)
    assert x.cov_r.shape == (4, 4) and x.cov_s.shape == (3, 3)


def test_trajectory_history_is_shared_and_ordered():
    x = make_state()
    c = TrajectoryComponent.from_state(0.5, 3, x)
    y = make_state(px=10)
    c2 = append_state(c, y)
    assert c2.length == 2 and c2.end_time == 4
    np.testing.assert_array_equal(c2.means[:, 0], [0.0, 10.0])
    assert c2.last.prev is c.last
    c3 = replace_current(c2, make_state(px=11), weight=0.2)
    np.testing.assert_array_equal(c3.means[:, 0], [0.0, 11.0])
    assert c3.weight == 0.2 and c2.weight == 0.5


def test_from_arrays_round_trip():
    means = np.arange(21, dtype=float).reshape(3, 7)
    covs = np.stack([np.eye(7)] * 3)
    c = TrajectoryComponent.from_arrays(1.0, 2, means, covs)
    np.testing.assert_array_equal(c.means, means)
    assert c.end_time == 4


def test_check_end_times():
    c = TrajectoryComponent.from_state(1.0, 2, make_state())
    check_end_times(TrajectoryMixture([c]), 2)
    with pytest.raises(AssertionError):
        check_end_times([c], 3)


def test_pmf_requires_normalisation():
    with pytest.raises(ValueError):
        CardinalityPmf(np.array([0.5, 0.6]))
    with pytest.raises(NumericalFailure):
        CardinalityPmf.from_unnormalized([0.0, 0.0])


def test_pmf_argmax_ties_to_smaller():
    assert CardinalityPmf(np.array([0.4, 0.4, 0.2])).argmax() == 0


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20).filter(lambda v: sum(v) > 1e-6))
def test_pmf_from_unnormalized_sums_to_one(v):
    p = CardinalityPmf.from_unnormalized(v)
    assert abs(p.probs.sum() - 1) < 1e-9


def test_partition_canonical_and_validated():
    p = Partition(((3, 1), (0, 2)))
    assert p.cells == ((0, 2), (1, 3))
    assert p == Partition(((1, 3), (2, 0)))
    p.validate(4)
    with pytest.raises(ValueError):
        p.validate(5)
    with pytest.raises(ValueError):
        Partition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        Partition(((0,), ()))
