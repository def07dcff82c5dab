import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exttraj.core import CardinalityPmf, TrajectoryComponent, TrajectoryMixture, check_end_times
from exttraj.reduction import estimate_tcphd, estimate_tphd, prune_and_merge
from conftest import make_state


def comp(w, start=1, **kw):
    return TrajectoryComponent.from_state(w, start, make_state(**kw))


def test_merge_conserves_mass_and_moments():
    a, b = comp(0.6, px=0.0), comp(0.3, px=1.0)
    out = prune_and_merge(TrajectoryMixture([a, b]), Tp=0.0)
    assert len(out) == 1
    c = out[0]
    assert c.weight == pytest.approx(0.9, abs=1e-12)
    assert c.last.mean[0] == pytest.approx((0.6 * 0 + 0.3 * 1) / 0.9)
    # spread of the means enters the merged covariance
    Pa = a.last.cov[0, 0]
    assert c.last.cov[0, 0] == pytest.approx(Pa + (2 / 3) * (1 / 3) * 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-3, 1.0), st.floats(-30, 30), st.floats(-30, 30)),
                min_size=1, max_size=12))
def test_mass_conserved_and_idempotent(spec):
    mix = TrajectoryMixture([comp(w, px=x, py=y) for w, x, y in spec])
    out = prune_and_merge(mix, Tp=0.0, Jmax=1000)
    assert out.total_mass == pytest.approx(mix.total_mass, abs=1e-12)
    again = prune_and_merge(out, Tp=0.0, Jmax=1000)
    # merged components lie outside each other's gates unless the covariances grew
    assert len(again) <= len(out)
    assert again.total_mass == pytest.approx(mix.total_mass, abs=1e-12)


def test_prune_then_cap():
    mix = TrajectoryMixture([comp(w, px=100.0 * i) for i, w in enumerate([1e-6, 0.5, 0.2, 0.9])])
    out = prune_and_merge(mix, Tp=1e-5, Jmax=2)
    assert sorted(out.weights) == [0.5, 0.9]
    assert len(prune_and_merge(TrajectoryMixture([comp(1e-9)]))) == 0


def test_orientation_wraps_when_merging():
    a = comp(0.5, theta=np.pi - 0.01)
    b = comp(0.5, theta=-np.pi + 0.01)
    out = prune_and_merge(TrajectoryMixture([a, b]), Tp=0.0)
    assert len(out) == 1
    assert abs(abs(out[0].last.mean[4]) - np.pi) < 0.02


def test_merged_history_is_seed():
    # merging keeps the heaviest component's start time and past states
    x = make_state(px=5.0)
    old = TrajectoryComponent.from_state(0.7, 1, x)
    from exttraj.core import append_state
    a = append_state(old, make_state(px=6.0))
    b = comp(0.2, start=2, px=6.2)
    out = prune_and_merge(TrajectoryMixture([b, a]), Tp=0.0)
    assert len(out) == 1 and out[0].start_time == 1 and out[0].length == 2
    check_end_times(out, 2)


def test_bad_thresholds():
    with pytest.raises(ValueError):
        prune_and_merge(TrajectoryMixture(()), Tmr=0)


def test_estimate_counts():
    mix = TrajectoryMixture([comp(w, px=100.0 * i) for i, w in enumerate([0.9, 0.3, 0.2, 0.8])])
    # mass 2.2 -> 2 estimates, the two heaviest
    est = estimate_tphd(mix)
    assert [c.weight for c in est] == [0.9, 0.8]
    half = TrajectoryMixture([comp(0.75), comp(0.75, px=100.0)])
    assert len(estimate_tphd(half)) == 2  # 1.5 rounds up
    assert estimate_tphd(TrajectoryMixture(())) == []
    pmf = CardinalityPmf(np.array([0.1, 0.2, 0.2, 0.5]))
    assert len(estimate_tcphd(mix, pmf)) == 3
    tie = CardinalityPmf(np.array([0.0, 0.5, 0.5, 0.0]))
    assert len(estimate_tcphd(mix, tie)) == 1
    assert len(estimate_tcphd(TrajectoryMixture([comp(0.4)]), CardinalityPmf.delta(3, 5))) == 1


def test_estimate_tie_order_stable():
    mix = TrajectoryMixture([comp(0.5, px=1.0), comp(0.5, px=2.0)])
    est = estimate_tcphd(mix, CardinalityPmf.delta(1, 3))
    assert est[0].last.mean[0] == 1.0
