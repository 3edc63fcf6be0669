"""
Test sla module functionality
Deficit bookkeeping, slice classification, PF metric and fairness
"""

import itertools

import numpy as np
import pytest

from utils.sla import (
    DeficitState,
    PFState,
    PlanError,
    Policy,
    SliceConfig,
    SlicingPlan,
    UndefinedFairnessError,
    UnknownSliceError,
    build_plan,
    classify_slices,
    consume,
    jains_index,
    pf_metric,
    refresh_deficits,
    slice_bits_of,
)


def state_for(targets):
    return DeficitState.initial(build_plan([[i] for i in range(len(targets))], targets, len(targets)))


def test_refresh_single_tti():
    state = state_for([10.0])
    assert refresh_deficits(state, [[4.0]]).deficits[0] == pytest.approx(6.0)
    assert refresh_deficits(state, [[15.0]]).deficits[0] == 0.0


def test_refresh_running_target():
    state = state_for([10.0])
    refreshed = refresh_deficits(state, np.array([[10.0], [5.0], [10.0]]))
    assert refreshed.tti == 3
    assert refreshed.deficits[0] == pytest.approx(5.0)
    assert refreshed.delivered[0] == pytest.approx(25.0)


def test_refresh_zero_iff_target_met():
    state = state_for([10.0, 10.0])
    refreshed = refresh_deficits(state, np.array([[10.0, 9.0], [10.0, 11.0], [10.0, 9.999]]))
    assert refreshed.deficits[0] == 0.0
    assert refreshed.deficits[1] > 0.0


def test_refresh_needs_history():
    with pytest.raises(ValueError):
        refresh_deficits(state_for([1.0]), np.zeros((0, 1)))


def test_consume_decrements_and_clamps():
    state = DeficitState.from_deficits([6.0])
    consume(state, 0, 4.0)
    assert state.deficits[0] == pytest.approx(2.0)
    consume(state, 0, 5.0)
    assert state.deficits[0] == 0.0
    assert state.delivered[0] == pytest.approx(9.0)
    consume(state, 0, 0.0)
    assert state.deficits[0] == 0.0


def test_consume_errors():
    state = DeficitState.from_deficits([6.0])
    with pytest.raises(UnknownSliceError):
        consume(state, 3, 1.0)
    with pytest.raises(ValueError):
        consume(state, 0, -1.0)


def test_consume_is_order_independent():
    bits = [1.5, 2.0, 0.25, 3.0]
    results = set()
    for order in itertools.permutations(bits):
        state = DeficitState.from_deficits([10.0])
        for r in order:
            consume(state, 0, r)
        results.add(round(float(state.deficits[0]), 12))
    assert results == {3.25}

    for order in itertools.permutations(bits):
        state = DeficitState.from_deficits([5.0])
        for r in order:
            consume(state, 0, r)
        assert state.deficits[0] == 0.0


def test_classify_around_mean():
    groups = classify_slices(DeficitState.from_deficits([4.0, 2.0, 0.0]))
    assert groups.average == pytest.approx(3.0)
    assert groups.large == (0,)
    assert groups.small == (1,)
    assert groups.active == (0, 1)


def test_classify_boundary_and_single_slice():
    assert classify_slices(DeficitState.from_deficits([5.0, 5.0])).large == (0, 1)
    assert classify_slices(DeficitState.from_deficits([0.1 + 0.2, 0.3])).small == ()
    single = classify_slices(DeficitState.from_deficits([0.0, 7.0]))
    assert single.large == (1,) and single.small == ()


def test_classify_empty_and_scale_invariant():
    assert classify_slices(DeficitState.from_deficits([0.0, 0.0])).is_empty
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = rng.uniform(0, 10, size=5) * (rng.random(5) < 0.7)
        a = classify_slices(DeficitState.from_deficits(d))
        b = classify_slices(DeficitState.from_deficits(d * 37.5))
        assert (a.large, a.small) == (b.large, b.small)


def test_plan_rejects_overlap_and_negative_sla():
    with pytest.raises(PlanError):
        build_plan([[0, 1], [1, 2]], [1.0, 1.0], 3)
    with pytest.raises(PlanError):
        SliceConfig(1, (0,), -1.0)
    with pytest.raises(PlanError):
        build_plan([[0, 5]], [1.0], 3)


def test_plan_lookup():
    plan = build_plan([[0, 2], [1]], [5.0, 7.0], 4, slice_ids=[10, 20])
    assert plan.slice_of.tolist() == [0, 1, 0, -1]
    assert plan.index_of(20) == 1
    assert plan.users_of([0]).tolist() == [0, 2]
    with pytest.raises(UnknownSliceError):
        plan.index_of(30)
    assert slice_bits_of({0: 1.0, 1: 2.0, 2: 3.0, 3: 9.0}, plan) == {0: 4.0, 1: 2.0}


def pf_plan(num_users=2):
    return SlicingPlan((SliceConfig(1, tuple(range(num_users)), 1.0, Policy.PROPORTIONAL_FAIR),), num_users)


def test_pf_equal_history_and_gains_give_equal_metrics():
    pf = PFState(pf_plan(3), accumulated=[5.0, 5.0, 5.0])
    pf.set_gains(np.full((2, 3), 4.0), t=0)
    values = [pf_metric(pf, k, 1, 0) for k in range(3)]
    assert values == pytest.approx([1.0, 1.0, 1.0])


def test_pf_metric_reciprocal_in_rate():
    pf = PFState(pf_plan(2), accumulated=[2.0, 1.0])
    pf.set_gains(np.ones((1, 2)), t=4)
    assert pf_metric(pf, 1, 0, 4) / pf_metric(pf, 0, 0, 4) == pytest.approx(2.0)


def test_pf_single_user_slice():
    pf = PFState(pf_plan(1), accumulated=[3.0])
    pf.set_gains(np.array([[0.7]]), t=0)
    assert pf_metric(pf, 0, 0, 0) == pytest.approx(1.0)


def test_pf_warm_start_and_wrong_tti():
    pf = PFState(pf_plan(2))
    assert pf.normalized_rates().tolist() == [1.0, 1.0]
    pf.update([1.0, 0.0])
    assert pf.normalized_rates()[1] == pytest.approx(1e-6)
    pf.set_gains(np.ones((1, 2)), t=1)
    with pytest.raises(ValueError):
        pf_metric(pf, 0, 0, 2)


def test_pf_ranking_ignores_slice_gain_scale():
    pf = PFState(pf_plan(3), accumulated=[1.0, 2.0, 3.0])
    gains = np.array([[1.0, 3.0, 2.0]])
    a = np.argsort(pf.metrics(gains)[0])
    b = np.argsort(pf.metrics(gains * 50.0)[0])
    assert a.tolist() == b.tolist()


def test_jains_index_values():
    assert jains_index([3, 3, 3]) == pytest.approx(1.0)
    assert jains_index([1, 0]) == pytest.approx(0.5)
    assert jains_index([1, 2, 3]) == pytest.approx(36 / 42)
    with pytest.raises(UndefinedFairnessError):
        jains_index([0, 0])
