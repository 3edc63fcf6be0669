"""
Test bnb module functionality
Exact minimum-RB search against enumeration and the heuristics
"""

from itertools import product

import numpy as np
import pytest

from utils.bnb import BnBSizeError, bnb_optimal, bnb_schedule, solve_min_rbs
from utils.channel import ClusterSpec, generate_synthetic
from utils.schedulers import (
    InfeasibleInstanceError,
    RateEstimateTable,
    SchedulerConfig,
    SearchLimitError,
    build_rate_table,
    gp_allocate,
    greedy_allocate,
)
from utils.sla import DeficitState, build_plan


def enumerate_min_rbs(rates, deficits):
    """Try every RB -> (unused | slice) map."""
    num_rbs, num_slices = rates.shape
    best = None
    for choice in product(range(-1, num_slices), repeat=num_rbs):
        got = np.zeros(num_slices)
        for b, s in enumerate(choice):
            if s >= 0:
                got[s] += rates[b, s]
        if np.all(got >= deficits - 1e-9):
            used = sum(1 for s in choice if s >= 0)
            best = used if best is None else min(best, used)
    return best


def meets(rates, deficits, sequence):
    got = np.zeros(len(deficits))
    for b, s in sequence:
        got[s] += rates[b, s]
    return bool(np.all(got >= np.asarray(deficits) - 1e-9))


def test_zero_deficits_need_no_rbs():
    result = solve_min_rbs(np.ones((3, 2)), [0.0, 0.0])
    assert result.num_rbs == 0
    assert result.assignment == ()


def test_single_rb_single_slice():
    result = solve_min_rbs(np.array([[5.0]]), [4.0])
    assert result.num_rbs == 1
    assert result.assignment == ((0, 0),)


def test_matches_enumeration_on_random_tables():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(40):
        rates = rng.uniform(0.5, 10.0, size=(5, 3))
        deficits = rng.uniform(0.0, 12.0, size=3)
        oracle = enumerate_min_rbs(rates, deficits)
        if oracle is None:
            with pytest.raises(InfeasibleInstanceError):
                solve_min_rbs(rates, deficits)
            continue
        result = solve_min_rbs(rates, deficits)
        assert result.num_rbs == oracle
        assert meets(rates, deficits, result.assignment)
        assert len({b for b, _ in result.assignment}) == result.num_rbs
        checked += 1
    assert checked > 10


def test_never_worse_than_successful_heuristics():
    rng = np.random.default_rng(1)
    for _ in range(30):
        rates = rng.uniform(0.5, 10.0, size=(6, 3))
        deficits = rng.uniform(0.0, 10.0, size=3)
        try:
            optimum = solve_min_rbs(rates, deficits).num_rbs
        except InfeasibleInstanceError:
            continue
        for heuristic in (greedy_allocate, gp_allocate):
            sequence = heuristic(rates, deficits)
            if meets(rates, deficits, sequence):
                assert optimum <= len(sequence)


def test_infeasible_instance():
    with pytest.raises(InfeasibleInstanceError):
        solve_min_rbs(np.array([[1.0, 1.0], [1.0, 1.0]]), [1.5, 1.5])
    with pytest.raises(InfeasibleInstanceError):
        solve_min_rbs(np.array([[1.0], [1.0]]), [3.0])


def test_node_limit():
    rng = np.random.default_rng(2)
    rates = rng.uniform(0.5, 10.0, size=(8, 3))
    with pytest.raises(SearchLimitError):
        solve_min_rbs(rates, rates.sum(axis=0) * 0.3, node_limit=0)


def test_size_guard():
    table = RateEstimateTable.from_rates(np.ones((13, 2)))
    with pytest.raises(BnBSizeError):
        bnb_optimal(table, DeficitState.from_deficits([1.0, 1.0]))
    relaxed = SchedulerConfig(bnb_max_rbs=13)
    assert bnb_optimal(table, DeficitState.from_deficits([1.0, 1.0]), relaxed).num_rbs == 2


def test_schedule_realizes_the_optimum():
    ch = generate_synthetic(ClusterSpec(num_users=4, users_per_cluster=(2, 2), seed=5), 4, 4, 1)
    plan = build_plan([[0, 1], [2, 3]], [0.0, 0.0], 4)
    config = SchedulerConfig(k_max=2)
    state = DeficitState.from_deficits([2000.0, 1000.0])
    alloc = bnb_schedule(ch, 0, plan, state, config)
    assert alloc.is_orthogonal()
    assert alloc.grants[-1].remaining == (0.0, 0.0)
    assert alloc.num_rbs <= 4


def test_tiny_channel_instances():
    """Exact count equals enumeration; Greedy Plus stays within one RB of it."""
    rng = np.random.default_rng(11)
    config = SchedulerConfig(k_max=2)
    plan = build_plan([[0, 1], [2, 3], [4, 5]], [0.0, 0.0, 0.0], 6)
    feasible = close = 0
    for seed in range(100):
        spec = ClusterSpec(num_users=6, users_per_cluster=(2, 2, 2), intra_cluster_corr=0.5,
                           inter_cluster_corr=0.1, seed=seed)
        table = build_rate_table(generate_synthetic(spec, 4, 6, 1), 0, plan, config)
        deficits = table.rates.sum(axis=0) * rng.uniform(0.05, 0.3, size=3)
        optimum = enumerate_min_rbs(table.rates, deficits)
        if optimum is None:
            continue
        result = bnb_optimal(table, DeficitState.from_deficits(deficits), config)
        assert result.num_rbs == optimum
        sequence = gp_allocate(table.rates, deficits)
        if meets(table.rates, deficits, sequence) and len(sequence) <= optimum + 1:
            close += 1
        feasible += 1
        if feasible == 50:
            break
    assert feasible == 50
    assert close >= 45
