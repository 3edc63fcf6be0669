"""
Several RB grants per round for the deficit-driven schedulers.

Each round freezes the deficit classification, picks P anchor pairs on
distinct users and RBs, fills those RBs concurrently and merges the results
in rank order. Fills only read the frozen snapshot, so the allocation does
not depend on the number of workers.
"""

from concurrent.futures import Executor, ThreadPoolExecutor
from contextlib import nullcontext
from math import ceil
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from utils.channel import ChannelTensor
from utils.grouping import GroupingProvider
from utils.schedulers import (
    Allocation,
    SchedulerConfig,
    commit_grant,
    dro_schedule,
    drs_schedule,
    fill_rb,
    priority_matrix,
    ranked_pairs,
)
from utils.sla import DeficitState, PFState, SlicingPlan, classify_slices

BaseScheduler = Union[str, Callable[..., Allocation]]


def parallel_degree(
    total_deficit: float, previous_rb_bits: Optional[float], remaining_rbs: int
) -> int:
    """
    Number of RBs to grant per round.

    ceil(total deficit / mean bits per RB in the previous TTI), clamped to
    [1, remaining RBs]; 1 when there is no previous TTI to go by.
    """
    upper = max(1, int(remaining_rbs))
    if not previous_rb_bits or previous_rb_bits <= 0 or total_deficit <= 0:
        return 1
    return int(min(upper, max(1, ceil(total_deficit / previous_rb_bits))))


def select_pairs(
    priority: np.ndarray, free: np.ndarray, users: np.ndarray, degree: int
) -> List[Tuple[int, int]]:
    """Top ``degree`` (user, RB) pairs with no user or RB used twice."""
    ranked_users, ranked_rbs = ranked_pairs(priority, free, users)
    pairs: List[Tuple[int, int]] = []
    seen_users, seen_rbs = set(), set()
    for k, b in zip(ranked_users.tolist(), ranked_rbs.tolist()):
        if k in seen_users or b in seen_rbs:
            continue
        pairs.append((k, b))
        seen_users.add(k)
        seen_rbs.add(b)
        if len(pairs) == degree:
            break
    return pairs


def _is_sharing(base: BaseScheduler) -> bool:
    if base in ("drs", drs_schedule):
        return True
    if base in ("dro", dro_schedule):
        return False
    raise ValueError(f"rb_parallel wraps 'dro' or 'drs', got {base!r}")


def rb_parallel(
    base: BaseScheduler,
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    grouping: GroupingProvider,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
    previous_rb_bits: Optional[float] = None,
    executor: Optional[Executor] = None,
) -> Allocation:
    """
    Run DRO or DRS with P RB fills per round.

    Args:
        base: 'dro' / 'drs' or the matching sequential scheduler
        previous_rb_bits: Mean bits per granted RB in the previous TTI
        executor: Pool to run fills on; one is created when ``config.workers`` > 1

    Returns:
        Allocation: identical for any worker count at a fixed degree
    """
    sharing = _is_sharing(base)
    config = config or SchedulerConfig()
    state = deficits.copy()
    alloc = Allocation(t)
    if not state.any_active():
        return alloc

    priority = priority_matrix(channel, t, plan, pf)
    free = np.ones(channel.num_rbs, dtype=bool)
    degree = config.parallel_degree or parallel_degree(
        state.total(), previous_rb_bits, channel.num_rbs
    )
    owner = plan.slice_of

    if executor is None and config.workers > 1:
        pool_ctx = ThreadPoolExecutor(max_workers=config.workers)
    else:
        pool_ctx = nullcontext(executor)

    with pool_ctx as pool:
        while state.any_active() and free.any():
            groups = classify_slices(state)
            pairs = select_pairs(
                priority, free, plan.users_of(groups.large), min(degree, int(free.sum()))
            )
            if not pairs:
                break
            for _, b in pairs:
                grouping.get(channel, b, t)

            def fill(pair):
                k, b = pair
                return fill_rb(
                    channel, t, plan, grouping, priority, config, groups, k, b, sharing
                )

            if pool is None or len(pairs) == 1:
                results = [fill(p) for p in pairs]
            else:
                results = list(pool.map(fill, pairs))

            for (_, b), (users, bits) in zip(pairs, results):
                if not any(state.deficits[owner[k]] > 0 for k in users):
                    continue
                alloc.grants.append(commit_grant(state, plan, b, users, bits))
                free[b] = False
    return alloc
