"""
Exact minimum-RB allocation for one TTI by branch and bound.

    minimize    sum_{b,s} x[b,s]
    subject to  sum_s x[b,s] <= 1                 for every RB b
                sum_b r[b,s] * x[b,s] >= d[s]     for every slice s
                x binary

Bounds come from the LP relaxation (HiGHS through scipy); the objective is
integral, so a node is pruned when ceil(LP) cannot beat the incumbent. The
Greedy Plus allocation seeds the incumbent.
"""

from dataclasses import dataclass
from math import ceil
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from utils.channel import ChannelTensor
from utils.schedulers import (
    Allocation,
    InfeasibleInstanceError,
    RateEstimateTable,
    SchedulerConfig,
    SchedulingInfeasibleError,
    SearchLimitError,
    allocation_from_table,
    build_rate_table,
    gp_allocate,
)
from utils.sla import DeficitState, PFState, SlicingPlan

INTEGRAL_TOL = 1e-6


class BnBSizeError(SchedulingInfeasibleError):
    """Instance larger than the exact solver is allowed to attempt."""


@dataclass(frozen=True)
class BnBResult:
    assignment: Tuple[Tuple[int, int], ...]
    num_rbs: int
    nodes: int


def _covers(rates: np.ndarray, deficits: np.ndarray, assignment) -> bool:
    got = np.zeros_like(deficits)
    for b, s in assignment:
        got[s] += rates[b, s]
    return bool(np.all(got >= deficits - 1e-7 * np.maximum(1.0, deficits)))


class _Relaxation:
    """LP relaxation over the slices that still need bits."""

    def __init__(self, rates: np.ndarray, deficits: np.ndarray):
        self.slices = np.flatnonzero(deficits > 0)
        self.num_rbs = rates.shape[0]
        n_s = len(self.slices)
        nvar = self.num_rbs * n_s
        # variable j = i * B + b for slice self.slices[i]
        a_rb = np.zeros((self.num_rbs, nvar))
        a_sla = np.zeros((n_s, nvar))
        for i, s in enumerate(self.slices):
            cols = i * self.num_rbs + np.arange(self.num_rbs)
            a_rb[np.arange(self.num_rbs), cols] = 1.0
            a_sla[i, cols] = -rates[:, s]
        self.a_ub = np.vstack([a_rb, a_sla])
        self.b_ub = np.concatenate([np.ones(self.num_rbs), -deficits[self.slices]])
        self.cost = np.ones(nvar)

    def solve(self, lower: np.ndarray, upper: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
        res = linprog(
            self.cost,
            A_ub=self.a_ub,
            b_ub=self.b_ub,
            bounds=list(zip(lower, upper)),
            method="highs",
        )
        if res.status != 0:
            return None
        return float(res.fun), res.x

    def decode(self, x: np.ndarray) -> List[Tuple[int, int]]:
        out = []
        for j in np.flatnonzero(np.round(x) == 1):
            i, b = divmod(int(j), self.num_rbs)
            out.append((b, int(self.slices[i])))
        return sorted(out)


def solve_min_rbs(
    rates: np.ndarray,
    deficits: Sequence[float],
    node_limit: int = 20_000,
) -> BnBResult:
    """
    Minimum number of RBs meeting every deficit.

    Raises:
        InfeasibleInstanceError: If no assignment meets every deficit
        SearchLimitError: If ``node_limit`` nodes are explored without a proof
    """
    rates = np.asarray(rates, dtype=float)
    d = np.asarray(deficits, dtype=float)
    if not np.any(d > 0):
        return BnBResult((), 0, 0)

    short = [int(s) for s in np.flatnonzero(d > 0) if rates[:, s].sum() < d[s]]
    if short:
        raise InfeasibleInstanceError(
            f"Slices {short} cannot meet their deficit even with every RB"
        )

    best: Optional[List[Tuple[int, int]]] = None
    seed = gp_allocate(rates, d)
    if _covers(rates, d, seed):
        best = sorted(seed)
    best_count = len(best) if best is not None else np.inf

    lp = _Relaxation(rates, d)
    nvar = len(lp.cost)
    stack = [(np.zeros(nvar), np.ones(nvar))]
    nodes = 0
    while stack:
        lower, upper = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise SearchLimitError(
                f"Branch and bound explored {node_limit} nodes without proving "
                f"optimality (incumbent {best_count} RBs); raise bnb_node_limit"
            )
        solved = lp.solve(lower, upper)
        if solved is None:
            continue
        value, x = solved
        if ceil(value - INTEGRAL_TOL) >= best_count:
            continue
        frac = np.abs(x - np.round(x))
        if frac.max() <= INTEGRAL_TOL:
            assignment = lp.decode(x)
            if _covers(rates, d, assignment):
                best, best_count = assignment, len(assignment)
                continue
        score = np.where(lower < upper, np.minimum(x, 1.0 - x), -1.0)
        j = int(np.argmax(score))
        if score[j] <= INTEGRAL_TOL:
            continue
        down_lo, down_hi = lower.copy(), upper.copy()
        down_hi[j] = 0.0
        up_lo, up_hi = lower.copy(), upper.copy()
        up_lo[j] = 1.0
        # depth-first, rounding up first
        stack.append((down_lo, down_hi))
        stack.append((up_lo, up_hi))

    if best is None:
        raise InfeasibleInstanceError("No assignment of the available RBs meets every deficit")
    return BnBResult(tuple(best), len(best), nodes)


def bnb_optimal(
    table: RateEstimateTable,
    deficits: DeficitState,
    config: Optional[SchedulerConfig] = None,
) -> BnBResult:
    """
    Proof-optimal RB count for the deficits of one TTI.

    Raises:
        BnBSizeError: If the table exceeds the configured size guard
        InfeasibleInstanceError: If the deficits cannot all be met
        SearchLimitError: If the node limit is hit
    """
    config = config or SchedulerConfig()
    if table.num_rbs > config.bnb_max_rbs or table.num_slices > config.bnb_max_slices:
        raise BnBSizeError(
            f"Exact search limited to {config.bnb_max_rbs} RBs and "
            f"{config.bnb_max_slices} slices, got {table.num_rbs} RBs and "
            f"{table.num_slices} slices; raise bnb_max_rbs / bnb_max_slices"
        )
    return solve_min_rbs(table.rates, deficits.deficits, config.bnb_node_limit)


def bnb_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    """Allocation realizing the optimal RB count for this TTI."""
    config = config or SchedulerConfig()
    if not deficits.any_active():
        return Allocation(t)
    table = build_rate_table(channel, t, plan, config, pf, deficits)
    result = bnb_optimal(table, deficits, config)
    return allocation_from_table(t, table, result.assignment, plan, deficits)
