"""
Inter-slice RB schedulers.

Greedy and Greedy Plus work from a per-(RB, slice) table of the best
achievable slice rate. DRO and DRS pick a (user, RB) pair from the slices
with the largest deficits and fill the RB from that user's low-correlation
group; DRO keeps the RB inside one slice, DRS lets other slices share it.
RS_ES replaces the group fill with an exhaustive search.

Every tie is broken by ascending user index, then RB index, then slice index.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.channel import ChannelTensor
from utils.grouping import GroupingProvider, UserGrouping
from utils.rate import (
    DEFAULT_REG_EPS,
    LinkBudget,
    achieved_rates,
    rates_by_user,
    rates_from_sinr,
    sinr_batch,
)
from utils.sla import (
    DeficitState,
    DeltaGroups,
    PFState,
    Policy,
    SliceConfig,
    SlicingPlan,
    classify_slices,
    consume,
    slice_bits_of,
)

CHUNK = 2048


class SchedulingInfeasibleError(RuntimeError):
    """A scheduler cannot run at this instance size or cannot meet the deficits."""


class CombinationCapError(SchedulingInfeasibleError):
    """Exhaustive subset search would exceed the configured cap."""


class InfeasibleInstanceError(SchedulingInfeasibleError):
    """No assignment of the available RBs meets every deficit."""


class SearchLimitError(SchedulingInfeasibleError):
    """Exact search stopped at its node limit before proving optimality."""


@dataclass
class SchedulerConfig:
    k_max: int = 8
    budget: LinkBudget = field(default_factory=LinkBudget)
    reg_eps: float = DEFAULT_REG_EPS
    combination_cap: int = 100_000
    bnb_max_rbs: int = 12
    bnb_max_slices: int = 4
    bnb_node_limit: int = 20_000
    parallel_degree: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.parallel_degree is not None and self.parallel_degree < 1:
            raise ValueError(f"parallel_degree must be >= 1, got {self.parallel_degree}")

    def seats(self, channel: ChannelTensor) -> int:
        if self.k_max > channel.num_antennas:
            raise ValueError(
                f"k_max={self.k_max} exceeds the {channel.num_antennas} antennas"
            )
        return self.k_max


@dataclass(frozen=True)
class RBGrant:
    """
    One RB handed out in a TTI.

    ``slice_bits`` pairs slice index and bits delivered to it; ``remaining``
    is every slice's deficit right after this grant was applied.
    """

    rb: int
    users: Tuple[int, ...]
    user_bits: Tuple[float, ...]
    slice_bits: Tuple[Tuple[int, float], ...]
    remaining: Tuple[float, ...] = ()

    @property
    def slices(self) -> Tuple[int, ...]:
        return tuple(s for s, _ in self.slice_bits)

    @property
    def total_bits(self) -> float:
        return float(sum(self.user_bits))


@dataclass
class Allocation:
    tti: int
    grants: List[RBGrant] = field(default_factory=list)

    @property
    def num_rbs(self) -> int:
        return len(self.grants)

    @property
    def rbs(self) -> List[int]:
        return [g.rb for g in self.grants]

    def delivered_by_slice(self, num_slices: int) -> np.ndarray:
        out = np.zeros(num_slices)
        for grant in self.grants:
            for s, bits in grant.slice_bits:
                out[s] += bits
        return out

    def user_bits(self, num_users: int) -> np.ndarray:
        out = np.zeros(num_users)
        for grant in self.grants:
            for k, bits in zip(grant.users, grant.user_bits):
                out[k] += bits
        return out

    def user_decisions(self, num_users: int, num_rbs: int) -> np.ndarray:
        """x[k, b] = 1 when user k is scheduled on RB b."""
        x = np.zeros((num_users, num_rbs), dtype=bool)
        for grant in self.grants:
            x[list(grant.users), grant.rb] = True
        return x

    def slice_decisions(self, num_slices: int, num_rbs: int) -> np.ndarray:
        """x[s, b] = 1 when slice s has a user on RB b."""
        x = np.zeros((num_slices, num_rbs), dtype=bool)
        for grant in self.grants:
            x[list(grant.slices), grant.rb] = True
        return x

    def is_orthogonal(self) -> bool:
        return all(len(g.slice_bits) <= 1 for g in self.grants)


def commit_grant(
    state: DeficitState,
    plan: SlicingPlan,
    rb: int,
    users: Sequence[int],
    user_bits: Sequence[float],
) -> RBGrant:
    """
    Consume the grant's bits from ``state`` and return the recorded grant.

    Users outside every slice may be served but credit no deficit.
    """
    per_slice = slice_bits_of(rates_by_user(users, user_bits), plan)
    for s in sorted(per_slice):
        consume(state, s, per_slice[s])
    return RBGrant(
        rb=int(rb),
        users=tuple(int(k) for k in users),
        user_bits=tuple(float(r) for r in user_bits),
        slice_bits=tuple((s, per_slice[s]) for s in sorted(per_slice)),
        remaining=tuple(float(d) for d in state.deficits),
    )


@lru_cache(maxsize=256)
def _subsets(n: int, size: int) -> np.ndarray:
    if size == 0:
        return np.zeros((1, 0), dtype=int)
    return np.array(list(combinations(range(n), size)), dtype=int).reshape(-1, size)


def _score_subsets(
    h: np.ndarray,
    candidates: np.ndarray,
    budget: LinkBudget,
    reg_eps: float,
    weights: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rates and scores of many equally-sized user sets on one RB.

    Args:
        h: M x N channel matrix of the RB
        candidates: (C, U) user indices
        weights: optional per-user score weights indexed by user

    Returns:
        (scores (C,), rates (C, U))
    """
    rates = np.empty(candidates.shape, dtype=float)
    for start in range(0, len(candidates), CHUNK):
        part = candidates[start:start + CHUNK]
        stack = np.moveaxis(h[:, part], 0, 1)  # (C, M, U)
        rates[start:start + CHUNK] = rates_from_sinr(
            sinr_batch(stack, budget, reg_eps), budget
        )
    if weights is None:
        return rates.sum(axis=1), rates
    return (rates * weights[candidates]).sum(axis=1), rates


@dataclass(frozen=True)
class SliceChoice:
    users: Tuple[int, ...]
    user_bits: Tuple[float, ...]

    @property
    def rate(self) -> float:
        return float(sum(self.user_bits))


def intra_slice_best(
    channel: ChannelTensor,
    b: int,
    t: int,
    slice_cfg: SliceConfig,
    k_max: int,
    budget: LinkBudget,
    reg_eps: float = DEFAULT_REG_EPS,
    cap: int = 100_000,
    pf: Optional[PFState] = None,
) -> SliceChoice:
    """
    Best subset of a slice's users on (b, t).

    MaxRate slices maximise the slice sum rate; PF slices maximise the sum of
    rate_k / R̂_k. Smaller and lexicographically earlier sets win ties.

    Raises:
        CombinationCapError: If the number of subsets exceeds ``cap``
    """
    users = np.array(sorted(slice_cfg.users), dtype=int)
    limit = min(k_max, len(users), channel.num_antennas)
    count = sum(comb(len(users), j) for j in range(1, limit + 1))
    if count > cap:
        raise CombinationCapError(
            f"Slice {slice_cfg.slice_id}: {count} subsets of {len(users)} users "
            f"(K={k_max}) exceed the cap of {cap}"
        )

    weights = None
    if slice_cfg.policy is Policy.PROPORTIONAL_FAIR:
        pf = pf or PFState(_single_slice_plan(slice_cfg, channel.num_users))
        weights = 1.0 / pf.normalized_rates()

    h = channel.matrix(b, t)
    best: Optional[SliceChoice] = None
    best_score = -np.inf
    for size in range(1, limit + 1):
        candidates = users[_subsets(len(users), size)]
        scores, rates = _score_subsets(h, candidates, budget, reg_eps, weights)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score = float(scores[j])
            best = SliceChoice(
                tuple(int(k) for k in candidates[j]), tuple(float(r) for r in rates[j])
            )
    return best


def _single_slice_plan(slice_cfg: SliceConfig, num_users: int) -> SlicingPlan:
    return SlicingPlan((slice_cfg,), num_users)


@dataclass(frozen=True)
class RateEstimateTable:
    """r_est[b][s] and the user set realizing it."""

    rates: np.ndarray
    choices: Tuple[Tuple[Optional[SliceChoice], ...], ...]

    @property
    def num_rbs(self) -> int:
        return self.rates.shape[0]

    @property
    def num_slices(self) -> int:
        return self.rates.shape[1]

    @classmethod
    def from_rates(cls, rates) -> "RateEstimateTable":
        """Table without realizing user sets (used by the allocators alone)."""
        r = np.asarray(rates, dtype=float)
        empty = tuple(tuple(None for _ in range(r.shape[1])) for _ in range(r.shape[0]))
        return cls(r, empty)


def build_rate_table(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    config: SchedulerConfig,
    pf: Optional[PFState] = None,
    deficits: Optional[DeficitState] = None,
) -> RateEstimateTable:
    """
    Query the intra-slice scheduler for every (RB, slice).

    Slices with zero deficit are skipped (rate 0) when ``deficits`` is given.
    """
    k_max = config.seats(channel)
    rates = np.zeros((channel.num_rbs, plan.num_slices))
    choices: List[List[Optional[SliceChoice]]] = []
    wanted = (
        range(plan.num_slices)
        if deficits is None
        else [s for s in range(plan.num_slices) if deficits.deficits[s] > 0]
    )
    for b in range(channel.num_rbs):
        row: List[Optional[SliceChoice]] = [None] * plan.num_slices
        for s in wanted:
            choice = intra_slice_best(
                channel, b, t, plan.slices[s], k_max, config.budget,
                config.reg_eps, config.combination_cap, pf,
            )
            row[s] = choice
            rates[b, s] = choice.rate
        choices.append(row)
    return RateEstimateTable(rates, tuple(tuple(r) for r in choices))


def greedy_allocate(rates: np.ndarray, deficits: Sequence[float]) -> List[Tuple[int, int]]:
    """
    Hand out the globally best remaining (RB, slice) pair until every deficit
    is met or RBs run out.

    Returns:
        List of (rb, slice) grants in order
    """
    rates = np.asarray(rates, dtype=float)
    d = np.array(deficits, dtype=float)
    free = np.ones(rates.shape[0], dtype=bool)
    sequence: List[Tuple[int, int]] = []
    while True:
        mask = free[:, None] & (d > 0)[None, :] & (rates > 0)
        if not mask.any():
            break
        flat = int(np.argmax(np.where(mask, rates, -np.inf)))
        b, s = divmod(flat, rates.shape[1])
        sequence.append((b, s))
        d[s] = max(0.0, d[s] - rates[b, s])
        free[b] = False
    return sequence


def gp_allocate(rates: np.ndarray, deficits: Sequence[float]) -> List[Tuple[int, int]]:
    """
    Greedy Plus: serve the slice with the largest deficit its best remaining RB.

    Returns:
        List of (rb, slice) grants in order
    """
    rates = np.asarray(rates, dtype=float)
    d = np.array(deficits, dtype=float)
    free = np.ones(rates.shape[0], dtype=bool)
    sequence: List[Tuple[int, int]] = []
    while True:
        usable = free[:, None] & (rates > 0)
        eligible = (d > 0) & usable.any(axis=0)
        if not eligible.any():
            break
        s = int(np.argmax(np.where(eligible, d, -np.inf)))
        b = int(np.argmax(np.where(usable[:, s], rates[:, s], -np.inf)))
        sequence.append((b, s))
        d[s] = max(0.0, d[s] - rates[b, s])
        free[b] = False
    return sequence


def allocation_from_table(
    t: int,
    table: RateEstimateTable,
    sequence: Sequence[Tuple[int, int]],
    plan: SlicingPlan,
    deficits: DeficitState,
) -> Allocation:
    state = deficits.copy()
    alloc = Allocation(t)
    for b, s in sequence:
        choice = table.choices[b][s]
        alloc.grants.append(
            commit_grant(state, plan, b, choice.users, choice.user_bits)
        )
    return alloc


def greedy_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    config = config or SchedulerConfig()
    if not deficits.any_active():
        return Allocation(t)
    table = build_rate_table(channel, t, plan, config, pf, deficits)
    sequence = greedy_allocate(table.rates, deficits.deficits)
    return allocation_from_table(t, table, sequence, plan, deficits)


def gp_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    config = config or SchedulerConfig()
    if not deficits.any_active():
        return Allocation(t)
    table = build_rate_table(channel, t, plan, config, pf, deficits)
    sequence = gp_allocate(table.rates, deficits.deficits)
    return allocation_from_table(t, table, sequence, plan, deficits)


# --- deficit-driven schedulers -------------------------------------------


def priority_matrix(
    channel: ChannelTensor, t: int, plan: SlicingPlan, pf: Optional[PFState] = None
) -> np.ndarray:
    """
    (B, N) user priorities for pair selection and group fills.

    Channel gain for MaxRate slices, gain / R̂ for PF slices.
    """
    gains = channel.gains(t)
    if not plan.uses_pf():
        return gains
    pf = pf or PFState(plan)
    prio = gains.copy()
    pf_users = plan.users_of(
        [i for i, s in enumerate(plan.slices) if s.policy is Policy.PROPORTIONAL_FAIR]
    )
    prio[:, pf_users] = pf.priorities(gains)[:, pf_users]
    return prio


def ranked_pairs(
    priority: np.ndarray, free: np.ndarray, users: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (user, RB) candidates sorted by descending priority, then user, then RB.

    Returns:
        (users, rbs) arrays in rank order
    """
    rbs = np.flatnonzero(free)
    if rbs.size == 0 or users.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    uu, bb = np.meshgrid(users, rbs, indexing="ij")
    vals = priority[bb, uu]
    order = np.lexsort((bb.ravel(), uu.ravel(), -vals.ravel()))
    return uu.ravel()[order], bb.ravel()[order]


def top_pair(
    priority: np.ndarray, free: np.ndarray, users: np.ndarray
) -> Optional[Tuple[int, int]]:
    """Best (user, RB) pair; ties go to the lower user, then the lower RB."""
    rbs = np.flatnonzero(free)
    if rbs.size == 0 or users.size == 0:
        return None
    sub = priority[np.ix_(rbs, users)].T  # (users, rbs)
    ui, bi = divmod(int(np.argmax(sub)), rbs.size)
    return int(users[ui]), int(rbs[bi])


def group_fill(
    k0: int,
    grouping: UserGrouping,
    priority_row: np.ndarray,
    primary: np.ndarray,
    seats: int,
    secondary: Optional[np.ndarray] = None,
) -> List[int]:
    """
    Fill an RB starting from ``k0``'s group.

    Users are taken from the current group by descending priority, primary
    pool first, then the secondary pool. When seats remain, jump to the group
    of the best primary user whose group has not been visited yet.

    Args:
        k0: Anchor user (assumed the best primary user on this RB)
        grouping: Low-correlation groups
        priority_row: (N,) priorities on the RB
        primary: (N,) bool mask of users eligible for the seats and jumps
        seats: Maximum users on the RB
        secondary: (N,) bool mask of users that may top up a visited group

    Returns:
        Selected users in selection order
    """
    group_of = grouping.group_of
    chosen = np.zeros(len(group_of), dtype=bool)
    selected: List[int] = []
    visited = set()
    g = int(group_of[k0])
    while len(selected) < seats:
        visited.add(g)
        members = np.asarray(grouping.members(g), dtype=int)
        for pool in (primary, secondary):
            if pool is None or len(selected) >= seats:
                continue
            cand = members[pool[members] & ~chosen[members]]
            if cand.size == 0:
                continue
            order = np.lexsort((cand, -priority_row[cand]))
            for k in cand[order][: seats - len(selected)]:
                selected.append(int(k))
                chosen[k] = True
        if len(selected) >= seats:
            break
        rest = primary & ~chosen & ~np.isin(group_of, list(visited))
        if not rest.any():
            break
        cand = np.flatnonzero(rest)
        g = int(group_of[cand[int(np.argmax(priority_row[cand]))]])
    return selected


def candidate_pools(
    plan: SlicingPlan, groups: DeltaGroups, k0: int, sharing: bool
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Primary and secondary user masks for a fill anchored at ``k0``."""
    owner = plan.slice_of
    if not sharing:
        return owner == owner[k0], None
    primary = np.isin(owner, groups.large)
    secondary = np.isin(owner, groups.small) if groups.small else None
    return primary, secondary


def fill_rb(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    grouping: GroupingProvider,
    priority: np.ndarray,
    config: SchedulerConfig,
    groups: DeltaGroups,
    k0: int,
    b0: int,
    sharing: bool,
) -> Tuple[List[int], np.ndarray]:
    """
    Choose and rate the users of one RB. Pure given its inputs.

    Returns:
        (sorted users, bits per user)
    """
    seats = config.seats(channel)
    primary, secondary = candidate_pools(plan, groups, k0, sharing)
    users = group_fill(
        k0, grouping.get(channel, b0, t), priority[b0], primary, seats, secondary
    )
    users = sorted(users)
    return users, achieved_rates(channel, b0, t, users, config.budget, config.reg_eps)


def deficit_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    grouping: GroupingProvider,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
    sharing: bool = False,
) -> Allocation:
    """Sequential DRO (``sharing=False``) or DRS (``sharing=True``)."""
    config = config or SchedulerConfig()
    state = deficits.copy()
    alloc = Allocation(t)
    if not state.any_active():
        return alloc
    priority = priority_matrix(channel, t, plan, pf)
    free = np.ones(channel.num_rbs, dtype=bool)
    while state.any_active() and free.any():
        groups = classify_slices(state)
        pick = top_pair(priority, free, plan.users_of(groups.large))
        if pick is None:
            break
        k0, b0 = pick
        users, bits = fill_rb(
            channel, t, plan, grouping, priority, config, groups, k0, b0, sharing
        )
        alloc.grants.append(commit_grant(state, plan, b0, users, bits))
        free[b0] = False
    return alloc


def dro_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    grouping: GroupingProvider,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    """Deficit-driven scheduling with RB-orthogonal slices."""
    return deficit_schedule(channel, t, plan, deficits, grouping, config, pf, sharing=False)


def drs_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    grouping: GroupingProvider,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    """Deficit-driven scheduling where slices may share an RB."""
    return deficit_schedule(channel, t, plan, deficits, grouping, config, pf, sharing=True)


def exhaustive_fill(
    channel: ChannelTensor,
    b: int,
    t: int,
    k0: int,
    pool: np.ndarray,
    config: SchedulerConfig,
) -> Tuple[List[int], np.ndarray]:
    """
    Best companions for ``k0`` on RB ``b`` by total rate.

    Every subset of ``pool`` with at most K-1 users is tried; fewer users and
    lexicographically earlier sets win ties.

    Raises:
        CombinationCapError: If the number of subsets exceeds the cap
    """
    pool = np.array(sorted(int(k) for k in pool if k != k0), dtype=int)
    extra = min(config.seats(channel) - 1, pool.size)
    count = sum(comb(pool.size, j) for j in range(extra + 1))
    if count > config.combination_cap:
        raise CombinationCapError(
            f"RS_ES: {count} candidate sets for {pool.size} users "
            f"(K={config.k_max}) exceed the cap of {config.combination_cap}"
        )
    h = channel.matrix(b, t)
    best_score = -np.inf
    best: Tuple[List[int], np.ndarray] = ([k0], np.zeros(1))
    for size in range(extra + 1):
        picks = pool[_subsets(pool.size, size)]
        candidates = np.hstack([np.full((len(picks), 1), k0), picks])
        scores, rates = _score_subsets(h, candidates, config.budget, config.reg_eps)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score = float(scores[j])
            best = ([int(k) for k in candidates[j]], rates[j])
    users, bits = best
    order = np.argsort(users)
    return [users[i] for i in order], np.asarray(bits)[order]


def rs_es_schedule(
    channel: ChannelTensor,
    t: int,
    plan: SlicingPlan,
    deficits: DeficitState,
    config: Optional[SchedulerConfig] = None,
    pf: Optional[PFState] = None,
) -> Allocation:
    """
    RB sharing with an exhaustive user search per RB.

    The anchor pair is picked as in DRS; the remaining seats go to the set of
    users, from any slice, that maximises the RB's total rate. Bits landing
    on a satisfied slice are delivered but do not count against a deficit.
    """
    config = config or SchedulerConfig()
    state = deficits.copy()
    alloc = Allocation(t)
    if not state.any_active():
        return alloc
    priority = priority_matrix(channel, t, plan, pf)
    free = np.ones(channel.num_rbs, dtype=bool)
    while state.any_active() and free.any():
        groups = classify_slices(state)
        pick = top_pair(priority, free, plan.users_of(groups.large))
        if pick is None:
            break
        k0, b0 = pick
        users, bits = exhaustive_fill(
            channel, b0, t, k0, np.arange(channel.num_users), config
        )
        alloc.grants.append(commit_grant(state, plan, b0, users, bits))
        free[b0] = False
    return alloc
