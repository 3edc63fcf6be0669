"""
Slices, SLA deficit bookkeeping, slice classification, the proportional-fair
metric and Jain's fairness index.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.rate import slice_rate

PF_EPSILON = 1e-6


class UnknownSliceError(KeyError):
    """Slice index not part of the plan."""


class UndefinedFairnessError(ValueError):
    """Jain's index asked for an all-zero rate vector."""


class PlanError(ValueError):
    """Inconsistent slicing plan."""


class Policy(str, Enum):
    MAX_RATE = "max_rate"
    PROPORTIONAL_FAIR = "pf"


class SharingMode(str, Enum):
    ORTHOGONAL = "orthogonal"
    SHARING = "sharing"


@dataclass(frozen=True)
class SliceConfig:
    """
    One tenant: its users, its throughput target in bits per TTI and the
    policy its intra-slice scheduler follows.
    """

    slice_id: int
    users: Tuple[int, ...]
    sla_bits: float
    policy: Policy = Policy.MAX_RATE

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(int(k) for k in self.users))
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.sla_bits < 0:
            raise PlanError(f"Slice {self.slice_id}: SLA must be >= 0, got {self.sla_bits}")
        if not self.users:
            raise PlanError(f"Slice {self.slice_id} has no users")
        if len(set(self.users)) != len(self.users):
            raise PlanError(f"Slice {self.slice_id} lists a user twice")


@dataclass(frozen=True)
class SlicingPlan:
    slices: Tuple[SliceConfig, ...]
    num_users: int

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        owner = np.full(self.num_users, -1, dtype=int)
        for idx, cfg in enumerate(self.slices):
            for k in cfg.users:
                if not 0 <= k < self.num_users:
                    raise PlanError(
                        f"Slice {cfg.slice_id}: user {k} outside [0, {self.num_users})"
                    )
                if owner[k] >= 0:
                    raise PlanError(
                        f"User {k} belongs to slices {self.slices[owner[k]].slice_id} "
                        f"and {cfg.slice_id}"
                    )
                owner[k] = idx
        owner.setflags(write=False)
        object.__setattr__(self, "_owner", owner)

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    @property
    def slice_of(self) -> np.ndarray:
        """Slice index of every user, -1 for users outside every slice."""
        return self._owner

    @property
    def targets(self) -> np.ndarray:
        return np.array([s.sla_bits for s in self.slices], dtype=float)

    @property
    def slice_ids(self) -> List[int]:
        return [s.slice_id for s in self.slices]

    def index_of(self, slice_id: int) -> int:
        for idx, cfg in enumerate(self.slices):
            if cfg.slice_id == slice_id:
                return idx
        raise UnknownSliceError(slice_id)

    def users_of(self, slice_indices: Iterable[int]) -> np.ndarray:
        """Sorted users of the given slice indices."""
        wanted = list(slice_indices)
        if not wanted:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(np.isin(self._owner, wanted))

    def uses_pf(self) -> bool:
        return any(s.policy is Policy.PROPORTIONAL_FAIR for s in self.slices)


@dataclass
class DeficitState:
    """
    Per-slice SLA deficits.

    After a refresh ``deficits`` holds max(0, t*gamma - delivered); inside a
    TTI ``consume`` decrements it; ``delivered`` is cumulative since the start of the run.
    """

    targets: np.ndarray
    deficits: np.ndarray
    delivered: np.ndarray
    tti: int = 0

    @classmethod
    def initial(cls, plan: SlicingPlan) -> "DeficitState":
        zeros = np.zeros(plan.num_slices)
        return cls(plan.targets, zeros.copy(), zeros.copy(), 0)

    @classmethod
    def from_deficits(cls, deficits: Sequence[float]) -> "DeficitState":
        """State holding the given deficits, handy for single-TTI use."""
        d = np.asarray(deficits, dtype=float)
        return cls(d.copy(), d.copy(), np.zeros_like(d), 1)

    @property
    def num_slices(self) -> int:
        return len(self.deficits)

    @property
    def active(self) -> np.ndarray:
        return self.deficits > 0

    def any_active(self) -> bool:
        return bool(np.any(self.deficits > 0))

    def total(self) -> float:
        return float(np.sum(self.deficits))

    def copy(self) -> "DeficitState":
        return DeficitState(
            self.targets.copy(), self.deficits.copy(), self.delivered.copy(), self.tti
        )


def refresh_deficits(state: DeficitState, history: np.ndarray) -> DeficitState:
    """
    Recompute deficits from delivery history: max(0, t' * gamma - delivered).

    Args:
        state: Current state (targets are kept)
        history: (t', S) delivered bits per TTI and slice, TTIs 0..t'-1

    Returns:
        DeficitState: new state with tti = t'
    """
    history = np.asarray(history, dtype=float)
    if history.ndim == 1:
        history = history[None, :]
    horizon = history.shape[0]
    if horizon < 1:
        raise ValueError("refresh_deficits needs at least one TTI of history")
    if history.shape[1] != state.num_slices:
        raise ValueError(
            f"History has {history.shape[1]} slices, state has {state.num_slices}"
        )
    delivered = history.sum(axis=0)
    deficits = np.maximum(0.0, horizon * state.targets - delivered)
    return DeficitState(state.targets.copy(), deficits, delivered, horizon)


def consume(state: DeficitState, s: int, bits: float) -> DeficitState:
    """
    Credit ``bits`` delivered to slice ``s`` within the current TTI.

    Mutates and returns ``state``.

    Raises:
        UnknownSliceError: If ``s`` is not a slice index
        ValueError: If ``bits`` is negative
    """
    if not 0 <= s < state.num_slices:
        raise UnknownSliceError(s)
    if bits < 0:
        raise ValueError(f"Delivered bits must be >= 0, got {bits}")
    state.deficits[s] = max(0.0, state.deficits[s] - bits)
    state.delivered[s] += bits
    return state


@dataclass(frozen=True)
class DeltaGroups:
    large: Tuple[int, ...]
    small: Tuple[int, ...]
    average: float

    @property
    def is_empty(self) -> bool:
        return not self.large and not self.small

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(sorted(self.large + self.small))


def classify_slices(state: DeficitState) -> DeltaGroups:
    """
    Split active slices around the mean active deficit.

    Returns an empty DeltaGroups when no slice is active.
    """
    d = state.deficits
    active = np.flatnonzero(d > 0)
    if active.size == 0:
        return DeltaGroups((), (), 0.0)
    avg = float(np.mean(d[active]))
    # relative slack so equal deficits never fall below their own float mean
    cut = avg * (1.0 - 1e-12)
    large = tuple(int(s) for s in active if d[s] >= cut)
    small = tuple(int(s) for s in active if d[s] < cut)
    return DeltaGroups(large, small, avg)


@dataclass
class PFState:
    """
    Cumulative delivered bits per user for the proportional-fair policy.

    Normalization is intra-slice: R̂_k divides by the largest accumulated
    rate in k's slice, ĝ_k by the largest gain in k's slice at the TTI.
    """

    plan: SlicingPlan
    accumulated: np.ndarray = None
    epsilon: float = PF_EPSILON
    _gains: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    _tti: Optional[int] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.accumulated is None:
            self.accumulated = np.zeros(self.plan.num_users)
        else:
            self.accumulated = np.asarray(self.accumulated, dtype=float).copy()

    def update(self, user_bits: np.ndarray) -> None:
        self.accumulated = self.accumulated + np.asarray(user_bits, dtype=float)

    def set_gains(self, gains: np.ndarray, t: int) -> None:
        """Register the (B, N) gains of TTI ``t``."""
        self._gains = np.asarray(gains, dtype=float)
        self._tti = t

    def normalized_rates(self) -> np.ndarray:
        out = np.ones(self.plan.num_users)
        for cfg in self.plan.slices:
            idx = np.asarray(cfg.users)
            acc = self.accumulated[idx]
            top = acc.max()
            if top > 0:
                out[idx] = np.maximum(acc, self.epsilon * top) / top
        return out

    def normalized_gains(self, gains: Optional[np.ndarray] = None) -> np.ndarray:
        g = self._gains if gains is None else np.asarray(gains, dtype=float)
        if g is None:
            raise ValueError("No channel gains registered for the PF metric")
        out = np.zeros_like(g)
        for cfg in self.plan.slices:
            idx = np.asarray(cfg.users)
            top = g[:, idx].max()
            if top > 0:
                out[:, idx] = g[:, idx] / top
        return out

    def metrics(self, gains: Optional[np.ndarray] = None) -> np.ndarray:
        """ĝ/R̂ for every (b, k)."""
        return self.normalized_gains(gains) / self.normalized_rates()[None, :]

    def priorities(self, gains: np.ndarray) -> np.ndarray:
        """g/R̂ for every (b, k); gain units, comparable across slices."""
        return np.asarray(gains, dtype=float) / self.normalized_rates()[None, :]


def pf_metric(pf: PFState, k: int, b: int, t: int) -> float:
    """
    ĝ_k^{b,t} / R̂_k for user ``k`` on RB ``b`` at TTI ``t``.

    Gains must have been registered for ``t`` with ``PFState.set_gains``.
    """
    if pf._tti != t:
        raise ValueError(f"PF gains registered for TTI {pf._tti}, asked for {t}")
    return float(pf.metrics()[b, k])


def jains_index(rates: Sequence[float]) -> float:
    """
    Jain's fairness index (Σx)^2 / (n Σx^2).

    Raises:
        ValueError: For an empty or negative input
        UndefinedFairnessError: If every rate is zero
    """
    x = np.asarray(rates, dtype=float)
    if x.size == 0:
        raise ValueError("jains_index needs at least one rate")
    if np.any(x < 0):
        raise ValueError("Rates must be non-negative")
    sq = float(np.sum(x * x))
    if sq == 0.0:
        raise UndefinedFairnessError("Jain's index is undefined when every rate is zero")
    return float(np.sum(x)) ** 2 / (x.size * sq)


def build_plan(
    slice_users: Sequence[Sequence[int]],
    sla_bits: Sequence[float],
    num_users: int,
    policies: Optional[Sequence[Policy]] = None,
    slice_ids: Optional[Sequence[int]] = None,
) -> SlicingPlan:
    """Convenience constructor from parallel lists."""
    if len(slice_users) != len(sla_bits):
        raise PlanError(
            f"{len(slice_users)} slices but {len(sla_bits)} SLA targets"
        )
    policies = policies or [Policy.MAX_RATE] * len(slice_users)
    slice_ids = slice_ids or list(range(1, len(slice_users) + 1))
    slices = [
        SliceConfig(sid, tuple(users), float(gamma), Policy(pol))
        for sid, users, gamma, pol in zip(slice_ids, slice_users, sla_bits, policies)
    ]
    return SlicingPlan(tuple(slices), num_users)


def slice_bits_of(user_bits: Dict[int, float], plan: SlicingPlan) -> Dict[int, float]:
    """Bits per slice index; users outside every slice are dropped."""
    owner = plan.slice_of
    touched = sorted({int(owner[k]) for k in user_bits if owner[k] >= 0})
    return {s: slice_rate(user_bits, plan.slices[s].users) for s in touched}
