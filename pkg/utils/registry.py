"""Scheduler lookup by name for the harness and the CLI."""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from utils.bnb import bnb_schedule
from utils.channel import ChannelTensor
from utils.grouping import GroupingProvider
from utils.parallel import rb_parallel
from utils.schedulers import (
    Allocation,
    SchedulerConfig,
    dro_schedule,
    drs_schedule,
    gp_schedule,
    greedy_schedule,
    rs_es_schedule,
)
from utils.sla import DeficitState, PFState, SharingMode, SlicingPlan


@dataclass
class TTIContext:
    """Everything a scheduler may look at for one TTI."""

    channel: ChannelTensor
    t: int
    plan: SlicingPlan
    deficits: DeficitState
    config: SchedulerConfig
    grouping: GroupingProvider
    pf: Optional[PFState] = None
    previous_rb_bits: Optional[float] = None


@dataclass(frozen=True)
class SchedulerEntry:
    name: str
    mode: SharingMode
    run: Callable[[TTIContext], Allocation]
    uses_grouping: bool = False
    description: str = ""


def _table_based(fn):
    return lambda ctx: fn(ctx.channel, ctx.t, ctx.plan, ctx.deficits, ctx.config, ctx.pf)


def _grouped(fn):
    return lambda ctx: fn(
        ctx.channel, ctx.t, ctx.plan, ctx.deficits, ctx.grouping, ctx.config, ctx.pf
    )


def _parallel(base: str):
    return lambda ctx: rb_parallel(
        base, ctx.channel, ctx.t, ctx.plan, ctx.deficits, ctx.grouping,
        ctx.config, ctx.pf, ctx.previous_rb_bits,
    )


SCHEDULERS: Dict[str, SchedulerEntry] = {
    "greedy": SchedulerEntry(
        "greedy", SharingMode.ORTHOGONAL, _table_based(greedy_schedule),
        description="best (RB, slice) pair first",
    ),
    "gp": SchedulerEntry(
        "gp", SharingMode.ORTHOGONAL, _table_based(gp_schedule),
        description="largest deficit gets its best RB",
    ),
    "dro": SchedulerEntry(
        "dro", SharingMode.ORTHOGONAL, _grouped(dro_schedule), True,
        "deficit-driven, one slice per RB",
    ),
    "drs": SchedulerEntry(
        "drs", SharingMode.SHARING, _grouped(drs_schedule), True,
        "deficit-driven, slices share RBs",
    ),
    "rs_es": SchedulerEntry(
        "rs_es", SharingMode.SHARING, _table_based(rs_es_schedule),
        description="RB sharing with exhaustive user search",
    ),
    "bnb": SchedulerEntry(
        "bnb", SharingMode.ORTHOGONAL, _table_based(bnb_schedule),
        description="exact minimum RBs per TTI",
    ),
    "dro_para": SchedulerEntry(
        "dro_para", SharingMode.ORTHOGONAL, _parallel("dro"), True,
        "DRO with parallel RB rounds",
    ),
    "drs_para": SchedulerEntry(
        "drs_para", SharingMode.SHARING, _parallel("drs"), True,
        "DRS with parallel RB rounds",
    ),
}


def scheduler_names() -> List[str]:
    return list(SCHEDULERS)


def get_scheduler(name: str) -> SchedulerEntry:
    """
    Raises:
        ValueError: For an unknown scheduler name
    """
    key = name.strip().lower()
    if key not in SCHEDULERS:
        raise ValueError(
            f"Unknown scheduler '{name}'. Choose one of: {', '.join(SCHEDULERS)}"
        )
    return SCHEDULERS[key]
