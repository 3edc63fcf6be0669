"""
TTI-loop simulation driver.

Every TTI the harness refreshes the SLA deficits from the delivery history,
hands the channel snapshot to the scheduler and books what it delivered.
Channels are streamed one TTI at a time and hashed, so paired runs can prove
they saw the same realizations.
"""

import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from rich.console import Console
from rich.progress import track

from utils.channel import ChannelTensor, SyntheticChannelGenerator, load_trace
from utils.config import ExperimentConfig, build_experiment_config
from utils.grouping import export_grouping_csv, grouping_schedule
from utils.registry import SchedulerEntry, TTIContext, get_scheduler
from utils.schedulers import Allocation, SchedulingInfeasibleError
from utils.sla import (
    DeficitState,
    PFState,
    SlicingPlan,
    UndefinedFairnessError,
    jains_index,
    refresh_deficits,
)

console = Console(stderr=True)

LOG_COLUMNS = ["tti", "rb", "slice_ids", "slice_bits", "user_ids", "per_user_rate_bits"]
TIMING_COLUMNS = ("median_decision_us", "p95_decision_us")
VIOLATION_RTOL = 1e-9


def _say(verbose: bool, message: str) -> None:
    if verbose:
        console.print(message)


@dataclass
class Metrics:
    """Aggregates of one run over its measurement window."""

    scheduler: str
    mode: str
    slice_ids: List[int]
    avg_rbs: float
    std_rbs: float
    throughput_mbps: List[float]
    sla_mbps: List[float]
    violations: List[int]
    violation_ttis: int
    jfi: List[float]
    measured_ttis: int
    channel_digest: str
    rbs_per_tti: np.ndarray = field(repr=False)
    delivered_bits: np.ndarray = field(repr=False)
    decision_us: np.ndarray = field(repr=False)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations))

    @property
    def mean_jfi(self) -> float:
        values = [j for j in self.jfi if not np.isnan(j)]
        return float(np.mean(values)) if values else float("nan")

    def summary_row(self) -> Dict[str, object]:
        """One deterministic row: no wall-clock values."""
        row: Dict[str, object] = {
            "scheduler": self.scheduler,
            "mode": self.mode,
            "avg_rbs": self.avg_rbs,
            "std_rbs": self.std_rbs,
            "violation_ttis": self.violation_ttis,
            "measured_ttis": self.measured_ttis,
        }
        for sid, mbps, sla, vio, jfi in zip(
            self.slice_ids, self.throughput_mbps, self.sla_mbps, self.violations, self.jfi
        ):
            row[f"throughput_mbps_{sid}"] = mbps
            row[f"sla_mbps_{sid}"] = sla
            row[f"violations_{sid}"] = vio
            row[f"jfi_{sid}"] = jfi
        row["channel_digest"] = self.channel_digest
        return row

    def tti_summary(self) -> pd.DataFrame:
        """RBs, delivered bits per slice and decision time for every TTI."""
        frame = pd.DataFrame({"tti": np.arange(len(self.rbs_per_tti)), "num_rbs": self.rbs_per_tti})
        for i, sid in enumerate(self.slice_ids):
            frame[f"delivered_{sid}"] = self.delivered_bits[:, i]
        frame["decision_us"] = self.decision_us
        return frame


@dataclass(frozen=True)
class LatencyReport:
    scheduler: str
    network: str
    samples_us: np.ndarray

    @property
    def median_us(self) -> float:
        return float(np.median(self.samples_us))

    @property
    def p95_us(self) -> float:
        return float(np.percentile(self.samples_us, 95))

    def to_row(self) -> Dict[str, object]:
        return {
            "scheduler": self.scheduler,
            "network": self.network,
            "samples": int(self.samples_us.size),
            "median_decision_us": self.median_us,
            "p95_decision_us": self.p95_us,
        }


def _snapshots(cfg: ExperimentConfig, channel: Optional[ChannelTensor]) -> Iterator[ChannelTensor]:
    if channel is None and cfg.trace_path:
        channel = load_trace(cfg.trace_path)
    if channel is None:
        gen = SyntheticChannelGenerator(
            cfg.cluster_spec(), cfg.num_antennas, cfg.num_rbs, cfg.mobility_mode()
        )
        yield from gen.stream(cfg.num_ttis)
        return

    if channel.num_users != cfg.num_users:
        raise ValueError(
            f"Channel has {channel.num_users} users but the experiment plans {cfg.num_users}"
        )
    if channel.num_ttis < cfg.num_ttis:
        raise ValueError(
            f"Channel holds {channel.num_ttis} TTIs but the experiment runs {cfg.num_ttis}; "
            "lower num_ttis or supply a longer trace"
        )
    for t in range(cfg.num_ttis):
        yield ChannelTensor(channel.data[:, t:t + 1], first_tti=t)


def _log_rows(
    alloc: Allocation, plan: SlicingPlan, refreshed: DeficitState, t: int
) -> List[Dict[str, object]]:
    ids = plan.slice_ids
    rows = []
    for grant in alloc.grants:
        row: Dict[str, object] = {
            "tti": t,
            "rb": grant.rb,
            "slice_ids": ";".join(str(ids[s]) for s, _ in grant.slice_bits),
            "slice_bits": ";".join(f"{bits:.6f}" for _, bits in grant.slice_bits),
            "user_ids": ";".join(str(k) for k in grant.users),
            "per_user_rate_bits": ";".join(f"{bits:.6f}" for bits in grant.user_bits),
        }
        for sid, left in zip(ids, grant.remaining):
            row[f"deficit_{sid}"] = left
        rows.append(row)
    if not rows:
        row = {"tti": t, "rb": -1, "slice_ids": "", "slice_bits": "", "user_ids": "", "per_user_rate_bits": ""}
        for sid, left in zip(ids, refreshed.deficits):
            row[f"deficit_{sid}"] = float(left)
        rows.append(row)
    return rows


def _jfi_per_slice(plan: SlicingPlan, user_bits: np.ndarray) -> List[float]:
    out = []
    for cfg in plan.slices:
        try:
            out.append(jains_index(user_bits[list(cfg.users)]))
        except UndefinedFairnessError:
            out.append(float("nan"))
    return out


def run_experiment(
    cfg: ExperimentConfig,
    channel: Optional[ChannelTensor] = None,
    verbose: bool = False,
    grouping_dump: Optional[Union[str, Path]] = None,
) -> Tuple[Metrics, pd.DataFrame]:
    """
    Simulate ``cfg.num_ttis`` TTIs with one scheduler.

    Args:
        cfg: A resolved, validated experiment config
        channel: Channels to replay instead of the config's source
        verbose: Narrate progress on stderr
        grouping_dump: Directory receiving a CSV per grouping refresh

    Returns:
        Tuple[Metrics, DataFrame]: aggregates and the per-grant log

    Raises:
        SchedulingInfeasibleError: The scheduler gave up; the message names the scale
        ValueError: The channel does not fit the config
    """
    entry: SchedulerEntry = get_scheduler(cfg.scheduler)
    plan = cfg.slicing_plan()
    sched_cfg = cfg.scheduler_config()
    provider = grouping_schedule(cfg.grouping_period, cfg.grouping_scope, cfg.corr_threshold)
    pf = PFState(plan) if plan.uses_pf() else None
    window = cfg.measured_ttis()
    dump_dir = Path(grouping_dump) if grouping_dump else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    num_slices, num_ttis = plan.num_slices, cfg.num_ttis
    base = DeficitState.initial(plan)
    history = np.zeros((num_ttis, num_slices))
    rbs = np.zeros(num_ttis, dtype=int)
    decision_us = np.zeros(num_ttis)
    user_totals = np.zeros(plan.num_users)
    violations = np.zeros(num_slices, dtype=int)
    violation_ttis = 0
    previous_rb_bits: Optional[float] = None
    digest = hashlib.sha256()
    rows: List[Dict[str, object]] = []

    _say(verbose, f"[cyan]Running {entry.name} for {num_ttis} TTIs "
                  f"(N={plan.num_users}, S={num_slices}, K={cfg.k_max})[/cyan]")
    snapshots = _snapshots(cfg, channel)
    if verbose:
        snapshots = track(snapshots, total=num_ttis, description=entry.name, console=console)

    for t, snap in enumerate(snapshots):
        digest.update(np.ascontiguousarray(snap.data).tobytes())
        refreshed = refresh_deficits(base, history[: t + 1])
        if entry.uses_grouping:
            before = provider.refresh_count
            provider.prefetch(snap, t)
        if pf is not None:
            pf.set_gains(snap.gains(t), t)

        ctx = TTIContext(snap, t, plan, refreshed, sched_cfg, provider, pf, previous_rb_bits)
        start = time.perf_counter()
        try:
            alloc = entry.run(ctx)
        except SchedulingInfeasibleError as e:
            raise type(e)(
                f"{entry.name} gave up at TTI {t} (N={plan.num_users}, B={snap.num_rbs}, "
                f"S={num_slices}, K={cfg.k_max}):\n{e}"
            ) from e
        decision_us[t] = (time.perf_counter() - start) * 1e6

        delivered = alloc.delivered_by_slice(num_slices)
        history[t] = delivered
        rbs[t] = alloc.num_rbs
        bits = alloc.user_bits(plan.num_users)
        if pf is not None:
            pf.update(bits)
        if alloc.num_rbs:
            previous_rb_bits = float(delivered.sum()) / alloc.num_rbs

        if t in window:
            user_totals += bits
            after = np.maximum(0.0, (t + 1) * plan.targets - history[: t + 1].sum(axis=0))
            short = after > VIOLATION_RTOL * np.maximum(1.0, plan.targets)
            violations += short
            violation_ttis += int(short.any())

        if dump_dir is not None and entry.uses_grouping and provider.refresh_count > before:
            export_grouping_csv(provider.get(snap, 0, t), dump_dir / f"grouping_t{t:05d}.csv")
        rows.extend(_log_rows(alloc, plan, refreshed, t))

    measured = np.asarray(window)
    seconds = len(measured) * cfg.tti_duration_s
    throughput = history[measured].sum(axis=0) / seconds / 1e6
    metrics = Metrics(
        scheduler=entry.name,
        mode=entry.mode.value,
        slice_ids=plan.slice_ids,
        avg_rbs=float(rbs[measured].mean()),
        std_rbs=float(rbs[measured].std()),
        throughput_mbps=[float(x) for x in throughput],
        sla_mbps=[float(x) for x in cfg.sla_mbps],
        violations=[int(v) for v in violations],
        violation_ttis=violation_ttis,
        jfi=_jfi_per_slice(plan, user_totals / len(measured)),
        measured_ttis=len(measured),
        channel_digest=digest.hexdigest(),
        rbs_per_tti=rbs,
        delivered_bits=history,
        decision_us=decision_us,
    )
    log = pd.DataFrame(rows, columns=LOG_COLUMNS + [f"deficit_{sid}" for sid in plan.slice_ids])
    _say(verbose, f"[green]✓ {entry.name}: {metrics.avg_rbs:.2f} RBs/TTI, "
                  f"{metrics.violation_ttis} violation TTIs[/green]")
    return metrics, log


def compare_schedulers(
    cfg: ExperimentConfig,
    schedulers: Sequence[str],
    channel: Optional[ChannelTensor] = None,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Run several schedulers on identical channels.

    Returns:
        DataFrame: one row per scheduler, in the given order

    Raises:
        RuntimeError: If two runs saw different channel realizations
    """
    if not schedulers:
        raise ValueError("compare_schedulers needs at least one scheduler")
    rows = []
    digest = None
    for name in schedulers:
        metrics, _ = run_experiment(replace(cfg, scheduler=name), channel, verbose)
        if digest is None:
            digest = metrics.channel_digest
        elif metrics.channel_digest != digest:
            raise RuntimeError(
                f"{name} saw a different channel realization than {schedulers[0]}; "
                "paired comparison is void"
            )
        rows.append({
            "scheduler": metrics.scheduler,
            "mode": metrics.mode,
            "avg_rbs": metrics.avg_rbs,
            "std_rbs": metrics.std_rbs,
            "violation_ttis": metrics.violation_ttis,
            "violations": metrics.total_violations,
            "mean_jfi": metrics.mean_jfi,
            "channel_digest": metrics.channel_digest,
            "median_decision_us": float(np.median(metrics.decision_us)),
        })
    _say(verbose, f"[green]✓ Compared {len(rows)} schedulers on channel {digest[:12]}[/green]")
    return pd.DataFrame(rows)


def bench_latency(
    cfg: ExperimentConfig,
    scheduler: Optional[str] = None,
    repetitions: int = 20,
    warmup: int = 1,
    channel: Optional[ChannelTensor] = None,
) -> LatencyReport:
    """
    Per-decision wall-clock time of one scheduler.

    Runs ``warmup + repetitions`` TTIs and keeps the last ``repetitions``
    samples. Only the scheduler call is timed.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    name = scheduler or cfg.scheduler
    run_cfg = replace(cfg, scheduler=name, num_ttis=warmup + repetitions, warmup_ttis=0)
    metrics, _ = run_experiment(run_cfg, channel)
    return LatencyReport(name, cfg.network, metrics.decision_us[warmup:].copy())


def latency_sweep(
    cfg: ExperimentConfig,
    networks: Sequence[str] = ("small", "medium"),
    schedulers: Optional[Sequence[str]] = None,
    repetitions: int = 5,
) -> pd.DataFrame:
    """Decision time per scheduler across network presets."""
    rows = []
    for network in networks:
        net_cfg = build_experiment_config({
            "network": network,
            "scenario": cfg.scenario,
            "sla": cfg.sla,
            "seed": cfg.seed,
            "workers": cfg.workers,
            "policy": cfg.policy,
        })
        for name in schedulers or [cfg.scheduler]:
            report = bench_latency(net_cfg, name, repetitions)
            row = report.to_row()
            row["num_users"] = net_cfg.num_users
            row["num_slices"] = len(net_cfg.slice_sizes)
            row["k_max"] = net_cfg.k_max
            rows.append(row)
    return pd.DataFrame(rows)
