"""
slicesched: SLA-aware resource-block scheduling for massive-MIMO RAN slicing.
Channel models, zero-forcing rates, SLA deficits, user grouping, schedulers
and the TTI simulation harness.
"""

# Channels and rates
from .channel import (
    ChannelTensor,
    ClusterSpec,
    MobilityMode,
    generate_synthetic,
    inter_user_correlation,
    load_trace,
    save_trace,
)
from .rate import LinkBudget, achieved_rates, zf_precoder

# SLA bookkeeping and grouping
from .sla import DeficitState, PFState, Policy, SliceConfig, SlicingPlan, build_plan, refresh_deficits
from .grouping import GroupingProvider, build_correlation_graph, color_graph, grouping_schedule

# Schedulers
from .schedulers import (
    Allocation,
    SchedulerConfig,
    SchedulingInfeasibleError,
    dro_schedule,
    drs_schedule,
    gp_schedule,
    greedy_schedule,
    intra_slice_best,
    rs_es_schedule,
)
from .bnb import bnb_optimal, bnb_schedule
from .parallel import rb_parallel
from .registry import get_scheduler, scheduler_names

# Experiments
from .config import ConfigError, ExperimentConfig, build_experiment_config, load_experiment_config
from .harness import Metrics, bench_latency, compare_schedulers, run_experiment

__version__ = "0.1.0"

__all__ = [
    # Channels and rates
    'ChannelTensor',
    'ClusterSpec',
    'MobilityMode',
    'generate_synthetic',
    'inter_user_correlation',
    'load_trace',
    'save_trace',
    'LinkBudget',
    'achieved_rates',
    'zf_precoder',
    # SLA and grouping
    'DeficitState',
    'PFState',
    'Policy',
    'SliceConfig',
    'SlicingPlan',
    'build_plan',
    'refresh_deficits',
    'GroupingProvider',
    'build_correlation_graph',
    'color_graph',
    'grouping_schedule',
    # Schedulers
    'Allocation',
    'SchedulerConfig',
    'SchedulingInfeasibleError',
    'dro_schedule',
    'drs_schedule',
    'gp_schedule',
    'greedy_schedule',
    'intra_slice_best',
    'rs_es_schedule',
    'bnb_optimal',
    'bnb_schedule',
    'rb_parallel',
    'get_scheduler',
    'scheduler_names',
    # Experiments
    'ConfigError',
    'ExperimentConfig',
    'build_experiment_config',
    'load_experiment_config',
    'Metrics',
    'bench_latency',
    'compare_schedulers',
    'run_experiment',
]
