"""
Configuration: environment defaults and experiment files.

Environment variables are loaded from a ``.env`` file at the repository root
with python-dotenv. Experiment files are YAML.
"""

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv

from utils.channel import ClusterSpec, MobilityMode
from utils.grouping import DEFAULT_THRESHOLD, GroupingScope
from utils.presets import (
    NETWORKS,
    SCENARIOS,
    SLA_LEVELS,
    parse_preset,
    sla_for,
    slice_membership,
)
from utils.rate import DEFAULT_REG_EPS, LinkBudget
from utils.registry import scheduler_names
from utils.schedulers import SchedulerConfig
from utils.sla import Policy, SlicingPlan, build_plan

# Load .env file if it exists
env_path = Path(__file__).parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path)


class ConfigError(ValueError):
    """Experiment configuration is invalid; the message lists every problem."""

    def __init__(self, problems: List[str], source: Optional[str] = None):
        self.problems = list(problems)
        where = f" in {source}" if source else ""
        body = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"Invalid experiment configuration{where}:\n{body}")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(
            f"{name} must be an integer, got '{raw}'. Fix it in:\n"
            f"  - .env file: {name}={default}\n"
            f"  - Environment variable: export {name}={default}"
        )


def get_output_dir() -> Path:
    """
    Directory for CSV and HTML outputs.
    Defaults to ``results``.
    """
    return Path(os.getenv("SLICESCHED_OUTPUT_DIR", "results"))


def get_default_workers() -> int:
    """
    Worker threads for the parallel schedulers. Defaults to 1.

    Raises:
        ValueError: If the variable is not a positive integer
    """
    workers = _env_int("SLICESCHED_WORKERS", 1)
    if workers < 1:
        raise ValueError(f"SLICESCHED_WORKERS must be >= 1, got {workers}")
    return workers


def get_default_seed() -> int:
    """Seed used when neither the config file nor the CLI sets one. Defaults to 7."""
    return _env_int("SLICESCHED_SEED", 7)


def get_config_path() -> Path:
    return Path(os.getenv("SLICESCHED_CONFIG", "config/experiment.yaml"))


@dataclass
class ExperimentConfig:
    """
    One simulated experiment.

    ``network``, ``scenario`` and ``sla`` select presets; any of the
    ``Optional`` fields left as None is filled from them by ``resolved()``.
    ``network="custom"`` requires the dimensions to be given explicitly.
    """

    network: str = "small"
    scenario: str = "HC"
    sla: str = "loose"
    scheduler: str = "dro"
    num_ttis: int = 1000
    warmup_ttis: int = 10
    seed: int = 7

    k_max: Optional[int] = None
    num_antennas: Optional[int] = None
    num_rbs: Optional[int] = None
    num_users: Optional[int] = None
    slice_sizes: Optional[List[int]] = None
    sla_mbps: Optional[List[float]] = None
    users_per_cluster: Optional[List[int]] = None
    los_flags: Optional[List[bool]] = None
    membership: Optional[str] = None

    intra_corr: float = 0.9
    inter_corr: float = 0.1
    frequency_flat: bool = False
    mobility: Optional[str] = None
    innovation: Optional[float] = None
    hop_probability: Optional[float] = None

    policy: str = "max_rate"
    grouping_scope: str = "per-tti"
    grouping_period: int = 1
    corr_threshold: float = DEFAULT_THRESHOLD

    transmit_power: float = 1.0
    noise_power: float = 0.01
    rb_bandwidth_hz: float = 20e6 / 52
    tti_duration_s: float = 1e-3
    reg_eps: float = DEFAULT_REG_EPS

    combination_cap: int = 100_000
    bnb_max_rbs: Optional[int] = None
    bnb_max_slices: Optional[int] = None
    bnb_node_limit: int = 20_000
    parallel_degree: Optional[int] = None
    workers: int = 1

    trace_path: Optional[str] = None
    slice_ids: Optional[List[int]] = field(default=None)

    def resolved(self) -> "ExperimentConfig":
        """Copy with every preset-derived field filled in."""
        values: Dict[str, Any] = {}
        net = NETWORKS.get(self.network, {})
        for key in (
            "k_max", "num_antennas", "num_rbs", "num_users",
            "slice_sizes", "users_per_cluster", "los_flags",
        ):
            if self.slice_sizes is not None and key in ("num_users", "users_per_cluster", "los_flags"):
                continue
            if getattr(self, key) is None and key in net:
                values[key] = list(net[key]) if isinstance(net[key], list) else net[key]

        if self.network == "medium" and self.los_flags is None and self.policy == Policy.PROPORTIONAL_FAIR.value:
            values["los_flags"] = [True, True, False, False]

        scen = SCENARIOS.get(self.scenario.upper() if isinstance(self.scenario, str) else "", {})
        for key in ("membership", "mobility", "innovation", "hop_probability"):
            if getattr(self, key) is None and key in scen:
                values[key] = scen[key]

        sizes = values.get("slice_sizes", self.slice_sizes)
        if self.sla_mbps is None and sizes is not None:
            try:
                values["sla_mbps"] = sla_for(len(sizes), self.sla)
            except KeyError:
                pass
        if self.num_users is None and "num_users" not in values and sizes is not None:
            values["num_users"] = int(sum(sizes))
        if self.users_per_cluster is None and "users_per_cluster" not in values and sizes is not None:
            values["users_per_cluster"] = list(sizes)
        upc = values.get("users_per_cluster", self.users_per_cluster)
        if self.los_flags is None and "los_flags" not in values and upc is not None:
            values["los_flags"] = [True] * len(upc)
        if self.k_max is None and "k_max" not in values:
            values["k_max"] = 8
        for key, fallback in (("num_antennas", 64), ("num_rbs", 52)):
            if getattr(self, key) is None and key not in values:
                values[key] = fallback
        # named presets let the exact solver run at their own size
        if self.bnb_max_rbs is None:
            values["bnb_max_rbs"] = values.get("num_rbs", self.num_rbs) if net else 12
        if self.bnb_max_slices is None:
            values["bnb_max_slices"] = len(sizes) if (net and sizes) else 4
        if self.membership is None and "membership" not in values:
            values["membership"] = "blocks"
        if self.mobility is None and "mobility" not in values:
            values["mobility"] = "static"
        return replace(self, **values)

    def validate(self) -> List[str]:
        """Field-level problems of a resolved config; empty when valid."""
        problems: List[str] = []

        def bad(name: str, what: str, value: Any) -> None:
            problems.append(f"{name}: {what} (got {value!r})")

        if self.network not in NETWORKS and self.network != "custom":
            bad("network", f"must be one of {list(NETWORKS) + ['custom']}", self.network)
        if self.scenario.upper() not in SCENARIOS:
            bad("scenario", f"must be one of {list(SCENARIOS)}", self.scenario)
        if self.sla not in SLA_LEVELS:
            bad("sla", "must be loose or tight", self.sla)
        if self.scheduler not in scheduler_names():
            bad("scheduler", f"must be one of {scheduler_names()}", self.scheduler)
        if self.num_ttis < 1:
            bad("num_ttis", "must be >= 1", self.num_ttis)
        if self.warmup_ttis < 0:
            bad("warmup_ttis", "must be >= 0", self.warmup_ttis)
        for name in ("num_antennas", "num_rbs", "num_users", "k_max"):
            value = getattr(self, name)
            if value is None or value < 1:
                bad(name, "must be a positive integer", value)
        if self.k_max and self.num_antennas and self.k_max > self.num_antennas:
            bad("k_max", f"cannot exceed num_antennas={self.num_antennas}", self.k_max)

        sizes = self.slice_sizes or []
        if not sizes:
            bad("slice_sizes", "at least one slice is required", self.slice_sizes)
        for i, size in enumerate(sizes):
            if size < 1:
                bad(f"slice_sizes[{i}]", "must be >= 1", size)
        if sizes and self.num_users and sum(sizes) != self.num_users:
            bad("slice_sizes", f"must add up to num_users={self.num_users}", sizes)
        if self.sla_mbps is None:
            bad("sla_mbps", f"no {self.sla} SLA table for {len(sizes)} slices; list them", None)
        else:
            if len(self.sla_mbps) != len(sizes):
                bad("sla_mbps", f"needs one entry per slice ({len(sizes)})", self.sla_mbps)
            for i, mbps in enumerate(self.sla_mbps):
                if mbps < 0:
                    bad(f"sla_mbps[{i}]", "must be >= 0", mbps)
        if self.slice_ids is not None:
            if len(self.slice_ids) != len(sizes) or len(set(self.slice_ids)) != len(self.slice_ids):
                bad("slice_ids", "needs one distinct id per slice", self.slice_ids)

        if self.users_per_cluster:
            if any(u < 1 for u in self.users_per_cluster):
                bad("users_per_cluster", "every cluster needs at least one user", self.users_per_cluster)
            if self.num_users and sum(self.users_per_cluster) != self.num_users:
                bad("users_per_cluster", f"must add up to num_users={self.num_users}", self.users_per_cluster)
            if self.los_flags is not None and len(self.los_flags) != len(self.users_per_cluster):
                bad("los_flags", "needs one flag per cluster", self.los_flags)
        for name in ("intra_corr", "inter_corr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                bad(name, "must lie in [0, 1]", value)
        if self.inter_corr > self.intra_corr:
            bad("inter_corr", f"must not exceed intra_corr={self.intra_corr}", self.inter_corr)
        elif self.users_per_cluster and len(self.users_per_cluster) > 1 and self.inter_corr == self.intra_corr:
            bad("inter_corr", f"must be below intra_corr={self.intra_corr} with several clusters", self.inter_corr)
        if self.membership not in ("blocks", "spread"):
            bad("membership", "must be blocks or spread", self.membership)
        if self.mobility not in ("static", "slow", "fast"):
            bad("mobility", "must be static, slow or fast", self.mobility)
        for name in ("innovation", "hop_probability"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                bad(name, "must lie in [0, 1]", value)

        if self.policy not in [p.value for p in Policy]:
            bad("policy", "must be max_rate or pf", self.policy)
        if self.grouping_scope not in [s.value for s in GroupingScope]:
            bad("grouping_scope", "must be per-rb, per-tti or once", self.grouping_scope)
        if self.grouping_period < 1:
            bad("grouping_period", "must be >= 1", self.grouping_period)
        if not 0.0 < self.corr_threshold < 1.0:
            bad("corr_threshold", "must lie strictly between 0 and 1", self.corr_threshold)
        for name in ("transmit_power", "noise_power", "rb_bandwidth_hz", "tti_duration_s"):
            if getattr(self, name) <= 0:
                bad(name, "must be > 0", getattr(self, name))
        if self.reg_eps < 0:
            bad("reg_eps", "must be >= 0", self.reg_eps)
        for name in ("combination_cap", "bnb_node_limit", "workers"):
            if getattr(self, name) < 1:
                bad(name, "must be >= 1", getattr(self, name))
        if self.parallel_degree is not None and self.parallel_degree < 1:
            bad("parallel_degree", "must be >= 1 when set", self.parallel_degree)
        return problems

    def link_budget(self) -> LinkBudget:
        return LinkBudget(
            transmit_power=self.transmit_power,
            noise_power=self.noise_power,
            rb_bandwidth=self.rb_bandwidth_hz,
            tti_duration=self.tti_duration_s,
        )

    def scheduler_config(self) -> SchedulerConfig:
        return SchedulerConfig(
            k_max=self.k_max,
            budget=self.link_budget(),
            reg_eps=self.reg_eps,
            combination_cap=self.combination_cap,
            bnb_max_rbs=self.bnb_max_rbs,
            bnb_max_slices=self.bnb_max_slices,
            bnb_node_limit=self.bnb_node_limit,
            parallel_degree=self.parallel_degree,
            workers=self.workers,
        )

    def mobility_mode(self) -> MobilityMode:
        if self.mobility == "slow":
            return MobilityMode.slow(self.innovation or 0.0)
        if self.mobility == "fast":
            return MobilityMode.fast(self.hop_probability or 0.0)
        return MobilityMode.static()

    def cluster_spec(self) -> ClusterSpec:
        return ClusterSpec(
            num_users=self.num_users,
            users_per_cluster=tuple(self.users_per_cluster),
            intra_cluster_corr=self.intra_corr,
            inter_cluster_corr=self.inter_corr,
            los_flags=tuple(self.los_flags) if self.los_flags is not None else None,
            seed=self.seed,
            frequency_flat=self.frequency_flat,
        )

    def slicing_plan(self) -> SlicingPlan:
        budget = self.link_budget()
        members = slice_membership(self.slice_sizes, self.membership)
        return build_plan(
            members,
            [budget.mbps_to_bits(m) for m in self.sla_mbps],
            self.num_users,
            policies=[Policy(self.policy)] * len(members),
            slice_ids=self.slice_ids,
        )

    def measured_ttis(self) -> range:
        if self.num_ttis > self.warmup_ttis:
            return range(self.warmup_ttis, self.num_ttis)
        return range(self.num_ttis)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def build_experiment_config(
    values: Mapping[str, Any], source: Optional[str] = None
) -> ExperimentConfig:
    """
    Build, resolve and validate a config from a flat mapping.

    A ``preset`` entry seeds network, scenario and SLA level; the other
    entries override it.

    Raises:
        ConfigError: Listing every field-level problem
    """
    values = dict(values)
    merged: Dict[str, Any] = {}
    preset = values.pop("preset", None)
    if preset:
        try:
            network, scenario, sla = parse_preset(str(preset))
        except ValueError as e:
            raise ConfigError([f"preset: {e}"], source)
        merged.update(network=network, scenario=scenario, sla=sla)

    unknown = sorted(k for k in values if k not in FIELD_NAMES)
    if unknown:
        raise ConfigError([f"{k}: unknown key" for k in unknown], source)
    merged.update({k: v for k, v in values.items() if v is not None})
    if isinstance(merged.get("scenario"), str):
        merged["scenario"] = merged["scenario"].upper()

    try:
        cfg = ExperimentConfig(**merged).resolved()
        problems = cfg.validate()
    except (TypeError, ValueError) as e:
        raise ConfigError([f"malformed value: {e}"], source)
    if problems:
        raise ConfigError(problems, source)
    return cfg


def load_experiment_config(
    path: Union[str, Path],
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Read a YAML experiment file and apply overrides on top.

    ``defaults`` sit below the file values, ``overrides`` above them.

    The file holds a mapping, optionally nested under ``experiment:``.

    Raises:
        ConfigError: If the file is missing, unreadable or invalid
    """
    path = Path(path)
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError([f"file not found: {path}"], str(path))
    except yaml.YAMLError as e:
        raise ConfigError([f"not valid YAML: {e}"], str(path))

    if isinstance(raw, dict) and "experiment" in raw:
        raw = raw["experiment"] or {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a mapping of keys to values"], str(path))

    values = dict(defaults or {})
    values.update(raw)
    if overrides:
        if overrides.get("preset"):
            for key in ("network", "scenario", "sla"):
                values.pop(key, None)
        values.update({k: v for k, v in overrides.items() if v is not None})
    return build_experiment_config(values, str(path))
