"""Command-line interface for slicesched."""

import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from utils.channel import (
    ChannelLoadError,
    ClusterSpec,
    ClusterSpecError,
    MobilityMode,
    generate_synthetic,
    save_trace,
)
from utils.config import (
    ConfigError,
    ExperimentConfig,
    build_experiment_config,
    get_config_path,
    get_default_seed,
    get_default_workers,
    get_output_dir,
    load_experiment_config,
)
from utils.exporter import ResultExporter
from utils.harness import bench_latency, compare_schedulers, latency_sweep, run_experiment
from utils.registry import scheduler_names
from utils.schedulers import SchedulingInfeasibleError

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2


def _split(value: Optional[str]) -> List[str]:
    return [v.strip() for v in (value or "").split(",") if v.strip()]


def _ints(value: str) -> List[int]:
    try:
        return [int(v) for v in _split(value)]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")


def experiment_options(fn):
    """Options shared by run, compare and bench."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="YAML experiment file"),
        click.option("--preset", default=None, help="<network>-<scenario>-<sla>, e.g. small-hc-loose"),
        click.option("--scheduler", default=None, help=f"One of: {', '.join(scheduler_names())}"),
        click.option("--seed", type=int, default=None, help="Channel seed"),
        click.option("--k", "k_max", type=int, default=None, help="Max users per RB"),
        click.option("--scenario", default=None, help="LC, HC, SM or FM"),
        click.option("--sla", default=None, help="loose or tight"),
        click.option("--policy", default=None, help="max_rate or pf"),
        click.option("--ttis", "num_ttis", type=int, default=None, help="Number of TTIs"),
        click.option("--workers", type=int, default=None, help="Threads for the parallel schedulers"),
        click.option("--trace", "trace_path", default=None, help="Replay a channel trace file"),
        click.option("--output-dir", default=None, help="Where CSVs go (env SLICESCHED_OUTPUT_DIR)"),
        click.option("--verbose", "-v", is_flag=True, help="Narrate progress on stderr"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def load_config(config_path: Optional[str], overrides: Dict[str, Any]) -> ExperimentConfig:
    """
    Merge env defaults, the config file and CLI overrides, in that order.

    The default config file is read only when no preset is given on the
    command line.
    """
    defaults = {"seed": get_default_seed(), "workers": get_default_workers()}
    path = Path(config_path) if config_path else None
    if path is None and not overrides.get("preset") and get_config_path().exists():
        path = get_config_path()
    if path is not None:
        return load_experiment_config(path, overrides, defaults)
    values = dict(defaults)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_experiment_config(values)


def _overrides(**kwargs) -> Dict[str, Any]:
    return {k: v for k, v in kwargs.items() if v is not None}


def _exporter(output_dir: Optional[str]) -> ResultExporter:
    return ResultExporter(output_dir or get_output_dir())


def _metrics_table(metrics) -> Table:
    table = Table(title=f"{metrics.scheduler} ({metrics.mode})")
    table.add_column("Slice", style="cyan")
    table.add_column("Throughput (Mbps)", justify="right")
    table.add_column("SLA (Mbps)", justify="right")
    table.add_column("Violations", style="red", justify="right")
    table.add_column("JFI", justify="right")
    for sid, mbps, sla, vio, jfi in zip(
        metrics.slice_ids, metrics.throughput_mbps, metrics.sla_mbps, metrics.violations, metrics.jfi
    ):
        table.add_row(str(sid), f"{mbps:.2f}", f"{sla:.2f}", str(vio), f"{jfi:.3f}")
    return table


@click.group()
def cli():
    """slicesched - SLA-aware RB scheduling for massive-MIMO RAN slicing."""


@cli.command()
@experiment_options
@click.option("--dump-groupings", default=None, help="Directory for per-refresh grouping CSVs")
def run(config_path, preset, scheduler, seed, k_max, scenario, sla, policy, num_ttis,
        workers, trace_path, output_dir, verbose, dump_groupings):
    """Run one scheduler and write metrics.csv and tti_log.csv."""
    cfg = load_config(config_path, _overrides(
        preset=preset, scheduler=scheduler, seed=seed, k_max=k_max, scenario=scenario,
        sla=sla, policy=policy, num_ttis=num_ttis, workers=workers, trace_path=trace_path,
    ))
    metrics, log = run_experiment(cfg, verbose=verbose, grouping_dump=dump_groupings)

    exporter = _exporter(output_dir)
    paths = [
        exporter.export_metrics_csv([metrics]),
        exporter.export_log_csv(log),
        exporter.export_tti_summary_csv(metrics),
    ]
    console.print(_metrics_table(metrics))
    console.print(
        f"Average RBs/TTI: [bold]{metrics.avg_rbs:.2f}[/bold] ± {metrics.std_rbs:.2f}, "
        f"violation TTIs: {metrics.violation_ttis}/{metrics.measured_ttis}"
    )
    for path in paths:
        console.print(f"[green]✓ Wrote {path}[/green]")
    return EXIT_OK


@cli.command()
@experiment_options
@click.option("--schedulers", default="greedy,gp,dro,drs", help="Comma-separated scheduler names")
@click.option("--plot", is_flag=True, help="Also write comparison.html")
def compare(config_path, preset, scheduler, seed, k_max, scenario, sla, policy, num_ttis,
            workers, trace_path, output_dir, verbose, schedulers, plot):
    """Run several schedulers on identical channels and write comparison.csv/.md."""
    names = _split(schedulers)
    if not names:
        raise click.BadParameter("at least one scheduler is required", param_hint="--schedulers")
    cfg = load_config(config_path, _overrides(
        preset=preset, scheduler=names[0], seed=seed, k_max=k_max, scenario=scenario,
        sla=sla, policy=policy, num_ttis=num_ttis, workers=workers, trace_path=trace_path,
    ))
    table = compare_schedulers(cfg, names, verbose=verbose)

    exporter = _exporter(output_dir)
    written = [exporter.export_comparison_csv(table), exporter.export_comparison_markdown(table)]
    if plot:
        written.append(exporter.export_comparison_html(table))

    view = Table(title=f"Comparison ({cfg.network}, {cfg.scenario}, {cfg.sla})")
    view.add_column("Scheduler", style="cyan")
    view.add_column("Mode")
    view.add_column("Avg RBs", style="green", justify="right")
    view.add_column("Std", justify="right")
    view.add_column("Violation TTIs", style="red", justify="right")
    for row in table.itertuples(index=False):
        view.add_row(row.scheduler, row.mode, f"{row.avg_rbs:.2f}", f"{row.std_rbs:.2f}",
                     str(row.violation_ttis))
    console.print(view)
    for path in written:
        console.print(f"[green]✓ Wrote {path}[/green]")
    return EXIT_OK


@cli.command()
@experiment_options
@click.option("--repetitions", type=int, default=20, help="Timed TTIs")
@click.option("--warmup", type=int, default=1, help="Untimed TTIs before the samples")
@click.option("--sweep", default=None, help="Comma-separated networks, e.g. small,medium")
@click.option("--schedulers", default=None, help="Comma-separated schedulers for --sweep")
def bench(config_path, preset, scheduler, seed, k_max, scenario, sla, policy, num_ttis,
          workers, trace_path, output_dir, verbose, repetitions, warmup, sweep, schedulers):
    """Time scheduling decisions and write latency.csv."""
    cfg = load_config(config_path, _overrides(
        preset=preset, scheduler=scheduler, seed=seed, k_max=k_max, scenario=scenario,
        sla=sla, policy=policy, workers=workers, trace_path=trace_path,
    ))
    if sweep:
        frame = latency_sweep(cfg, _split(sweep), _split(schedulers) or None, repetitions)
    else:
        frame = None
        report = bench_latency(cfg, repetitions=repetitions, warmup=warmup)

    exporter = _exporter(output_dir)
    table = Table(title="Decision time per TTI")
    table.add_column("Scheduler", style="cyan")
    table.add_column("Network")
    table.add_column("Median (µs)", style="green", justify="right")
    table.add_column("p95 (µs)", justify="right")
    if frame is None:
        path = exporter.export_latency_csv([report])
        table.add_row(report.scheduler, report.network, f"{report.median_us:.1f}", f"{report.p95_us:.1f}")
    else:
        path = exporter.export_latency_csv(frame)
        for row in frame.itertuples(index=False):
            table.add_row(row.scheduler, row.network, f"{row.median_decision_us:.1f}",
                          f"{row.p95_decision_us:.1f}")
    console.print(table)
    console.print(f"[green]✓ Wrote {path}[/green]")
    return EXIT_OK


@cli.command("gen-trace")
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--antennas", type=int, default=64, help="Base-station antennas M")
@click.option("--users", type=int, default=16, help="Users N")
@click.option("--rbs", type=int, default=52, help="Resource blocks B")
@click.option("--ttis", type=int, default=10, help="TTIs T")
@click.option("--clusters", default=None, help="Users per cluster, e.g. 4,4,4,4 (default: one cluster)")
@click.option("--intra-corr", type=float, default=0.9)
@click.option("--inter-corr", type=float, default=0.1)
@click.option("--nlos", default=None, help="Comma-separated indices of NLoS clusters")
@click.option("--mobility", type=click.Choice(["static", "slow", "fast"]), default="static")
@click.option("--innovation", type=float, default=0.05, help="Slow-mobility innovation weight")
@click.option("--hop-probability", type=float, default=0.3, help="Fast-mobility hop probability")
@click.option("--frequency-flat", is_flag=True, help="One draw per TTI shared by all RBs")
@click.option("--seed", type=int, default=None)
def gen_trace(out, antennas, users, rbs, ttis, clusters, intra_corr, inter_corr, nlos,
              mobility, innovation, hop_probability, frequency_flat, seed):
    """Write a synthetic clustered channel trace to OUT."""
    per_cluster = _ints(clusters) if clusters else [users]
    nlos_idx = set(_ints(nlos)) if nlos else set()
    spec = ClusterSpec(
        num_users=users,
        users_per_cluster=tuple(per_cluster),
        intra_cluster_corr=intra_corr,
        inter_cluster_corr=inter_corr,
        los_flags=tuple(i not in nlos_idx for i in range(len(per_cluster))),
        seed=get_default_seed() if seed is None else seed,
        frequency_flat=frequency_flat,
    )
    if mobility == "slow":
        mode = MobilityMode.slow(innovation)
    elif mobility == "fast":
        mode = MobilityMode.fast(hop_probability)
    else:
        mode = MobilityMode.static()
    channel = generate_synthetic(spec, antennas, rbs, ttis, mode)
    path = save_trace(channel, out)
    console.print(f"[green]✓ Wrote {path} ({path.stat().st_size} bytes, digest {channel.digest()[:12]})[/green]")
    return EXIT_OK


@cli.command("validate-config")
@click.argument("path", type=click.Path(dir_okay=False))
def validate_config(path):
    """Check an experiment file and print the resolved settings."""
    cfg = load_experiment_config(path)
    table = Table(title=f"{path}")
    table.add_column("Key", style="cyan")
    table.add_column("Value")
    for key, value in cfg.to_dict().items():
        table.add_row(key, str(value))
    console.print(table)
    console.print("[green]✓ Configuration is valid[/green]")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point returning a process exit code.

    0 on success, 1 on configuration or usage errors, 2 when a scheduler
    gives up on the instance.
    """
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(args=args, prog_name="slicesched", standalone_mode=False)
    except SchedulingInfeasibleError as e:
        err_console.print(f"[red]Scheduler infeasible: {escape(str(e))}[/red]")
        return EXIT_INFEASIBLE
    except click.exceptions.Abort:
        err_console.print("[red]Aborted[/red]")
        return EXIT_CONFIG
    except click.ClickException as e:
        err_console.print(f"[red]Error: {escape(e.format_message())}[/red]")
        return EXIT_CONFIG
    except (ConfigError, ClusterSpecError, ChannelLoadError) as e:
        err_console.print(f"[red]{escape(str(e))}[/red]")
        return EXIT_CONFIG
    except (FileNotFoundError, OSError, ValueError) as e:
        err_console.print(f"[red]Error: {escape(str(e))}[/red]")
        return EXIT_CONFIG
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
