"""Export functionality for experiment results."""

from pathlib import Path
from typing import Iterable, List, Union

import pandas as pd
import plotly.express as px

from utils.harness import TIMING_COLUMNS, LatencyReport, Metrics

PathLike = Union[str, Path]


class ResultExporter:
    """
    Writes metrics, logs and comparisons below one output directory.

    CSVs use '.' decimals and a header row. Wall-clock columns never reach
    the metrics or comparison CSVs, so those are byte-reproducible for a
    fixed config and seed.
    """

    def __init__(self, output_dir: PathLike):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def export_metrics_csv(self, metrics: Iterable[Metrics], name: str = "metrics.csv") -> Path:
        """One row per scheduler."""
        path = self._path(name)
        pd.DataFrame([m.summary_row() for m in metrics]).to_csv(path, index=False)
        return path

    def export_log_csv(self, log: pd.DataFrame, name: str = "tti_log.csv") -> Path:
        path = self._path(name)
        log.to_csv(path, index=False)
        return path

    def export_tti_summary_csv(self, metrics: Metrics, name: str = "tti_summary.csv") -> Path:
        path = self._path(name)
        metrics.tti_summary().to_csv(path, index=False)
        return path

    def export_comparison_csv(self, table: pd.DataFrame, name: str = "comparison.csv") -> Path:
        path = self._path(name)
        table.drop(columns=[c for c in TIMING_COLUMNS if c in table.columns]).to_csv(
            path, index=False
        )
        return path

    def export_latency_csv(self, reports: Union[pd.DataFrame, List[LatencyReport]], name: str = "latency.csv") -> Path:
        path = self._path(name)
        frame = reports if isinstance(reports, pd.DataFrame) else pd.DataFrame([r.to_row() for r in reports])
        frame.to_csv(path, index=False)
        return path

    def export_comparison_html(self, table: pd.DataFrame, name: str = "comparison.html") -> Path:
        """Bar chart of average RBs per TTI with std error bars."""
        fig = px.bar(
            table,
            x="scheduler",
            y="avg_rbs",
            error_y="std_rbs",
            color="mode",
            title="Average allocated RBs per TTI",
            hover_data=["violation_ttis", "mean_jfi"],
            labels={
                "avg_rbs": "RBs per TTI",
                "scheduler": "Scheduler",
                "mode": "RB mode",
                "violation_ttis": "Violation TTIs",
                "mean_jfi": "Mean JFI",
            },
        )
        fig.update_layout(height=500, margin=dict(t=50, l=25, r=25, b=25))
        path = self._path(name)
        fig.write_html(str(path), include_plotlyjs="cdn")
        return path

    def export_comparison_markdown(self, table: pd.DataFrame, name: str = "comparison.md") -> Path:
        """Comparison as a Markdown table."""
        content = ["# Scheduler comparison\n"]
        if table.empty:
            content.append("No schedulers were run.\n")
        else:
            content.append("| Scheduler | Mode | Avg RBs | Std | Violation TTIs | Mean JFI |")
            content.append("|---|---|---|---|---|---|")
            for row in table.itertuples(index=False):
                content.append(
                    f"| {row.scheduler} | {row.mode} | {row.avg_rbs:.2f} | {row.std_rbs:.2f} "
                    f"| {row.violation_ttis} | {row.mean_jfi:.3f} |"
                )
            digest = table["channel_digest"].iloc[0]
            content.append(f"\nChannel digest: `{digest}`\n")

        path = self._path(name)
        path.write_text("\n".join(content), encoding="utf-8")
        return path
