"""Verification scores and charts."""

from .charts import (DiagramPoint, render_delta_chart, render_performance_diagram,
                     render_sweep_chart)
from .metrics import (METRICS, ContingencyTable, MetricDelta, Scores, delta_scores, scores,
                      sum_tables, tabulate, write_scores_csv)

__all__ = [
    "METRICS", "ContingencyTable", "DiagramPoint", "MetricDelta", "Scores", "delta_scores",
    "render_delta_chart", "render_performance_diagram", "render_sweep_chart", "scores",
    "sum_tables", "tabulate", "write_scores_csv",
]
