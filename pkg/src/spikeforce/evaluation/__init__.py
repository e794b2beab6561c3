"""Metrics, cross-validation, robustness sweeps, footprint accounting and statistics."""
from .crossval import DECODERS, CVResult, RunSpec, TaskRow, cross_validate
from .footprint import FootprintReport, decomposition_memory, footprint
from .metrics import MetricReport, mean_report, metrics
from .robustness import DEFAULT_RATES, RobustnessRow, degradation_curve, omit_spikes, robustness_sweep
from .stats import MannWhitneyResult, mann_whitney_u

__all__ = [
    "DECODERS", "CVResult", "RunSpec", "TaskRow", "cross_validate",
    "FootprintReport", "decomposition_memory", "footprint",
    "MetricReport", "mean_report", "metrics",
    "DEFAULT_RATES", "RobustnessRow", "degradation_curve", "omit_spikes", "robustness_sweep",
    "MannWhitneyResult", "mann_whitney_u",
]
