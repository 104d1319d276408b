"""Data ingestion, verification campaigns, reports, and the CLI."""

from .ingest import IVData, ObservedData, export_csv, ingest_csv
from .reports import SCHEMA_VERSION, MetricResult, Report
from .experiments import (
    ExperimentConfig,
    run_clt_experiment,
    run_coverage_experiment,
    run_oracle_suite,
    run_suite,
)

__all__ = [
    "ObservedData",
    "IVData",
    "ingest_csv",
    "export_csv",
    "SCHEMA_VERSION",
    "MetricResult",
    "Report",
    "ExperimentConfig",
    "run_oracle_suite",
    "run_clt_experiment",
    "run_coverage_experiment",
    "run_suite",
]
