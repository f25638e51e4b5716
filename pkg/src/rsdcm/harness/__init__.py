"""Synthetic studies, data ingestion and the command-line interface."""
from .config import ASSUMPTIONS, REFERENCE_A, EMSettings, ExperimentConfig, var_generation_config
from .data import Dataset, load_bold_csv, write_bold_csv
from .montecarlo import emit_report, recompute_metrics, run_monte_carlo
from .synthetic import generate_synthetic

__all__ = [
    "ASSUMPTIONS", "REFERENCE_A", "EMSettings", "ExperimentConfig", "var_generation_config",
    "Dataset", "load_bold_csv", "write_bold_csv", "emit_report", "recompute_metrics",
    "run_monte_carlo", "generate_synthetic",
]
