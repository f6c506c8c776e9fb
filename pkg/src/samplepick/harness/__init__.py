from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .metrics import MetricsReport, account_control_traffic
from .oracle import ground_truth
from .report import emit_report
from .runner import Experiment, run_experiment

__all__ = [
    "ConfigError", "Experiment", "ExperimentConfig", "MetricsReport", "account_control_traffic",
    "emit_report", "ground_truth", "load_config", "parse_config", "run_experiment",
]
