"""Experiment configuration, statistics, result records and the acceptance suite."""
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .records import ResultRecord, all_passed, emit_results, read_jsonl
from .stats import chi_square_pmf, ks_statistic

__all__ = [
    "ConfigError", "ExperimentConfig", "dump_config", "load_config",
    "ResultRecord", "all_passed", "emit_results", "read_jsonl",
    "chi_square_pmf", "ks_statistic",
]
