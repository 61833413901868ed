from .analyze import analyze
from .compare import compare, format_report, load_result_set
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .runner import canonical_csv_bytes, run
from .sweep import sweep

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "analyze",
    "canonical_csv_bytes",
    "compare",
    "dump_config",
    "format_report",
    "load_config",
    "load_result_set",
    "run",
    "sweep",
]
