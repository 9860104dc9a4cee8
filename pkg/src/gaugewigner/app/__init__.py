"""User surface: scenario configuration, runs, verification suites, exports and the CLI."""
from .config import ConfigError, ScenarioConfig, validate_config
from .io import CheckResult, RunManifest, read_array, write_array

__all__ = ["ConfigError", "ScenarioConfig", "validate_config", "CheckResult", "RunManifest",
           "read_array", "write_array"]
