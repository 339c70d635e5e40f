"""Command line, configuration files and experiment drivers."""

from .config import ConfigError, ExperimentSpec, RunConfig, build_game, build_opponent, parse_config, parse_config_text
from .io import emit_csv, format_strategy, load_strategy, parse_strategy, save_strategy

__all__ = [
    "ConfigError", "ExperimentSpec", "RunConfig", "build_game", "build_opponent", "parse_config",
    "parse_config_text", "emit_csv", "format_strategy", "load_strategy", "parse_strategy", "save_strategy",
]
