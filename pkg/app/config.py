# Config

import json
import os
from typing import Any, Dict, Optional

from model.config import PipelineConfig, build_config
from utils.exceptions import ConfigurationError

ENV_PREFIX = "MTRACE_"


class Config:
    """Application configuration manager."""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            config_file (Optional[str]): Path to a JSON config file. If None, uses environment variables.
        """
        self._config: Dict[str, Any] = {}
        self._load_config(config_file)

    def _load_config(self, config_file: Optional[str]) -> None:
        """Load configuration from file or environment."""
        if config_file:
            self._load_from_file(config_file)
        else:
            self._load_from_env()

        self._validate_config()

    def _load_from_file(self, config_file: str) -> None:
        """Load configuration from JSON file."""
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                self._config = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"Failed to load config file: {str(e)}") from e
        if not isinstance(self._config, dict):
            raise ConfigurationError("Config file must hold a JSON object")

    def _load_from_env(self) -> None:
        """Load configuration from environment variables.

        ``MTRACE_<FIELD>`` sets a pipeline field, e.g. ``MTRACE_MIN_DWELL_S=900``.
        """
        pipeline = {}
        for name in PipelineConfig.model_fields:
            value = os.getenv(f"{ENV_PREFIX}{name.upper()}")
            if value is not None:
                pipeline[name] = value
        self._config = {
            "log_level": os.getenv(f"{ENV_PREFIX}LOG_LEVEL", "INFO"),
            "log_file": os.getenv(f"{ENV_PREFIX}LOG_FILE"),
            "store_dir": os.getenv(f"{ENV_PREFIX}STORE_DIR"),
            "pipeline": pipeline,
        }

    def _validate_config(self) -> None:
        """Validate the pipeline section eagerly so bad values fail before any work."""
        section = self.get("pipeline", {}) or {}
        if not isinstance(section, dict):
            raise ConfigurationError("'pipeline' must be an object")
        unknown = sorted(set(section) - set(PipelineConfig.model_fields))
        if unknown:
            raise ConfigurationError(f"Unknown pipeline settings: {', '.join(unknown)}")
        self._pipeline = build_config(section)

    def get(self, path: str, default: Any = None) -> Any:
        """
        Get configuration value by dot-notation path.

        Args:
            path (str): Configuration path (e.g., 'pipeline.min_dwell_s')
            default (Any): Default value if path not found

        Returns:
            Any: Configuration value
        """
        parts = path.split('.')
        value = self._config

        for part in parts:
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default

        return value

    def pipeline(self, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
        """
        Pipeline parameters with command-line overrides applied on top.

        Args:
            overrides (Optional[Dict[str, Any]]): Field values from flags; None entries are ignored

        Returns:
            PipelineConfig: The validated parameters
        """
        if not overrides:
            return self._pipeline
        return self._pipeline.with_overrides(**overrides)

    @property
    def log_level(self) -> str:
        """Get logging level."""
        return self.get("log_level", "INFO") or "INFO"

    @property
    def log_file(self) -> Optional[str]:
        """Get log file path."""
        return self.get("log_file")

    @property
    def store_dir(self) -> Optional[str]:
        """Default trace store directory."""
        return self.get("store_dir")
