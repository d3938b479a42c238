"""
Configuration manager for the application.
Handles loading and accessing configuration values.
"""

import os
import yaml
from typing import Any, Dict, Optional
from logzero import logger


class ConfigError(ValueError):
    """Raised when a configuration file or value is invalid."""


PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class ConfigManager:
    """Manages application configuration from YAML file."""

    _instance = None

    def __new__(cls):
        """Implement singleton pattern."""
        if cls._instance is None:
            cls._instance = super(ConfigManager, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        """Initialize configuration manager."""
        if self._initialized:
            return

        self.config_path = os.path.join(PROJECT_ROOT, 'config', 'config.yaml')
        self.config: Dict[str, Any] = {}
        self._load_config()
        self._initialized = True

    def _load_config(self) -> None:
        """Load configuration from YAML file."""
        try:
            with open(self.config_path, 'r') as f:
                self.config = yaml.safe_load(f) or {}
            logger.debug("✅ Configuration loaded successfully")
        except Exception as e:
            logger.error(f"❌ Error loading configuration: {str(e)}")
            raise ConfigError(f"cannot load {self.config_path}: {str(e)}") from e

    def get(self, *keys: str) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            *keys: Sequence of keys to traverse the configuration

        Returns:
            Any: Configuration value, or None when a key is missing

        Example:
            config.get('search', 'tpe', 'gamma')
        """
        value = self.config
        for key in keys:
            if not isinstance(value, dict):
                return None
            value = value.get(key, {})
        return value if value != {} else None

    def resolve_path(self, *keys: str) -> Optional[str]:
        """Get a configured path, anchored at the project root when relative."""
        value = self.get(*keys)
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.join(PROJECT_ROOT, value)

    def reload(self) -> None:
        """Reload configuration from file."""
        self._load_config()


def load_document(path: str) -> Dict[str, Any]:
    """
    Read a JSON or YAML document (YAML is a superset of JSON, one loader reads both).

    Args:
        path: File to read

    Returns:
        Dict[str, Any]: Parsed mapping
    """
    try:
        with open(path, 'r') as f:
            document = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {str(e)}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return document


config = ConfigManager()  # Create singleton instance
