"""Configuration loader and settings."""

import os
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SystemConfig(BaseSettings):
    """System configuration."""

    model_config = SettingsConfigDict(env_prefix="TRACKERFW_SYSTEM_")

    name: str = Field(default="trackerfw")
    version: str = Field(default="1.0.0")
    environment: str = Field(default="development")


class LoggingConfig(BaseSettings):
    """Logging configuration."""

    model_config = SettingsConfigDict(env_prefix="TRACKERFW_LOGGING_")

    level: str = Field(default="WARNING")
    format: str = Field(default="rich")


class AnalysisConfig(BaseSettings):
    """Defaults for string detection and load-address estimation."""

    model_config = SettingsConfigDict(env_prefix="TRACKERFW_ANALYSIS_")

    min_len: int = Field(default=5, ge=1, description="Minimum printable run length")
    scan_start: int = Field(default=0x00000000, ge=0)
    scan_end: int = Field(default=0x00080000, ge=0, le=1 << 32)
    stride: int = Field(default=0x1000, gt=0)
    top: int = Field(default=10, ge=1, description="Candidates printed by scan-base")
    min_votes: int = Field(default=10, ge=1)
    workers: int = Field(default=1, ge=1, description="Threads used to score candidates")


class ChannelConfig(BaseSettings):
    """Update-channel simulator configuration."""

    model_config = SettingsConfigDict(env_prefix="TRACKERFW_CHANNEL_")

    host: str = Field(default="127.0.0.1")
    chunk_size: int = Field(default=20, ge=1, le=20)  # tracker refuses larger CHUNK frames
    timeout_seconds: float = Field(default=5.0, gt=0)


class DemoConfig(BaseSettings):
    """Attack demo scenario."""

    model_config = SettingsConfigDict(env_prefix="TRACKERFW_DEMO_")

    seed: int = Field(default=1337)
    installed_app_version: int = Field(default=1, ge=0, le=0xFFFFFFFF)
    installed_boot_version: int = Field(default=1, ge=0, le=0xFFFFFFFF)
    official_app_version: int = Field(default=2, ge=0, le=0xFFFFFFFF)
    official_boot_version: int = Field(default=1, ge=0, le=0xFFFFFFFF)
    attack_app_version: int = Field(default=0xDEADBEEF, ge=0, le=0xFFFFFFFF)
    payload_size: int = Field(default=4096, ge=2048, description="App image size; boot gets half")
    app_base: int = Field(default=0x00018000, ge=0)
    boot_base: int = Field(default=0x0003AC00, ge=0)


class Config(BaseSettings):
    """Main configuration."""

    system: SystemConfig = Field(default_factory=SystemConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    demo: DemoConfig = Field(default_factory=DemoConfig)


def load_config(config_path: str = "config.yaml") -> Config:
    """Load configuration from YAML file with environment variable substitution.

    Args:
        config_path: Path to the configuration file.

    Returns:
        Config: Loaded configuration object.
    """
    # Load environment variables
    load_dotenv()

    # Load YAML config
    config_file = Path(config_path)
    if not config_file.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_file, "r") as f:
        raw_config = yaml.safe_load(f) or {}

    # Substitute environment variables
    config_dict = _substitute_env_vars(raw_config)

    # Convert nested dicts to proper config objects
    return Config(**config_dict)


def load_config_or_defaults(config_path: str | None) -> Config:
    """Load the given config file, or ./config.yaml when present, else built-in defaults.

    An explicitly requested path that does not exist is still an error.
    """
    if config_path is not None:
        return load_config(config_path)
    if Path("config.yaml").exists():
        return load_config("config.yaml")
    return Config()


def _substitute_env_vars(config: Any) -> Any:
    """Recursively substitute environment variables in config.

    Environment variables are specified as ${VAR_NAME:default_value}
    """
    if isinstance(config, dict):
        return {key: _substitute_env_vars(value) for key, value in config.items()}
    elif isinstance(config, list):
        return [_substitute_env_vars(item) for item in config]
    elif isinstance(config, str) and config.startswith("${") and config.endswith("}"):
        var_spec = config[2:-1]
        if ":" in var_spec:
            var_name, default_value = var_spec.split(":", 1)
            return os.getenv(var_name, default_value)
        else:
            var_name = var_spec
            value = os.getenv(var_name)
            if value is None:
                raise ValueError(f"Environment variable {var_name} is required but not set")
            return value
    else:
        return config
