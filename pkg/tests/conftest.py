"""Pytest configuration and shared fixtures."""

import os
import random
from pathlib import Path
from typing import Callable

import pytest

from trackerfw.analysis.fixtures import FixtureTruth, build_fixture_update
from trackerfw.config.loader import Config
from trackerfw.firmware.container import FirmwareUpdate, ImageId, build_update, serialize_update

# Set test environment
os.environ["LOG_LEVEL"] = "DEBUG"
os.environ["TRACKERFW_HOST"] = "127.0.0.1"

MakeUpdate = Callable[[random.Random], FirmwareUpdate]


@pytest.fixture
def config_yaml_content() -> str:
    """Sample config.yaml content for testing."""
    return """
system:
  name: trackerfw
  version: 1.0.0
  environment: test

logging:
  level: DEBUG
  format: rich

analysis:
  min_len: 6
  scan_start: 0x00010000
  scan_end: 0x00040000
  stride: 0x800
  top: 3
  min_votes: 12
  workers: 2

channel:
  host: ${TRACKERFW_HOST:127.0.0.1}
  chunk_size: 16
  timeout_seconds: 2.5

demo:
  seed: 99
  attack_app_version: 0xDEADBEEF
  app_base: 0x00018000
  boot_base: 0x0003AC00
"""


@pytest.fixture
def temp_config_file(tmp_path: Path, config_yaml_content: str) -> Path:
    """Create a temporary config file."""
    config_file = tmp_path / "config.yaml"
    config_file.write_text(config_yaml_content)
    return config_file


@pytest.fixture
def config() -> Config:
    """Built-in defaults, as used when no config file exists."""
    return Config()


@pytest.fixture
def rng() -> random.Random:
    """Seeded generator so randomised tests are reproducible."""
    return random.Random(0x5EED)


@pytest.fixture
def make_update() -> MakeUpdate:
    """Factory for random, self-consistent updates with small payloads."""

    def _make(rng: random.Random) -> FirmwareUpdate:
        app = rng.randbytes(rng.randint(0, 300))
        boot = rng.randbytes(rng.randint(0, 150))
        return build_update(app, boot, rng.getrandbits(32), rng.getrandbits(32))

    return _make


@pytest.fixture
def sample_update() -> FirmwareUpdate:
    """Small update with distinct payloads and versions."""
    return build_update(bytes(range(64)) * 4, b"bootloader-image\x00" * 8, 2, 1)


@pytest.fixture
def sample_bytes(sample_update: FirmwareUpdate) -> bytes:
    return serialize_update(sample_update)


@pytest.fixture(scope="session")
def fixture_update() -> tuple[FirmwareUpdate, dict[ImageId, FixtureTruth]]:
    """Synthetic update: app at 0x18000, bootloader at 0x3ac00."""
    return build_fixture_update(seed=7)


@pytest.fixture
def mac_key() -> bytes:
    return bytes(range(32))


@pytest.fixture
def key_file(tmp_path: Path, mac_key: bytes) -> Path:
    """MAC key stored as hex text."""
    path = tmp_path / "device.key"
    path.write_text(mac_key.hex() + "\n")
    return path
