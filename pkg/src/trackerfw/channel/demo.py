"""End-to-end attack demo: vendor server, interceptor, PCD and tracker on loopback.

The attacker takes the official update, changes the app version and a few
payload bytes, resigns the container and swaps it in on the way to the PCD.
Without a key the attacker cannot produce a MAC, so its file carries none.
"""

import dataclasses
import logging
import random
from contextlib import ExitStack

from trackerfw.analysis.fixtures import build_fixture_update
from trackerfw.channel.interceptor import Attack, FakeAvailability, Interceptor, SwapFirmware
from trackerfw.channel.manifest import UpdateManifest
from trackerfw.channel.pcd import SyncOutcome, SyncReport, pcd_sync
from trackerfw.channel.server import VendorServer
from trackerfw.channel.tracker import TrackerDevice, TrackerNode, TrackerState
from trackerfw.config.loader import Config
from trackerfw.firmware.checksum import crc32, format_crc
from trackerfw.firmware.container import ImageId, parse_update, serialize_update
from trackerfw.firmware.mac import KEY_SIZE, attach_mac, split_trailer
from trackerfw.firmware.patch import patch_bytes, resign, set_version
from trackerfw.firmware.verify import RejectCause, VerifyPolicy

logger = logging.getLogger(__name__)

PATCH_SIZE = 4


@dataclasses.dataclass(frozen=True)
class DemoResult:
    """Outcome of one demo run."""

    countermeasure: bool
    fake_availability: bool
    transcript: list[str]
    sync: SyncReport
    tracker_state: TrackerState
    expected_outcome_met: bool


def device_key(seed: int) -> bytes:
    """Per-device MAC key, provisioned out of band."""
    return random.Random(seed).randbytes(KEY_SIZE)


def forge_update(official: bytes, attack_version: int, seed: int) -> bytes:
    """Attacker's file: new app version, a patched word, all checksums recomputed.

    Any MAC trailer on ``official`` is dropped; the attacker has no key to
    produce a new one.
    """
    container, _ = split_trailer(official)
    update = parse_update(container)
    rng = random.Random(f"attack-{seed}")
    app = update.payload(ImageId.APP)
    at = rng.randrange(0, len(app) - PATCH_SIZE + 1)
    patched = set_version(update, ImageId.APP, attack_version)
    patched = patch_bytes(patched, ImageId.APP, at, rng.randbytes(PATCH_SIZE))
    logger.info(f"Forged update: app version 0x{attack_version:08x}, patched app at {at}")
    return serialize_update(resign(patched))


def _expected(
    countermeasure: bool, sync: SyncReport, state: TrackerState, config: Config
) -> bool:
    demo = config.demo
    if countermeasure:
        return (
            sync.outcome is SyncOutcome.REJECTED
            and sync.cause in (RejectCause.MAC_MISSING, RejectCause.MAC_MISMATCH)
            and state.installed_app_version == demo.installed_app_version
            and state.installed_boot_version == demo.installed_boot_version
        )
    return (
        sync.outcome is SyncOutcome.INSTALLED
        and state.installed_app_version == demo.attack_app_version
    )


def run_attack_demo(
    config: Config,
    countermeasure: bool = False,
    fake_availability: bool = False,
    seed: int | None = None,
) -> DemoResult:
    """Start all four nodes, run one PCD sync through the interceptor and report.

    Args:
        config: Scenario versions, bases and channel settings.
        countermeasure: Tag official firmware with a MAC and make the tracker require it.
        fake_availability: Vendor offers nothing; the interceptor invents the update.
        seed: Overrides ``config.demo.seed``.

    Returns:
        DemoResult; ``expected_outcome_met`` is True when the attack installs
        without the countermeasure and is rejected with it.
    """
    demo, channel = config.demo, config.channel
    seed = demo.seed if seed is None else seed
    lines: list[str] = []

    def note(line: str) -> None:
        lines.append(line)
        logger.info(line)

    update, _ = build_fixture_update(
        seed,
        app_base=demo.app_base,
        boot_base=demo.boot_base,
        app_size=demo.payload_size,
        boot_size=demo.payload_size // 2,
        app_version=demo.official_app_version,
        boot_version=demo.official_boot_version,
    )
    official = serialize_update(update)
    if countermeasure:
        key = device_key(seed)
        official = attach_mac(official, key)
        policy = VerifyPolicy.with_mac(key)
    else:
        policy = VerifyPolicy.checksum_only()
    forged = forge_update(official, demo.attack_app_version, seed)

    note(f"policy: {policy.mode.value}")
    note(
        f"official update: app={demo.official_app_version} boot={demo.official_boot_version} "
        f"size={len(official)} crc={format_crc(crc32(official))}"
    )
    note(
        f"forged update: app=0x{demo.attack_app_version:08x} size={len(forged)} "
        f"crc={format_crc(crc32(forged))}"
    )

    with ExitStack() as stack:
        if fake_availability:
            vendor = VendorServer.without_update(channel.host)
            attack: Attack = FakeAvailability(
                UpdateManifest.for_firmware(demo.attack_app_version, "", forged), forged
            )
        else:
            vendor = VendorServer.offering(demo.official_app_version, official, channel.host)
            attack = SwapFirmware(forged)
        stack.enter_context(vendor)
        interceptor = stack.enter_context(
            Interceptor(vendor.url, attack, channel.host, timeout=channel.timeout_seconds)
        )
        device = TrackerDevice(demo.installed_app_version, demo.installed_boot_version, policy)
        tracker = stack.enter_context(TrackerNode(device, channel.host))

        offered = "nothing" if fake_availability else f"app v{demo.official_app_version}"
        note(f"vendor server {vendor.url} offering {offered}")
        note(f"interceptor {interceptor.url} attack={type(attack).__name__}")
        note(
            f"tracker {tracker.host}:{tracker.port} installed "
            f"app={demo.installed_app_version} boot={demo.installed_boot_version}"
        )

        sync = pcd_sync(
            interceptor.url, tracker.address, channel.chunk_size, channel.timeout_seconds
        )
        state = device.state

    if sync.manifest is not None:
        note(f"pcd manifest: {sync.manifest.to_json().decode()}")
    note(f"pcd relayed {sync.bytes_sent} bytes in {sync.chunks_sent} chunks")
    note(f"pcd sync: {sync.summary()}")
    note(
        f"tracker {state.phase.value}: app={state.installed_app_version} "
        f"(0x{state.installed_app_version:08x}) boot={state.installed_boot_version}"
    )
    met = _expected(countermeasure, sync, state, config)
    expected = "rejection" if countermeasure else "installation of forged firmware"
    note(f"expected {expected}: {'yes' if met else 'NO'}")
    return DemoResult(countermeasure, fake_availability, lines, sync, state, met)
