"""Main CLI interface: the ``fw`` command."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable

from rich.logging import RichHandler

from trackerfw import __version__
from trackerfw.analysis.baseaddr import (
    analyze_update,
    detect_strings,
    estimate_base,
    vote_base,
)
from trackerfw.analysis.fixtures import build_fixture_update, gen_fixture
from trackerfw.channel.demo import run_attack_demo
from trackerfw.cli.output import (
    emit,
    emit_error,
    emit_json,
    emit_lines,
    err_console,
    header_lines,
    printable,
    transcript_lines,
)
from trackerfw.config.loader import Config, load_config_or_defaults
from trackerfw.errors import ChannelError, FirmwareError
from trackerfw.firmware.checksum import crc32, format_crc
from trackerfw.firmware.container import (
    ImageId,
    build_update,
    describe,
    parse_update,
    serialize_update,
    to_dict,
    unpack_images,
)
from trackerfw.firmware.mac import attach_mac, read_key_file, verify_mac
from trackerfw.firmware.patch import patch_bytes, resign, set_version
from trackerfw.firmware.verify import VerifyPolicy, verify

logger = logging.getLogger(__name__)

EXIT_FAILURE = 3

Handler = Callable[[argparse.Namespace, Config], int]


def setup_logging(level: str = "WARNING") -> None:
    """Set up logging with Rich handler on stderr.

    Args:
        level: Logging level.
    """
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, rich_tracebacks=True)],
        force=True,
    )


def auto_int(text: str) -> int:
    """Integer in any Python literal base (``4096``, ``0x1000``, ``0o10000``)."""
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}") from None


def _pick(value: int | None, default: int) -> int:
    return default if value is None else value


def _write(path: str, data: bytes) -> None:
    Path(path).write_bytes(data)
    emit(f"wrote {path} ({len(data)} bytes)")


def cmd_inspect(args: argparse.Namespace, config: Config) -> int:
    update = parse_update(Path(args.file).read_bytes())
    if args.json:
        emit_json(to_dict(update))
    else:
        emit_lines(header_lines(describe(update)))
    return 0


def cmd_crc(args: argparse.Namespace, config: Config) -> int:
    emit(format_crc(crc32(Path(args.file).read_bytes())))
    return 0


def cmd_verify(args: argparse.Namespace, config: Config) -> int:
    if args.mac_key:
        policy = VerifyPolicy.with_mac(read_key_file(args.mac_key))
    else:
        policy = VerifyPolicy.checksum_only()
    report = verify(Path(args.file).read_bytes(), policy)
    if args.json:
        emit_json(report.to_dict())
    else:
        emit(report.summary())
    return 0 if report.accepted else 1


def cmd_patch(args: argparse.Namespace, config: Config) -> int:
    if args.set_version is None and args.write is None:
        raise ValueError("nothing to patch: give --set-version and/or --write")
    which = ImageId.from_label(args.image)
    update = parse_update(Path(args.file).read_bytes())
    if args.set_version is not None:
        update = set_version(update, which, args.set_version)
    if args.write is not None:
        offset, data = args.write
        patch = bytes.fromhex(data.removeprefix("0x"))
        update = patch_bytes(update, which, int(offset, 0), patch)
    if args.resign:
        update = resign(update)
    _write(args.output, serialize_update(update))
    return 0


def cmd_resign(args: argparse.Namespace, config: Config) -> int:
    update = resign(parse_update(Path(args.file).read_bytes()))
    _write(args.output, serialize_update(update))
    return 0


def cmd_strings(args: argparse.Namespace, config: Config) -> int:
    blob = Path(args.file).read_bytes()
    for found in detect_strings(blob, _pick(args.min_len, config.analysis.min_len)):
        emit(f"0x{found.offset:08x}  {printable(blob[found.offset : found.end])}")
    return 0


def cmd_scan_base(args: argparse.Namespace, config: Config) -> int:
    analysis = config.analysis
    ranked = estimate_base(
        Path(args.file).read_bytes(),
        start=_pick(args.start, analysis.scan_start),
        end=_pick(args.end, analysis.scan_end),
        stride=_pick(args.stride, analysis.stride),
        min_len=_pick(args.min_len, analysis.min_len),
        workers=_pick(args.workers, analysis.workers),
    )
    top = ranked[: _pick(args.top, analysis.top)]
    if args.json:
        emit_json([candidate.to_dict() for candidate in top])
    else:
        emit_lines(candidate.format() for candidate in top)
    return 0


def cmd_vote_base(args: argparse.Namespace, config: Config) -> int:
    voted = vote_base(
        Path(args.file).read_bytes(),
        min_len=_pick(args.min_len, config.analysis.min_len),
        min_votes=_pick(args.min_votes, config.analysis.min_votes),
    )
    if voted is None:
        emit("unresolved")
        return 1
    base, votes = voted
    emit(f"0x{base:08x}  score={votes}")
    return 0


def cmd_analyze(args: argparse.Namespace, config: Config) -> int:
    analysis = config.analysis
    results = analyze_update(
        parse_update(Path(args.file).read_bytes()),
        start=analysis.scan_start,
        end=analysis.scan_end,
        stride=analysis.stride,
        min_len=analysis.min_len,
        min_votes=analysis.min_votes,
    )
    if args.json:
        emit_json([result.to_dict() for result in results])
    else:
        emit_lines(result.format() for result in results)
    return 0 if all(result.base is not None for result in results) else 1


def cmd_mac_attach(args: argparse.Namespace, config: Config) -> int:
    tagged = attach_mac(Path(args.file).read_bytes(), read_key_file(args.key))
    _write(args.output, tagged)
    return 0


def cmd_mac_verify(args: argparse.Namespace, config: Config) -> int:
    status = verify_mac(Path(args.file).read_bytes(), read_key_file(args.key))
    emit(status.value)
    return status.exit_code


def cmd_demo_attack(args: argparse.Namespace, config: Config) -> int:
    result = run_attack_demo(
        config,
        countermeasure=args.countermeasure == "mac",
        fake_availability=args.fake_availability,
        seed=args.seed,
    )
    emit_lines(transcript_lines(result.transcript, result.expected_outcome_met))
    return 0 if result.expected_outcome_met else 1


def cmd_gen_fixture(args: argparse.Namespace, config: Config) -> int:
    truth: dict[str, Any]
    if args.update:
        update, truths = build_fixture_update(
            args.seed, app_base=args.base, app_size=args.size, strip=args.strip_strings
        )
        data = serialize_update(update)
        truth = {which.label: record.to_dict() for which, record in truths.items()}
    else:
        data, record = gen_fixture(
            args.seed, args.strings, args.refs, args.base, args.size, strip=args.strip_strings
        )
        truth = record.to_dict()
    _write(args.output, data)
    if args.truth:
        Path(args.truth).write_text(json.dumps(truth, indent=2) + "\n")
        emit(f"wrote {args.truth}")
    return 0


def cmd_pack(args: argparse.Namespace, config: Config) -> int:
    update = build_update(
        Path(args.app).read_bytes(),
        Path(args.boot).read_bytes(),
        args.app_version,
        args.boot_version,
    )
    _write(args.output, serialize_update(update))
    return 0


def cmd_unpack(args: argparse.Namespace, config: Config) -> int:
    app, boot = unpack_images(parse_update(Path(args.file).read_bytes()))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write(str(out / "app.bin"), app)
    _write(str(out / "boot.bin"), boot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    """Parser for every ``fw`` command; each subparser sets ``handler``."""
    parser = argparse.ArgumentParser(
        prog="fw", description="Inspect, patch, verify and authenticate AFW1 firmware updates."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="Settings file (default: ./config.yaml if present)")
    parser.add_argument("--log-level", help="Override logging.level (DEBUG, INFO, ...)")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name: str, handler: Handler | None, help: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help, description=help)
        if handler is not None:
            sub.set_defaults(handler=handler)
        return sub

    sub = command("inspect", cmd_inspect, "Print the header table in file order.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("--json", action="store_true", help="Machine-readable output")

    sub = command("crc", cmd_crc, "Print the CRC-32 of a file.")
    sub.add_argument("file", help="Input file")

    sub = command("verify", cmd_verify, "Run the device checks; exit 0 accept, 1 reject.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("--mac-key", metavar="HEXFILE", help="Also require a valid MAC trailer")
    sub.add_argument("--json", action="store_true", help="Machine-readable output")

    sub = command("patch", cmd_patch, "Change a version field or payload bytes of one image.")
    sub.add_argument("file", help="Input file")
    sub.add_argument(
        "--image",
        required=True,
        choices=[which.label for which in ImageId],
        help="Image to patch",
    )
    sub.add_argument("--set-version", type=auto_int, metavar="U32", help="New version field")
    sub.add_argument(
        "--write", nargs=2, metavar=("OFFSET", "HEXBYTES"), help="Overwrite bytes in the payload"
    )
    sub.add_argument("--resign", action="store_true", help="Recompute checksums after patching")
    sub.add_argument("-o", "--output", required=True, help="Output file")

    sub = command("resign", cmd_resign, "Recompute the image and table checksums.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("-o", "--output", required=True, help="Output file")

    sub = command("strings", cmd_strings, "List NUL-terminated printable strings of a blob.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("--min-len", type=auto_int, help="Shortest string counted")

    sub = command("scan-base", cmd_scan_base, "Rank candidate load addresses of a blob.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("--start", type=auto_int, help="First candidate base")
    sub.add_argument("--end", type=auto_int, help="Last candidate base")
    sub.add_argument("--stride", type=auto_int, help="Step between candidates")
    sub.add_argument("--top", type=auto_int, help="Number of candidates printed")
    sub.add_argument("--min-len", type=auto_int, help="Shortest string counted")
    sub.add_argument("--workers", type=auto_int, help="Threads used to score candidates")
    sub.add_argument("--json", action="store_true", help="Machine-readable output")

    sub = command(
        "vote-base",
        cmd_vote_base,
        "Estimate an unaligned load address by voting; slow on large images.",
    )
    sub.add_argument("file", help="Input file")
    sub.add_argument("--min-votes", type=auto_int, help="Fewest votes for a result")
    sub.add_argument("--min-len", type=auto_int, help="Shortest string counted")

    sub = command("analyze", cmd_analyze, "Resolve the load address of both images of an update.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("--json", action="store_true", help="Machine-readable output")

    mac = command("mac", None, "Attach or check a MAC trailer.")
    mac_commands = mac.add_subparsers(dest="mac_command", required=True, metavar="ACTION")
    sub = mac_commands.add_parser("attach", help="Append a MAC trailer")
    sub.set_defaults(handler=cmd_mac_attach)
    sub.add_argument("file", help="Input file")
    sub.add_argument("--key", required=True, metavar="HEXFILE", help="32-byte key as hex")
    sub.add_argument("-o", "--output", required=True, help="Output file")
    sub = mac_commands.add_parser("verify", help="Exit 0 valid, 1 missing, 2 mismatch")
    sub.set_defaults(handler=cmd_mac_verify)
    sub.add_argument("file", help="Input file")
    sub.add_argument("--key", required=True, metavar="HEXFILE", help="32-byte key as hex")

    demo = command("demo", None, "Run the update-channel simulation.")
    demo_commands = demo.add_subparsers(dest="demo_command", required=True, metavar="SCENARIO")
    sub = demo_commands.add_parser("attack", help="Inject resigned firmware through the PCD")
    sub.set_defaults(handler=cmd_demo_attack)
    sub.add_argument("--countermeasure", choices=["mac"], help="Make the tracker require a MAC")
    sub.add_argument(
        "--fake-availability", action="store_true", help="Vendor offers no update; fake one"
    )
    sub.add_argument("--seed", type=auto_int, help="Override demo.seed")

    sub = command("gen-fixture", cmd_gen_fixture, "Generate a synthetic firmware blob.")
    sub.add_argument("--seed", type=auto_int, default=0, help="Random seed")
    sub.add_argument("--strings", type=auto_int, default=40, help="Strings to plant")
    sub.add_argument("--refs", type=auto_int, default=60, help="Pointers to plant")
    sub.add_argument("--base", type=auto_int, default=0x00018000, help="Load address")
    sub.add_argument("--size", type=auto_int, default=8192, help="Image size in bytes")
    sub.add_argument("--strip-strings", action="store_true", help="Zero the planted strings")
    sub.add_argument(
        "--update",
        action="store_true",
        help="Emit an AFW1 file: app image at --base/--size, bootloader at its own base",
    )
    sub.add_argument("--truth", metavar="JSON", help="Write the ground-truth record here")
    sub.add_argument("-o", "--output", required=True, help="Output file")

    sub = command("pack", cmd_pack, "Wrap two images into an AFW1 update.")
    sub.add_argument("app", help="Application image")
    sub.add_argument("boot", help="Bootloader image")
    sub.add_argument("--app-version", type=auto_int, required=True, help="Application version")
    sub.add_argument("--boot-version", type=auto_int, required=True, help="Bootloader version")
    sub.add_argument("-o", "--output", required=True, help="Output file")

    sub = command("unpack", cmd_unpack, "Write app.bin and boot.bin from an update.")
    sub.add_argument("file", help="Input file")
    sub.add_argument("-o", "--output", required=True, metavar="DIR", help="Output directory")

    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config_or_defaults(args.config)
        setup_logging(args.log_level or config.logging.level)
        return args.handler(args, config)
    except (FirmwareError, ChannelError, OSError, ValueError) as e:
        logger.debug("Command failed", exc_info=True)
        emit_error(str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
