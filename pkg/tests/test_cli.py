"""Tests for the ``fw`` command line."""

import argparse
import json
import struct
from pathlib import Path

import pytest

from trackerfw.cli.main import EXIT_FAILURE, auto_int, build_parser, main
from trackerfw.firmware.checksum import crc32
from trackerfw.firmware.container import ImageId, parse_update

GOLDEN = Path(__file__).parent / "golden"

APP = b"APP-IMAGE-16BYTE"
BOOT = b"BOOT-8B\x00"


def unsigned_update() -> bytes:
    """AFW1 file with every checksum left at zero."""
    header = struct.pack("<HH", 1, 44)
    header += struct.pack("<HHIIII", ImageId.APP, 0, 48, len(APP), 0, 2)
    header += struct.pack("<HHIIII", ImageId.BOOT, 0, 48 + len(APP), len(BOOT), 0, 1)
    return header + struct.pack("<I", 0) + APP + BOOT


def pointer_blob() -> bytes:
    """Two strings referenced three times when loaded at 0x2000."""
    words = struct.pack("<4I", 0x2010, 0x2020, 0x2010, 0)
    return words + b"boot loader\x00" + bytes(4) + b"radio init\x00" + bytes(1)


def golden(name: str) -> str:
    return (GOLDEN / name).read_text()


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path: Path, monkeypatch):
    """Run every command away from the repository's config.yaml."""
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def unsigned_file(tmp_path: Path) -> Path:
    path = tmp_path / "unsigned.afw"
    path.write_bytes(unsigned_update())
    return path


@pytest.fixture
def blob_file(tmp_path: Path) -> Path:
    path = tmp_path / "blob.bin"
    path.write_bytes(pointer_blob())
    return path


class TestGoldenOutput:
    """Test stdout of the read-only commands byte for byte."""

    def test_inspect(self, unsigned_file: Path, capsys):
        """Test the header table in file order."""
        assert main(["inspect", str(unsigned_file)]) == 0
        assert capsys.readouterr().out == golden("inspect.txt")

    def test_crc(self, tmp_path: Path, capsys):
        """Test the CRC-32 check value."""
        path = tmp_path / "check.txt"
        path.write_bytes(b"123456789")

        assert main(["crc", str(path)]) == 0
        assert capsys.readouterr().out == golden("crc.txt")

    def test_verify_unsigned(self, unsigned_file: Path, capsys):
        """Test a rejected file prints its cause and exits 1."""
        assert main(["verify", str(unsigned_file)]) == 1
        assert capsys.readouterr().out == golden("verify-unsigned.txt")

    def test_verify_after_resign(self, unsigned_file: Path, tmp_path: Path, capsys):
        """Test resign makes the file acceptable."""
        resigned = tmp_path / "resigned.afw"
        assert main(["resign", str(unsigned_file), "-o", str(resigned)]) == 0
        capsys.readouterr()

        assert main(["verify", str(resigned)]) == 0
        assert capsys.readouterr().out == golden("verify-resigned.txt")

    def test_strings(self, blob_file: Path, capsys):
        """Test detected strings with their offsets."""
        assert main(["strings", str(blob_file)]) == 0
        assert capsys.readouterr().out == golden("strings.txt")

    def test_scan_base(self, blob_file: Path, capsys):
        """Test ranking over a small candidate range."""
        argv = ["scan-base", str(blob_file), "--start", "0", "--end", "0x4000"]
        argv += ["--stride", "0x1000", "--top", "4"]

        assert main(argv) == 0
        assert capsys.readouterr().out == golden("scan-base.txt")

    def test_vote_base(self, blob_file: Path, capsys):
        """Test voting with a low threshold."""
        assert main(["vote-base", str(blob_file), "--min-votes", "3"]) == 0
        assert capsys.readouterr().out == golden("vote-base.txt")


class TestFirmwareCommands:
    """Tests for pack, unpack, patch and verify."""

    def test_pack_unpack(self, tmp_path: Path, capsys):
        """Test images survive pack then unpack."""
        (tmp_path / "app.bin").write_bytes(APP)
        (tmp_path / "boot.bin").write_bytes(BOOT)
        update = tmp_path / "packed.afw"

        argv = ["pack", "app.bin", "boot.bin", "--app-version", "0x10", "--boot-version", "3"]
        assert main(argv + ["-o", str(update)]) == 0
        assert main(["verify", str(update)]) == 0
        assert main(["unpack", str(update), "-o", "out"]) == 0

        assert (tmp_path / "out" / "app.bin").read_bytes() == APP
        assert (tmp_path / "out" / "boot.bin").read_bytes() == BOOT
        assert "ACCEPT app=16 boot=3" in capsys.readouterr().out

    def test_patch_without_resign_is_rejected(self, unsigned_file: Path, tmp_path: Path):
        """Test a patched file fails verification until resigned."""
        signed = tmp_path / "signed.afw"
        patched = tmp_path / "patched.afw"
        main(["resign", str(unsigned_file), "-o", str(signed)])

        argv = ["patch", str(signed), "--image", "app", "--write", "0", "41424344"]
        assert main(argv + ["-o", str(patched)]) == 0
        assert main(["verify", str(patched)]) == 1

        assert main(argv + ["--resign", "-o", str(patched)]) == 0
        assert main(["verify", str(patched)]) == 0
        assert parse_update(patched.read_bytes()).app_payload.startswith(b"ABCD")

    def test_patch_version(self, unsigned_file: Path, tmp_path: Path, capsys):
        """Test --set-version with --resign."""
        patched = tmp_path / "patched.afw"
        argv = ["patch", str(unsigned_file), "--image", "app", "--set-version", "0xdeadbeef"]

        assert main(argv + ["--resign", "-o", str(patched)]) == 0
        assert main(["verify", str(patched)]) == 0
        assert "ACCEPT app=3735928559 boot=1" in capsys.readouterr().out

    def test_patch_nothing(self, unsigned_file: Path, capsys):
        """Test patch without a change is an error."""
        assert main(["patch", str(unsigned_file), "--image", "boot", "-o", "x.afw"]) == EXIT_FAILURE
        assert "nothing to patch" in capsys.readouterr().err

    def test_patch_out_of_range(self, unsigned_file: Path):
        """Test a write past the payload end."""
        argv = ["patch", str(unsigned_file), "--image", "boot", "--write", "6", "aabbcc"]

        assert main(argv + ["-o", "x.afw"]) == EXIT_FAILURE
        assert not Path("x.afw").exists()

    def test_verify_json(self, unsigned_file: Path, capsys):
        """Test the machine-readable report."""
        main(["verify", str(unsigned_file), "--json"])

        report = json.loads(capsys.readouterr().out)
        assert report == {"verdict": "REJECT", "cause": "TableChecksumMismatch"}

    def test_inspect_json(self, unsigned_file: Path, capsys):
        """Test the machine-readable header table."""
        main(["inspect", str(unsigned_file), "--json"])

        table = json.loads(capsys.readouterr().out)
        assert [image["name"] for image in table["images"]] == ["app", "boot"]

    def test_malformed_file(self, tmp_path: Path, capsys):
        """Test a file too short for a header."""
        path = tmp_path / "short.afw"
        path.write_bytes(b"AFW")

        assert main(["inspect", str(path)]) == EXIT_FAILURE
        assert "error:" in capsys.readouterr().err

    def test_missing_file(self):
        """Test a path that does not exist."""
        assert main(["crc", "absent.bin"]) == EXIT_FAILURE


class TestMacCommands:
    """Tests for fw mac attach / verify."""

    def test_exit_codes(self, unsigned_file: Path, tmp_path: Path, mac_key: bytes, capsys):
        """Test 0 valid, 1 missing, 2 mismatch."""
        key = tmp_path / "key.hex"
        other = tmp_path / "other.hex"
        key.write_text(mac_key.hex() + "\n")
        other.write_text(bytes(32).hex())
        tagged = tmp_path / "tagged.afw"

        attach = ["mac", "attach", str(unsigned_file), "--key", str(key), "-o", str(tagged)]
        assert main(attach) == 0
        assert main(["mac", "verify", str(tagged), "--key", str(key)]) == 0
        assert main(["mac", "verify", str(unsigned_file), "--key", str(key)]) == 1
        assert main(["mac", "verify", str(tagged), "--key", str(other)]) == 2

        lines = capsys.readouterr().out.splitlines()
        assert lines[-3:] == ["Valid", "Missing", "Mismatch"]

    def test_verify_with_mac_key(self, unsigned_file: Path, tmp_path: Path, key_file: Path):
        """Test verify --mac-key requires the trailer."""
        resigned = tmp_path / "resigned.afw"
        tagged = tmp_path / "tagged.afw"
        main(["resign", str(unsigned_file), "-o", str(resigned)])
        main(["mac", "attach", str(resigned), "--key", str(key_file), "-o", str(tagged)])

        assert main(["verify", str(resigned), "--mac-key", str(key_file)]) == 1
        assert main(["verify", str(tagged), "--mac-key", str(key_file)]) == 0
        assert main(["verify", str(tagged)]) == 0

    def test_bad_key_file(self, unsigned_file: Path, tmp_path: Path):
        """Test a key that is not 32 bytes of hex."""
        key = tmp_path / "key.hex"
        key.write_text("abcd")

        assert main(["mac", "verify", str(unsigned_file), "--key", str(key)]) == EXIT_FAILURE


class TestAnalysisCommands:
    """Tests for gen-fixture and analyze."""

    def test_gen_fixture_truth(self, tmp_path: Path):
        """Test the blob and its ground-truth record."""
        argv = ["gen-fixture", "--seed", "5", "--base", "0x20000"]

        assert main(argv + ["--truth", "truth.json", "-o", "blob.bin"]) == 0

        truth = json.loads((tmp_path / "truth.json").read_text())
        assert len((tmp_path / "blob.bin").read_bytes()) == 8192
        assert truth["base"] == "0x00020000"

    def test_gen_fixture_deterministic(self, tmp_path: Path):
        """Test the same seed gives the same bytes."""
        main(["gen-fixture", "--seed", "5", "-o", "a.bin"])
        main(["gen-fixture", "--seed", "5", "-o", "b.bin"])

        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()

    def test_analyze_update(self, tmp_path: Path, capsys):
        """Test both bases are resolved for a generated update."""
        assert main(["gen-fixture", "--update", "--seed", "3", "-o", "update.afw"]) == 0
        assert main(["verify", "update.afw"]) == 0
        capsys.readouterr()

        assert main(["analyze", "update.afw", "--json"]) == 0

        results = {result["image"]: result for result in json.loads(capsys.readouterr().out)}
        assert results["app"]["base"] == "0x00018000"
        assert results["boot"]["base"] == "0x0003ac00"

    def test_stripped_update_unresolved(self, tmp_path: Path, capsys):
        """Test analyze exits 1 when strings were stripped."""
        main(["gen-fixture", "--update", "--strip-strings", "--seed", "3", "-o", "update.afw"])

        assert main(["analyze", "update.afw"]) == 1
        assert "unresolved" in capsys.readouterr().out

    def test_vote_unresolved(self, blob_file: Path, capsys):
        """Test the default threshold is not met by three votes."""
        assert main(["vote-base", str(blob_file)]) == 1
        assert capsys.readouterr().out == "unresolved\n"

    def test_empty_scan_range(self, blob_file: Path):
        """Test an empty candidate range is an error."""
        assert main(["scan-base", str(blob_file), "--start", "0x1000", "--end", "0x1000"]) == 3


@pytest.mark.integration
class TestDemoCommand:
    """Tests for fw demo attack."""

    def test_attack(self, capsys):
        """Test the attack succeeds without a countermeasure."""
        assert main(["demo", "attack", "--seed", "4"]) == 0

        out = capsys.readouterr().out.splitlines()
        assert out[-1] == "PASS"
        assert any("0xdeadbeef" in line for line in out)

    def test_countermeasure(self, capsys):
        """Test the MAC countermeasure blocks the install."""
        assert main(["demo", "attack", "--countermeasure", "mac", "--fake-availability"]) == 0
        assert capsys.readouterr().out.splitlines()[-1] == "PASS"


class TestParser:
    """Tests for argument parsing."""

    def test_auto_int(self):
        """Test integer literals in any base."""
        assert auto_int("0x1000") == auto_int("4096") == auto_int("0o10000")

    def test_command_required(self):
        """Test argparse exits 2 without a command."""
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([])
        assert exc.value.code == 2

    def test_image_choices(self):
        """Test --image only accepts known images."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["patch", "f", "--image", "radio", "-o", "x"])

    def test_every_option_has_help(self):
        """Test --help documents every argument of every command."""
        missing = []
        pending = [("fw", build_parser())]
        while pending:
            name, parser = pending.pop()
            for action in parser._actions:
                if isinstance(action, argparse._SubParsersAction):
                    for choice in action._choices_actions:
                        if not choice.help:
                            missing.append(f"{name} {choice.dest}")
                    pending.extend((f"{name} {sub}", p) for sub, p in action.choices.items())
                elif not action.help:
                    missing.append(f"{name} {action.dest}")

        assert missing == []

    def test_config_file(self, temp_config_file: Path, blob_file: Path):
        """Test --config supplies analysis defaults."""
        assert main(["--config", str(temp_config_file), "vote-base", str(blob_file)]) == 1


def test_crc_matches_library(tmp_path: Path, capsys):
    """Test fw crc agrees with crc32 on arbitrary data."""
    data = bytes(range(256)) * 3
    (tmp_path / "data.bin").write_bytes(data)

    main(["crc", "data.bin"])

    assert capsys.readouterr().out.strip() == f"0x{crc32(data):08x}"
