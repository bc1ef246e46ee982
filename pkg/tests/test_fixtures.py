"""Unit tests for the synthetic firmware generator."""

import struct

import pytest

from trackerfw.analysis.baseaddr import detect_strings
from trackerfw.analysis.fixtures import build_fixture_update, gen_fixture
from trackerfw.errors import DoesNotFitError
from trackerfw.firmware.container import FirmwareUpdate, ImageId, serialize_update
from trackerfw.firmware.verify import VerifyPolicy, verify


class TestGenFixture:
    """Tests for gen_fixture."""

    def test_deterministic(self):
        """Test the same seed gives the same blob and truth."""
        first = gen_fixture(1, 30, 40, 0x20000, 4096)
        second = gen_fixture(1, 30, 40, 0x20000, 4096)

        assert first == second

    def test_seed_changes_blob(self):
        """Test different seeds differ."""
        assert gen_fixture(1, 30, 40, 0x20000, 4096)[0] != gen_fixture(2, 30, 40, 0x20000, 4096)[0]

    def test_truth_record(self):
        """Test references are aligned and point at planted string starts."""
        blob, truth = gen_fixture(3, 30, 40, 0x20000, 4096)

        assert len(blob) == 4096
        assert truth.base == 0x20000
        assert len(truth.string_offsets) == 30
        assert len(truth.reference_offsets) == 40
        for slot in truth.reference_offsets:
            assert slot % 4 == 0
            (word,) = struct.unpack_from("<I", blob, slot)
            assert word - truth.base in truth.string_offsets

    def test_planted_strings_detected(self):
        """Test detect_strings reports exactly the planted strings."""
        blob, truth = gen_fixture(4, 35, 50, 0x8000, 8192)

        assert tuple(s.offset for s in detect_strings(blob)) == truth.string_offsets

    def test_strip(self):
        """Test stripped fixtures keep the pointers but lose the strings."""
        plain, _ = gen_fixture(5, 30, 40, 0x20000, 4096)
        blob, truth = gen_fixture(5, 30, 40, 0x20000, 4096, strip=True)

        assert truth.stripped
        assert detect_strings(blob) == []
        for offset, length in zip(truth.string_offsets, truth.string_lengths):
            assert blob[offset : offset + length] == bytes(length)
        for slot in truth.reference_offsets:
            assert blob[slot : slot + 4] == plain[slot : slot + 4]

    def test_empty(self):
        """Test a blob with nothing planted."""
        blob, truth = gen_fixture(6, 0, 0, 0, 64)

        assert len(blob) == 64
        assert detect_strings(blob) == []
        assert truth.string_offsets == ()

    def test_does_not_fit(self):
        """Test content larger than the blob."""
        with pytest.raises(DoesNotFitError):
            gen_fixture(7, 40, 60, 0x18000, 256)

    def test_references_need_strings(self):
        """Test references without strings."""
        with pytest.raises(DoesNotFitError):
            gen_fixture(8, 0, 5, 0x18000, 4096)

    def test_address_overflow(self):
        """Test a base that pushes string addresses past 32 bits."""
        with pytest.raises(DoesNotFitError):
            gen_fixture(9, 10, 10, 0xFFFFFFF0, 4096)

    def test_to_dict(self):
        """Test the JSON ground-truth record."""
        _, truth = gen_fixture(10, 3, 2, 0x3AC00, 512)
        record = truth.to_dict()

        assert record["base"] == "0x0003ac00"
        assert record["seed"] == 10
        assert len(record["string_offsets"]) == 3


class TestBuildFixtureUpdate:
    """Tests for build_fixture_update."""

    def test_valid_update(
        self, fixture_update: tuple[FirmwareUpdate, dict[ImageId, object]]
    ):
        """Test the generated update verifies and carries the requested versions."""
        update, _ = fixture_update
        report = verify(serialize_update(update), VerifyPolicy.checksum_only())

        assert report.installed_versions == (2, 1)
        assert len(update.app_payload) == 8192
        assert len(update.boot_payload) == 2048

    def test_images_at_different_bases(self):
        """Test each image gets its own ground truth."""
        _, truths = build_fixture_update(3, app_base=0x10000, boot_base=0x2F0C4)

        assert truths[ImageId.APP].base == 0x10000
        assert truths[ImageId.BOOT].base == 0x2F0C4
        assert len(truths[ImageId.APP].reference_offsets) == 60
        assert len(truths[ImageId.BOOT].reference_offsets) == 25

    def test_deterministic(self):
        """Test the same seed gives the same file."""
        first, _ = build_fixture_update(21)
        second, _ = build_fixture_update(21)

        assert serialize_update(first) == serialize_update(second)
