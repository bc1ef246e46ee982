"""Server-advertised firmware availability record."""

import json
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from trackerfw.firmware.checksum import crc32, format_crc


class UpdateManifest(BaseModel):
    """Answer to ``GET /manifest``.

    Wire form: ``{"available":bool,"firmware_version":u32,"url":string,
    "size":u64,"checksum":"0x%08x"}``; an unavailable manifest is just
    ``{"available":false}``.
    """

    model_config = ConfigDict(frozen=True)

    available: bool = False
    firmware_version: int = Field(default=0, ge=0, le=0xFFFFFFFF)
    url: str = ""
    size: int = Field(default=0, ge=0, le=0xFFFFFFFFFFFFFFFF)
    checksum: int = Field(default=0, ge=0, le=0xFFFFFFFF)

    @field_validator("checksum", mode="before")
    @classmethod
    def _parse_checksum(cls, value: Any) -> Any:
        if isinstance(value, str):
            return int(value, 16)
        return value

    @model_validator(mode="after")
    def _unavailable_has_no_url(self) -> "UpdateManifest":
        if not self.available and self.url:
            raise ValueError("an unavailable manifest must not carry a URL")
        return self

    @classmethod
    def unavailable(cls) -> "UpdateManifest":
        return cls()

    @classmethod
    def for_firmware(cls, firmware_version: int, url: str, firmware: bytes) -> "UpdateManifest":
        """Manifest advertising ``firmware`` with size and CRC-32 filled in."""
        return cls(
            available=True,
            firmware_version=firmware_version,
            url=url,
            size=len(firmware),
            checksum=crc32(firmware),
        )

    def describing(self, firmware: bytes) -> "UpdateManifest":
        """Copy with size and checksum rewritten to match ``firmware``."""
        return self.model_copy(update={"size": len(firmware), "checksum": crc32(firmware)})

    def to_document(self) -> dict[str, Any]:
        if not self.available:
            return {"available": False}
        return {
            "available": True,
            "firmware_version": self.firmware_version,
            "url": self.url,
            "size": self.size,
            "checksum": format_crc(self.checksum),
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_document(), separators=(",", ":")).encode()

    @classmethod
    def from_json(cls, data: bytes | str) -> "UpdateManifest":
        return cls.model_validate(json.loads(data))
