"""AFW1 firmware container, checksums, verification and the MAC countermeasure."""
