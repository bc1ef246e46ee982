"""Loopback reconstruction of the firmware update channel.

Vendor server and interceptor speak plain HTTP/1.1; the PCD relays firmware
to the tracker node in 20-byte chunks over a framed TCP protocol that
stands in for BLE.
"""
