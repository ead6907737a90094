"""
iotbot_sampler.traffic

Domain types for devices and packets, and the Mirai TELNET scan-signature predicate.
"""

from .model import (
    MAX_PORT,
    TELNET_PORTS,
    DeviceClass,
    DeviceId,
    DeviceInventory,
    PacketRecord,
    TcpFlags,
    build_inventory,
    is_scan_packet,
)

__all__ = [
    "MAX_PORT",
    "TELNET_PORTS",
    "DeviceClass",
    "DeviceId",
    "DeviceInventory",
    "PacketRecord",
    "TcpFlags",
    "build_inventory",
    "is_scan_packet",
]
