"""
Packet and device value types plus the TELNET scan-signature predicate.

Time is slotted: one packet per device per slot, and a slot index doubles as
the "packets elapsed" clock every delay in the project is measured in.
"""

from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from enum import Enum, Flag
from functools import cached_property
from typing import Dict, FrozenSet, Iterator, NewType, Tuple

from iotbot_sampler.errors import ConfigurationError

DeviceId = NewType("DeviceId", int)

# Destination ports probed by Mirai-family scanners
TELNET_PORTS: FrozenSet[int] = frozenset({23, 2323})
MAX_PORT = 65535


class DeviceClass(Enum):
    """Infection-risk class of an IoT device; the value is its trace-file code."""
    VULNERABLE = "V"
    NON_VULNERABLE = "N"

    @classmethod
    def from_code(cls, code: str) -> "DeviceClass":
        try:
            return cls(code.strip().upper())
        except ValueError:
            raise ValueError(f"unknown device class {code!r} (expected V or N)") from None


class TcpFlags(Flag):
    """TCP control bits; trace files spell them as letters, e.g. ``S``, ``SA``, ``PA``."""
    NONE = 0
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20

    @classmethod
    def parse(cls, letters: str) -> "TcpFlags":
        """Parse a letter set such as ``SA``; ``-`` or an empty string means no flags."""
        text = letters.strip().upper()
        flags = cls.NONE
        if text in ("", "-"):
            return flags
        for letter in text:
            try:
                flags |= _LETTER_TO_FLAG[letter]
            except KeyError:
                raise ValueError(f"unknown TCP flag letter {letter!r} in {letters!r}") from None
        return flags

    def letters(self) -> str:
        """Canonical letter spelling in SAPFRU order, ``-`` when empty."""
        text = "".join(letter for letter, flag in _LETTER_TO_FLAG.items() if flag in self)
        return text or "-"


_LETTER_TO_FLAG: Dict[str, TcpFlags] = {
    "S": TcpFlags.SYN,
    "A": TcpFlags.ACK,
    "P": TcpFlags.PSH,
    "F": TcpFlags.FIN,
    "R": TcpFlags.RST,
    "U": TcpFlags.URG,
}


@dataclass(frozen=True, slots=True)
class PacketRecord:
    """Metadata of one observed packet."""
    slot: int
    device: DeviceId
    is_tcp: bool
    tcp_flags: TcpFlags
    dst_port: int

    @property
    def is_well_formed(self) -> bool:
        if self.slot < 0 or self.device < 0:
            return False
        if not 0 <= self.dst_port <= MAX_PORT:
            return False
        # flags only carry meaning on TCP
        return self.is_tcp or self.tcp_flags == TcpFlags.NONE


def is_scan_packet(pkt: PacketRecord) -> bool:
    """True for a TCP SYN probe (ACK clear) to TELNET port 23 or 2323."""
    if not pkt.is_tcp:
        return False
    flags = pkt.tcp_flags
    return TcpFlags.SYN in flags and TcpFlags.ACK not in flags and pkt.dst_port in TELNET_PORTS


@dataclass(frozen=True)
class DeviceInventory:
    """The monitored device set with one class label per device.

    ``devices`` keeps inventory order, which is also the column order of every
    sampling and scanning matrix built against this inventory.
    """
    devices: Tuple[Tuple[DeviceId, DeviceClass], ...]

    def __post_init__(self):
        ids = [device for device, _ in self.devices]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("device ids must be unique within an inventory")

    def __len__(self) -> int:
        return len(self.devices)

    def __iter__(self) -> Iterator[Tuple[DeviceId, DeviceClass]]:
        return iter(self.devices)

    def __contains__(self, device: object) -> bool:
        return device in self._index

    @cached_property
    def _index(self) -> Dict[DeviceId, int]:
        return {device: column for column, (device, _) in enumerate(self.devices)}

    @cached_property
    def _classes(self) -> Dict[DeviceId, DeviceClass]:
        return dict(self.devices)

    @property
    def ids(self) -> Tuple[DeviceId, ...]:
        return tuple(device for device, _ in self.devices)

    @cached_property
    def vulnerable(self) -> Tuple[DeviceId, ...]:
        return self.members(DeviceClass.VULNERABLE)

    @cached_property
    def non_vulnerable(self) -> Tuple[DeviceId, ...]:
        return self.members(DeviceClass.NON_VULNERABLE)

    @property
    def rho_v(self) -> float:
        return len(self.vulnerable) / len(self.devices) if self.devices else 0.0

    @property
    def rho_nv(self) -> float:
        return len(self.non_vulnerable) / len(self.devices) if self.devices else 0.0

    def members(self, device_class: DeviceClass) -> Tuple[DeviceId, ...]:
        """Devices of one class, ascending by id."""
        return tuple(sorted(device for device, cls in self.devices if cls is device_class))

    def class_of(self, device: DeviceId) -> DeviceClass:
        return self._classes[device]

    def column_of(self, device: DeviceId) -> int:
        return self._index[device]


def build_inventory(n_total: int, vulnerable_fraction: float) -> DeviceInventory:
    """Create ``n_total`` devices, the lowest-numbered ones vulnerable.

    The vulnerable count is ``vulnerable_fraction * n_total`` rounded half-up,
    computed in decimal so that e.g. 0.35 * 10 yields 4 rather than 3.
    """
    if n_total < 1:
        raise ConfigurationError(f"n_total must be at least 1, got {n_total}")
    if not 0.0 <= vulnerable_fraction <= 1.0:
        raise ConfigurationError(f"vulnerable_fraction must lie in [0, 1], got {vulnerable_fraction}")

    exact = Decimal(str(vulnerable_fraction)) * n_total
    n_vulnerable = int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))
    devices = tuple(
        (DeviceId(i), DeviceClass.VULNERABLE if i < n_vulnerable else DeviceClass.NON_VULNERABLE)
        for i in range(n_total)
    )
    return DeviceInventory(devices)
