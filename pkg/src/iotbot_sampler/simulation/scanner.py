"""
Ground-truth generation for Monte Carlo trials.

A trial picks the attacked set with a per-window Bernoulli model, places scan
packets for every attacked device as a slotted Poisson process, and can render
the result as a per-device, per-slot packet stream in which every slot that is
not a scan carries benign streaming traffic.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from iotbot_sampler.errors import ConfigurationError
from iotbot_sampler.traffic import (
    DeviceClass,
    DeviceId,
    DeviceInventory,
    PacketRecord,
    TcpFlags,
)

from .seeding import trial_streams

log = logging.getLogger(__name__)

# Scanner port mix observed on the testbed: ~90% to 23, the rest to 2323
PRIMARY_TELNET_PORT = 23
ALTERNATE_TELNET_PORT = 2323
PRIMARY_PORT_SHARE = 0.9

# Benign filler is streaming data to an ephemeral port
BENIGN_FLAGS = TcpFlags.PSH | TcpFlags.ACK
BENIGN_PORT_BASE = 49152
BENIGN_PORT_SPAN = 16384

# Rows rendered per vectorised chunk when streaming packets
RENDER_CHUNK_SLOTS = 4096


@dataclass(frozen=True)
class AttackModel:
    """Infection and scanning parameters of a trial.

    ``mean_scan_interarrival`` is the mean gap, in slots, between consecutive
    scan packets of one bot.
    """
    p1: float = 0.6
    p2: float = 0.2
    window_packets: int = 50
    mean_scan_interarrival: float = 3386.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if self.window_packets < 1:
            raise ConfigurationError(f"window_packets must be positive, got {self.window_packets}")
        if not self.mean_scan_interarrival > 0:
            raise ConfigurationError(
                f"mean_scan_interarrival must be positive, got {self.mean_scan_interarrival}")
        if self.p2 > self.p1:
            log.warning("non-vulnerable attack probability p2=%g exceeds vulnerable p1=%g",
                        self.p2, self.p1)

    def probability_for(self, device_class: DeviceClass) -> float:
        return self.p1 if device_class is DeviceClass.VULNERABLE else self.p2


class AttackSet(NamedTuple):
    """Attacked devices and the slot at which each starts scanning."""
    members: FrozenSet[DeviceId]
    infection_slot: Dict[DeviceId, int]


@dataclass(frozen=True, eq=False)
class ScanningMatrix:
    """Which device emitted a scan packet at which slot.

    Scan slots are stored sparsely per attacked device; :meth:`as_matrix`
    expands them to a slots x devices boolean matrix in inventory column order,
    the same orientation as a sampling matrix.
    """
    n_slots: int
    inventory: DeviceInventory
    attack: AttackSet
    scan_slots: Dict[DeviceId, np.ndarray]
    rng_seed: int

    @property
    def attacked_set(self) -> FrozenSet[DeviceId]:
        return self.attack.members

    @property
    def infection_slot(self) -> Dict[DeviceId, int]:
        return self.attack.infection_slot

    def slots_of(self, device: DeviceId) -> np.ndarray:
        return self.scan_slots.get(device, np.empty(0, dtype=np.int64))

    def first_scan_slot(self, device: DeviceId) -> Optional[int]:
        slots = self.slots_of(device)
        return int(slots[0]) if slots.size else None

    def row(self, device: DeviceId) -> np.ndarray:
        """Boolean scan sequence of one device across the horizon."""
        sequence = np.zeros(self.n_slots, dtype=bool)
        sequence[self.slots_of(device)] = True
        return sequence

    def as_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.n_slots, len(self.inventory)), dtype=bool)
        for device, slots in self.scan_slots.items():
            matrix[slots, self.inventory.column_of(device)] = True
        return matrix

    @property
    def n_scans(self) -> int:
        return int(sum(slots.size for slots in self.scan_slots.values()))

    def events(self) -> Iterator[Tuple[int, DeviceId]]:
        """(slot, device) for every scan packet, slot-major then inventory order."""
        order = sorted(
            (int(slot), self.inventory.column_of(device), device)
            for device, slots in self.scan_slots.items()
            for slot in slots
        )
        for slot, _, device in order:
            yield slot, device


def sample_attack_set(inv: DeviceInventory, model: AttackModel, n_slots: int,
                      rng_seed: int) -> AttackSet:
    """Choose the attacked set.

    Each device is tried once per window of ``window_packets`` slots with its
    class probability until the first success; the start slot of that window is
    its infection slot.
    """
    if n_slots < model.window_packets:
        raise ConfigurationError(
            f"horizon of {n_slots} slots is shorter than one attack window ({model.window_packets})")
    rng = trial_streams(rng_seed).attack
    n_windows = math.ceil(n_slots / model.window_packets)
    probabilities = np.array([model.probability_for(cls) for _, cls in inv], dtype=float)
    hits = rng.random((len(inv), n_windows)) < probabilities[:, None]

    infected = hits.any(axis=1)
    first_window = hits.argmax(axis=1)
    infection_slot = {
        device: int(first_window[column]) * model.window_packets
        for column, device in enumerate(inv.ids)
        if infected[column]
    }
    return AttackSet(frozenset(infection_slot), infection_slot)


def scan_gaps(rng: np.random.Generator, mean: float, size: int) -> np.ndarray:
    """Exponential inter-arrival gaps rounded to whole slots, at least one slot each."""
    return np.maximum(1, np.rint(rng.exponential(mean, size=size))).astype(np.int64)


def _arrival_slots(rng: np.random.Generator, start: int, n_slots: int, mean: float) -> np.ndarray:
    horizon = n_slots - start
    chunk = int(1.5 * horizon / mean) + 16
    pieces: List[np.ndarray] = []
    reached = start
    while reached < n_slots:
        slots = reached + np.cumsum(scan_gaps(rng, mean, chunk))
        pieces.append(slots)
        reached = int(slots[-1])
    arrivals = np.concatenate(pieces)
    return arrivals[arrivals < n_slots]


def generate_scanning_matrix(inv: DeviceInventory, model: AttackModel, n_slots: int,
                             rng_seed: int) -> ScanningMatrix:
    """Sample the attacked set and place each bot's scan packets.

    Scans of an attacked device arrive one gap after another from its infection
    slot onward; gaps past the horizon are discarded, so a late infection may
    leave a bot without any scan in the horizon.
    """
    attack = sample_attack_set(inv, model, n_slots, rng_seed)
    rng = trial_streams(rng_seed).arrivals
    scan_slots: Dict[DeviceId, np.ndarray] = {}
    for device in inv.ids:
        if device in attack.infection_slot:
            scan_slots[device] = _arrival_slots(
                rng, attack.infection_slot[device], n_slots, model.mean_scan_interarrival)

    matrix = ScanningMatrix(n_slots, inv, attack, scan_slots, rng_seed)
    log.debug("seed %d: %d attacked devices, %d scan packets", rng_seed,
              len(attack.members), matrix.n_scans)
    return matrix


def scan_ports(scan: ScanningMatrix) -> Dict[DeviceId, np.ndarray]:
    """Destination port of every scan packet, aligned with ``scan.scan_slots``."""
    rng = trial_streams(scan.rng_seed).ports
    ports: Dict[DeviceId, np.ndarray] = {}
    for device in scan.inventory.ids:
        slots = scan.slots_of(device)
        if slots.size:
            primary = rng.random(slots.size) < PRIMARY_PORT_SHARE
            ports[device] = np.where(primary, PRIMARY_TELNET_PORT, ALTERNATE_TELNET_PORT)
    return ports


def benign_port(device: DeviceId) -> int:
    return BENIGN_PORT_BASE + int(device) % BENIGN_PORT_SPAN


@dataclass(frozen=True)
class PacketColumns:
    """Column arrays of rendered packets for a block of slots, slot-major."""
    slot: np.ndarray
    device: np.ndarray
    is_tcp: np.ndarray
    tcp_flags: np.ndarray
    dst_port: np.ndarray

    def __len__(self) -> int:
        return int(self.slot.size)

    def records(self) -> Iterator[PacketRecord]:
        for slot, device, is_tcp, flags, port in zip(
                self.slot.tolist(), self.device.tolist(), self.is_tcp.tolist(),
                self.tcp_flags.tolist(), self.dst_port.tolist()):
            yield PacketRecord(slot, DeviceId(device), is_tcp, TcpFlags(flags), port)


def render_packet_columns(scan: ScanningMatrix, inv: DeviceInventory,
                          chunk_slots: int = RENDER_CHUNK_SLOTS) -> Iterator[PacketColumns]:
    """Render the full per-device, per-slot packet stream in blocks of slots."""
    ids = np.asarray(inv.ids, dtype=np.int64)
    n_devices = ids.size
    benign_ports = np.asarray([benign_port(device) for device in inv.ids], dtype=np.int64)
    ports = scan_ports(scan)
    scan_rows = np.concatenate([scan.slots_of(d) for d in inv.ids] or [np.empty(0, np.int64)])
    scan_cols = np.concatenate([np.full(scan.slots_of(d).size, inv.column_of(d), np.int64)
                                for d in inv.ids] or [np.empty(0, np.int64)])
    scan_dst = np.concatenate([ports.get(d, np.empty(0, np.int64)) for d in inv.ids]
                              or [np.empty(0, np.int64)])

    for start in range(0, scan.n_slots, chunk_slots):
        stop = min(start + chunk_slots, scan.n_slots)
        height = stop - start
        dst_port = np.tile(benign_ports, height).reshape(height, n_devices)
        flags = np.full((height, n_devices), BENIGN_FLAGS.value, dtype=np.int64)
        in_block = (scan_rows >= start) & (scan_rows < stop)
        rows = scan_rows[in_block] - start
        cols = scan_cols[in_block]
        dst_port[rows, cols] = scan_dst[in_block]
        flags[rows, cols] = TcpFlags.SYN.value
        yield PacketColumns(
            slot=np.repeat(np.arange(start, stop, dtype=np.int64), n_devices),
            device=np.tile(ids, height),
            is_tcp=np.ones(height * n_devices, dtype=bool),
            tcp_flags=flags.ravel(),
            dst_port=dst_port.ravel(),
        )


def render_packet_stream(scan: ScanningMatrix, inv: DeviceInventory) -> Iterator[PacketRecord]:
    """One packet per device per slot: a TELNET SYN probe where the device scans, streaming data elsewhere."""
    for block in render_packet_columns(scan, inv):
        yield from block.records()


# Benign archetypes of the labelled corpus
_STREAM, _ARP, _OTHER_SYN, _SYN_ACK = range(4)
_COMMON_SERVICE_PORTS = np.array([22, 53, 80, 443, 554, 1883, 5683, 8080, 8443], dtype=np.int64)


def synthetic_corpus(n_records: int, scan_fraction: float = 0.5,
                     seed: int = 0) -> Tuple[List[PacketRecord], np.ndarray]:
    """Labelled mix of scan probes and benign packets.

    Benign packets are streaming TCP data, ARP-like non-TCP frames, SYNs to
    non-TELNET service ports and SYN+ACK replies sent from a TELNET service.

    Returns:
        The records and a boolean array marking the scan probes.
    """
    if not 0.0 <= scan_fraction <= 1.0:
        raise ConfigurationError(f"scan_fraction must lie in [0, 1], got {scan_fraction}")
    rng = np.random.default_rng(seed)
    is_scan = rng.random(n_records) < scan_fraction
    kind = rng.integers(0, 4, size=n_records)
    device = rng.integers(0, 1000, size=n_records)
    telnet = np.where(rng.random(n_records) < PRIMARY_PORT_SHARE,
                      PRIMARY_TELNET_PORT, ALTERNATE_TELNET_PORT)
    service = rng.choice(_COMMON_SERVICE_PORTS, size=n_records)
    ephemeral = rng.integers(BENIGN_PORT_BASE, BENIGN_PORT_BASE + BENIGN_PORT_SPAN, size=n_records)

    records: List[PacketRecord] = []
    for i in range(n_records):
        dev = DeviceId(int(device[i]))
        if is_scan[i]:
            records.append(PacketRecord(i, dev, True, TcpFlags.SYN, int(telnet[i])))
        elif kind[i] == _STREAM:
            records.append(PacketRecord(i, dev, True, BENIGN_FLAGS, int(ephemeral[i])))
        elif kind[i] == _ARP:
            records.append(PacketRecord(i, dev, False, TcpFlags.NONE, 0))
        elif kind[i] == _OTHER_SYN:
            records.append(PacketRecord(i, dev, True, TcpFlags.SYN, int(service[i])))
        else:
            records.append(PacketRecord(i, dev, True, TcpFlags.SYN | TcpFlags.ACK, int(telnet[i])))
    return records, is_scan
