"""
Bot detection loop over a sub-sampled packet stream.

Packets are appended to per-device buffers as they arrive; after every packet
of slot ``t`` has been ingested, the devices the schedule selects for ``t``
have their current packet checked against the TELNET scan signature, and a
match flags the device for good.
"""

import logging
from collections import deque
from typing import Any, Deque, Dict, FrozenSet, Iterable, List, Mapping, Optional

import numpy as np

from iotbot_sampler.errors import ConfigurationError, UnsortedStreamError
from iotbot_sampler.sampling import SamplingSchedule
from iotbot_sampler.simulation import ScanningMatrix
from iotbot_sampler.traffic import DeviceId, PacketRecord, is_scan_packet

from .report import DetectionReport, DeviceVerdict

log = logging.getLogger(__name__)


class DeviceBuffer:
    """Bounded FIFO of one device's most recent packets; the oldest is evicted first."""

    def __init__(self, device: DeviceId, capacity: int = 1):
        if capacity < 1:
            raise ConfigurationError(f"buffer capacity must be at least 1, got {capacity}")
        self.device = device
        self.capacity = capacity
        self._packets: Deque[PacketRecord] = deque(maxlen=capacity)

    def add(self, pkt: PacketRecord) -> None:
        if pkt.device != self.device:
            raise ValueError(f"packet from device {pkt.device} offered to buffer of device {self.device}")
        self._packets.append(pkt)

    @property
    def current(self) -> Optional[PacketRecord]:
        return self._packets[-1] if self._packets else None

    def __len__(self) -> int:
        return len(self._packets)

    def __iter__(self):
        return iter(self._packets)


class BotDetector:
    """Stateful detection engine.

    Args:
        buffer_capacity: Packets retained per device.
        deep_match: Check every buffered packet of a sampled device instead of
            only its packet for the current slot.
    """

    def __init__(self, buffer_capacity: int = 1, deep_match: bool = False):
        if buffer_capacity < 1:
            raise ConfigurationError(f"buffer capacity must be at least 1, got {buffer_capacity}")
        self.buffer_capacity = buffer_capacity
        self.deep_match = deep_match
        self._buffers: Dict[DeviceId, DeviceBuffer] = {}
        self._detections: Dict[DeviceId, int] = {}
        self.malformed_packets = 0

    @property
    def devices(self) -> List[DeviceId]:
        """Devices seen so far, in order of first sight."""
        return list(self._buffers)

    @property
    def detections(self) -> Dict[DeviceId, int]:
        return dict(self._detections)

    def buffer(self, device: DeviceId) -> Optional[DeviceBuffer]:
        return self._buffers.get(device)

    def is_flagged(self, device: DeviceId) -> bool:
        return device in self._detections

    def ingest(self, pkt: PacketRecord) -> bool:
        """Buffer a packet, registering its device on first sight.

        Returns:
            False when the packet is malformed; it is counted and dropped.
        """
        if not pkt.is_well_formed:
            self.malformed_packets += 1
            log.debug("dropped malformed packet %r", pkt)
            return False
        buffer = self._buffers.get(pkt.device)
        if buffer is None:
            buffer = self._buffers[pkt.device] = DeviceBuffer(pkt.device, self.buffer_capacity)
        buffer.add(pkt)
        return True

    def step(self, t: int, sched: SamplingSchedule) -> FrozenSet[DeviceId]:
        """Inspect the devices sampled at slot ``t``; return those flagged now."""
        newly_flagged = set()
        for device in sched.devices_sampled_at(t):
            if device in self._detections:
                continue
            buffer = self._buffers.get(device)
            if buffer is None or not len(buffer):
                continue
            if self._matches(buffer, t):
                self._detections[device] = t
                newly_flagged.add(device)
        if newly_flagged:
            log.debug("slot %d: flagged %s", t, sorted(newly_flagged))
        return frozenset(newly_flagged)

    def _matches(self, buffer: DeviceBuffer, t: int) -> bool:
        if self.deep_match:
            return any(pkt.slot <= t and is_scan_packet(pkt) for pkt in buffer)
        current = buffer.current
        return current is not None and current.slot == t and is_scan_packet(current)


def _verdicts(sched: SamplingSchedule, detections: Mapping[DeviceId, int],
              ground_truth: Optional[ScanningMatrix]) -> tuple:
    verdicts = []
    for device, device_class in sched.inventory:
        infected = first_scan = None
        if ground_truth is not None:
            infected = device in ground_truth.attacked_set
            first_scan = ground_truth.first_scan_slot(device)
        verdicts.append(DeviceVerdict(
            device=device,
            device_class=device_class,
            flagged=device in detections,
            detection_slot=detections.get(device),
            infected=infected,
            first_scan_slot=first_scan,
        ))
    return tuple(verdicts)


def run_detection(stream: Iterable[PacketRecord], sched: SamplingSchedule,
                  ground_truth: Optional[ScanningMatrix] = None, *,
                  buffer_capacity: int = 1, deep_match: bool = False,
                  metadata: Optional[Mapping[str, Any]] = None) -> DetectionReport:
    """Drive ingest and step over a slot-ordered stream.

    Slot ``t`` is stepped once the stream moves past it, so every packet of a
    slot is buffered before its sampled devices are inspected.

    Raises:
        UnsortedStreamError: a packet's slot precedes an earlier packet's.
    """
    detector = BotDetector(buffer_capacity, deep_match)
    next_slot = 0
    last_slot = -1
    warned_horizon = False

    for pkt in stream:
        if not pkt.is_well_formed:
            detector.ingest(pkt)
            continue
        if pkt.slot < last_slot:
            raise UnsortedStreamError(f"slot {pkt.slot} of device {pkt.device} follows slot {last_slot}")
        if pkt.slot > last_slot:
            while next_slot < min(pkt.slot, sched.n_slots):
                detector.step(next_slot, sched)
                next_slot += 1
            last_slot = pkt.slot
        detector.ingest(pkt)
        if pkt.slot >= sched.n_slots and not warned_horizon:
            log.warning("stream runs past the %d-slot schedule; later packets are never sampled",
                        sched.n_slots)
            warned_horizon = True

    while next_slot < sched.n_slots:
        detector.step(next_slot, sched)
        next_slot += 1

    if detector.malformed_packets:
        log.warning("%d malformed packets rejected", detector.malformed_packets)
    unknown = [device for device in detector.devices if device not in sched.inventory]
    if unknown:
        log.info("%d devices outside the schedule inventory were seen and never sampled", len(unknown))

    return DetectionReport(
        verdicts=_verdicts(sched, detector.detections, ground_truth),
        metadata=dict(metadata or {}),
        malformed_packets=detector.malformed_packets,
    )


def detect_from_matrices(scan: ScanningMatrix, sched: SamplingSchedule, *,
                         buffer_capacity: int = 1, deep_match: bool = False,
                         metadata: Optional[Mapping[str, Any]] = None) -> DetectionReport:
    """Detection slots straight from the scanning and sampling matrices.

    A device is detected at the first slot where it scans and is sampled. With
    ``deep_match`` a scan at slot ``s`` stays visible until ``buffer_capacity``
    newer packets displace it, i.e. through slot ``s + buffer_capacity - 1``.
    Produces the same report as :func:`run_detection` over the rendered stream.
    """
    window = buffer_capacity if deep_match else 1
    detections: Dict[DeviceId, int] = {}
    for device in scan.attacked_set:
        if device not in sched.inventory:
            continue
        scans = scan.slots_of(device)
        scans = scans[scans < sched.n_slots]
        if not scans.size:
            continue
        sampled = sched.sampled_slots(device)
        nearest = np.searchsorted(sampled, scans)
        valid = nearest < sampled.size
        if not valid.any():
            continue
        candidates = sampled[nearest[valid]]
        candidates = candidates[candidates < scans[valid] + window]
        if candidates.size:
            detections[device] = int(candidates.min())

    return DetectionReport(
        verdicts=_verdicts(sched, detections, scan),
        metadata=dict(metadata or {}),
    )
