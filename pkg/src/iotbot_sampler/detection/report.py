"""Per-device detection verdicts and their aggregation helpers."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from iotbot_sampler.traffic import DeviceClass, DeviceId


@dataclass(frozen=True)
class DeviceVerdict:
    """Detection outcome for one device.

    ``infected`` and ``first_scan_slot`` are ``None`` when the run had no
    ground truth.
    """
    device: DeviceId
    device_class: DeviceClass
    flagged: bool
    detection_slot: Optional[int] = None
    infected: Optional[bool] = None
    first_scan_slot: Optional[int] = None

    @property
    def detection_delay(self) -> Optional[int]:
        if self.detection_slot is None or self.first_scan_slot is None:
            return None
        return self.detection_slot - self.first_scan_slot

    @property
    def missed(self) -> bool:
        """Infected per ground truth but never flagged within the horizon."""
        return bool(self.infected) and not self.flagged


@dataclass(frozen=True)
class DetectionReport:
    verdicts: Tuple[DeviceVerdict, ...]
    metadata: Mapping[str, Any] = field(default_factory=dict)
    malformed_packets: int = 0

    @property
    def has_ground_truth(self) -> bool:
        return any(verdict.infected is not None for verdict in self.verdicts)

    def verdict(self, device: DeviceId) -> DeviceVerdict:
        for verdict in self.verdicts:
            if verdict.device == device:
                return verdict
        raise KeyError(device)

    def select(self, device_class: Optional[DeviceClass] = None) -> List[DeviceVerdict]:
        return [v for v in self.verdicts if device_class is None or v.device_class is device_class]

    def flagged(self, device_class: Optional[DeviceClass] = None) -> List[DeviceVerdict]:
        return [v for v in self.select(device_class) if v.flagged]

    def missed(self, device_class: Optional[DeviceClass] = None) -> List[DeviceVerdict]:
        return [v for v in self.select(device_class) if v.missed]

    def infected(self, device_class: Optional[DeviceClass] = None) -> List[DeviceVerdict]:
        return [v for v in self.select(device_class) if v.infected]

    def detection_slots(self) -> Dict[DeviceId, int]:
        return {v.device: v.detection_slot for v in self.verdicts if v.detection_slot is not None}

    def delays(self, device_class: Optional[DeviceClass] = None) -> List[int]:
        return [v.detection_delay for v in self.select(device_class) if v.detection_delay is not None]

    def mean_delay(self, device_class: Optional[DeviceClass] = None) -> Optional[float]:
        """Average delay over detected devices; ``None`` when nothing was detected."""
        delays = self.delays(device_class)
        return sum(delays) / len(delays) if delays else None
