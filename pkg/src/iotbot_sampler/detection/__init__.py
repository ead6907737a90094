"""
iotbot_sampler.detection

The sub-sampled bot detection loop, its matrix-level equivalent, and detection reports.
"""

from .detector import BotDetector, DeviceBuffer, detect_from_matrices, run_detection
from .report import DetectionReport, DeviceVerdict

__all__ = [
    "BotDetector",
    "DeviceBuffer",
    "DetectionReport",
    "DeviceVerdict",
    "detect_from_matrices",
    "run_detection",
]
