"""
iotbot_sampler.errors

This module defines custom exception classes for the bot detection engine and simulator.
All error classes inherit from the base `IoTBotError`, which carries the process exit code
the command-line surface reports: 1 for constraint and validation failures, 2 for
configuration, I/O and trace parse failures.
"""

from .detection_errors import (
    IoTBotError,
    ConfigurationError,
    ConstraintViolation,
    InfeasibleSchedule,
    SlotOutOfRange,
    TraceFormatError,
    UnsortedStreamError,
)

__all__ = [
    "IoTBotError",
    "ConfigurationError",
    "ConstraintViolation",
    "InfeasibleSchedule",
    "SlotOutOfRange",
    "TraceFormatError",
    "UnsortedStreamError",
]
