# Base exception classes
class IoTBotError(Exception):
    """Base exception for all iotbot-sampler errors."""
    exit_code = 1


class ConstraintViolation(IoTBotError):
    """Raised when sampling frequencies break a schedule constraint.

    The failing :class:`ConstraintReport` is kept on ``report`` so callers can
    print every predicate with its measured value.
    """
    exit_code = 1

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class InfeasibleSchedule(ConstraintViolation):
    """Raised when per-slot caps or the coverage period cannot be met."""
    exit_code = 1


class SlotOutOfRange(IoTBotError, IndexError):
    """Raised when a slot index falls outside a schedule's horizon."""
    exit_code = 1


class ConfigurationError(IoTBotError):
    """Raised when there's a problem with configuration."""
    exit_code = 2


class TraceFormatError(IoTBotError):
    """Raised when a trace file or packet stream cannot be parsed."""
    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsortedStreamError(TraceFormatError):
    """Raised when packet slots regress within a stream."""
    exit_code = 2
