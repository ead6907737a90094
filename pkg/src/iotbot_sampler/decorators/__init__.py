"""
iotbot_sampler.decorators

This module exposes the error-handling decorator used by every command-line entry point,
together with the helpers that turn exceptions into structured results and exit codes.
"""

from .handle_error import handle_error, get_error, report_error

__all__ = [
    # Decorators
    "handle_error",
    # Error Functions
    "get_error",
    "report_error",]
