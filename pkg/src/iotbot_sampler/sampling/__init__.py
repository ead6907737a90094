"""
iotbot_sampler.sampling

Construction and validation of the time x device sampling schedule.
"""

from .schedule import (
    ConstraintCheck,
    ConstraintReport,
    SamplingFrequencies,
    SamplingSchedule,
    build_staggered_schedule,
    check_coverage,
    derive_coverage_period,
    exact_frequency,
    per_slot_demand,
    validate_constraints,
)

__all__ = [
    "ConstraintCheck",
    "ConstraintReport",
    "SamplingFrequencies",
    "SamplingSchedule",
    "build_staggered_schedule",
    "check_coverage",
    "derive_coverage_period",
    "exact_frequency",
    "per_slot_demand",
    "validate_constraints",
]
