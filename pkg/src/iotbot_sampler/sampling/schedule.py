"""
Two-dimensional (time x device) sampling schedule.

A schedule is a read-only boolean matrix with one row per slot and one column
per inventory device; ``True`` means the device's current packet is inspected
in that slot. Construction is class-separated round-robin: each class keeps a
pointer into its members (ascending id) that advances ``f * |class|`` places per
slot, and a slot samples the members the pointer passes over. Per-slot counts
therefore alternate between the floor and ceiling of ``f * |class|``, each
device is visited once per rotation of ``1 / f`` slots, and consecutive member
blocks are staggered across consecutive slots.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Iterator, Optional, Tuple

import numpy as np

from iotbot_sampler.errors import (
    ConfigurationError,
    ConstraintViolation,
    InfeasibleSchedule,
    SlotOutOfRange,
)
from iotbot_sampler.traffic import DeviceClass, DeviceId, DeviceInventory

log = logging.getLogger(__name__)

# Frequencies are snapped to the nearest fraction with at most this denominator
MAX_RATE_DENOMINATOR = 10**6


@dataclass(frozen=True)
class SamplingFrequencies:
    """Per-class sampling frequencies and the resource bounds they must respect.

    ``coverage_period`` is the window (in slots) within which every device must
    be sampled; ``None`` derives it from the frequencies.
    """
    f_v: float
    f_nv: float
    f_max: float = 0.5
    n_v_max: int = 40
    n_nv_max: int = 80
    coverage_period: Optional[int] = None

    def __post_init__(self):
        for name in ("f_v", "f_nv", "f_max"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {value}")
        for name in ("n_v_max", "n_nv_max"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.coverage_period is not None and self.coverage_period < 1:
            raise ConfigurationError(f"coverage_period must be positive, got {self.coverage_period}")

    def for_class(self, device_class: DeviceClass) -> float:
        return self.f_v if device_class is DeviceClass.VULNERABLE else self.f_nv

    def cap_for_class(self, device_class: DeviceClass) -> int:
        return self.n_v_max if device_class is DeviceClass.VULNERABLE else self.n_nv_max


@dataclass(frozen=True)
class ConstraintCheck:
    """Outcome of one static schedule constraint."""
    number: int
    name: str
    expression: str
    measured: float
    bound: float
    holds: bool

    def describe(self) -> str:
        verdict = "holds" if self.holds else "VIOLATED"
        return (f"constraint {self.number} ({self.name}): {self.expression} "
                f"with measured {self.measured:g} against {self.bound:g} {verdict}")


@dataclass(frozen=True)
class ConstraintReport:
    checks: Tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(check.holds for check in self.checks)

    @property
    def failures(self) -> Tuple[ConstraintCheck, ...]:
        return tuple(check for check in self.checks if not check.holds)

    def __iter__(self) -> Iterator[ConstraintCheck]:
        return iter(self.checks)


def exact_frequency(frequency: float) -> Fraction:
    """Rational form of a float frequency, so 0.15000000000000002 becomes 3/20."""
    return Fraction(frequency).limit_denominator(MAX_RATE_DENOMINATOR)


def per_slot_demand(frequency: float, n_members: int) -> int:
    """Largest number of class members the rotation samples in one slot."""
    return math.ceil(exact_frequency(frequency) * n_members)


def validate_constraints(inv: DeviceInventory, freq: SamplingFrequencies) -> ConstraintReport:
    """Evaluate the four static constraints of a frequency pair against an inventory.

    Coverage is a property of a built schedule; see :func:`check_coverage`.
    """
    budget = inv.rho_v * freq.f_v + inv.rho_nv * freq.f_nv
    demand_v = per_slot_demand(freq.f_v, len(inv.vulnerable))
    demand_nv = per_slot_demand(freq.f_nv, len(inv.non_vulnerable))
    checks = (
        ConstraintCheck(1, "class order", "f_v > f_nv",
                        freq.f_v, freq.f_nv, freq.f_v > freq.f_nv),
        ConstraintCheck(2, "sampling budget", "rho_v*f_v + rho_nv*f_nv < f_max",
                        budget, freq.f_max, budget < freq.f_max),
        ConstraintCheck(3, "vulnerable cap", "vulnerable devices per slot <= N_v_max",
                        demand_v, freq.n_v_max, demand_v <= freq.n_v_max),
        ConstraintCheck(4, "non-vulnerable cap", "non-vulnerable devices per slot <= N_nv_max",
                        demand_nv, freq.n_nv_max, demand_nv <= freq.n_nv_max),
    )
    return ConstraintReport(checks)


def derive_coverage_period(inv: DeviceInventory, freq: SamplingFrequencies) -> int:
    """Smallest window in which both class rotations visit every member."""
    periods = [
        math.ceil(1 / exact_frequency(freq.for_class(device_class)))
        for device_class in DeviceClass
        if inv.members(device_class)
    ]
    return max(periods, default=1)


@dataclass(frozen=True, eq=False)
class SamplingSchedule:
    """The sampling matrix together with the inputs that produced it."""
    matrix: np.ndarray
    inventory: DeviceInventory
    frequencies: SamplingFrequencies
    coverage_period: int

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.inventory):
            raise ConfigurationError(
                f"sampling matrix shape {self.matrix.shape} does not match "
                f"{len(self.inventory)} inventory devices")
        self.matrix.setflags(write=False)
        object.__setattr__(self, "_ids", np.asarray(self.inventory.ids, dtype=np.int64))

    @property
    def n_slots(self) -> int:
        return self.matrix.shape[0]

    def devices_sampled_at(self, t: int) -> FrozenSet[DeviceId]:
        """Devices whose current packet is inspected at slot ``t``."""
        if not 0 <= t < self.n_slots:
            raise SlotOutOfRange(f"slot {t} outside schedule horizon [0, {self.n_slots})")
        return frozenset(DeviceId(int(device)) for device in self._ids[self.matrix[t]])

    def sampled_slots(self, device: DeviceId) -> np.ndarray:
        return np.flatnonzero(self.matrix[:, self.inventory.column_of(device)])

    def class_counts(self, device_class: DeviceClass) -> np.ndarray:
        """Per-slot number of sampled devices of one class."""
        columns = [self.inventory.column_of(device) for device in self.inventory.members(device_class)]
        if not columns:
            return np.zeros(self.n_slots, dtype=np.int64)
        return self.matrix[:, columns].sum(axis=1)

    def sampling_rate(self, device: DeviceId, window: Optional[int] = None) -> float:
        """Empirical fraction of slots in which ``device`` is sampled.

        With ``window`` the rate is taken over the first ``window`` slots only.
        """
        column = self.matrix[:window, self.inventory.column_of(device)]
        return float(column.mean()) if column.size else 0.0

    def max_unsampled_run(self) -> np.ndarray:
        """Longest run of consecutive unsampled slots for every device column."""
        runs = np.empty(self.matrix.shape[1], dtype=np.int64)
        for column in range(self.matrix.shape[1]):
            hits = np.flatnonzero(self.matrix[:, column])
            edges = np.concatenate(([-1], hits, [self.n_slots]))
            runs[column] = int((np.diff(edges) - 1).max())
        return runs

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Slot and device id arrays of every sampled entry, slot-major."""
        slots, columns = np.nonzero(self.matrix)
        return slots, self._ids[columns]


def check_coverage(sched: SamplingSchedule) -> bool:
    """True iff every window of ``coverage_period`` consecutive slots samples every device.

    All sliding windows are checked: a device is uncovered exactly when some
    run of its unsampled slots is at least one period long.
    """
    if sched.n_slots < sched.coverage_period:
        return False
    if len(sched.inventory) == 0:
        return True
    return bool((sched.max_unsampled_run() < sched.coverage_period).all())


def _rotation(n_members: int, frequency: float, n_slots: int) -> Tuple[np.ndarray, np.ndarray]:
    """Slots and member positions visited by one class pointer.

    Slot ``t`` covers pointer positions ``[floor(t*r), floor((t+1)*r))`` where
    ``r = frequency * n_members``; position ``x`` lands in slot
    ``ceil((x+1)/r) - 1`` and names member ``x mod n_members``.
    """
    rate = exact_frequency(frequency) * n_members
    a, b = rate.numerator, rate.denominator
    positions = np.arange((n_slots * a) // b, dtype=np.int64)
    slots = ((positions + 1) * b + a - 1) // a - 1
    return slots, positions % n_members


def build_staggered_schedule(inv: DeviceInventory, freq: SamplingFrequencies, n_slots: int,
                             *, enforce_constraints: bool = True) -> SamplingSchedule:
    """Build the staggered round-robin schedule for ``n_slots`` slots.

    Args:
        inv: Devices and their classes; matrix columns follow inventory order.
        freq: Class frequencies and bounds.
        n_slots: Horizon length; must cover at least one coverage period.
        enforce_constraints: Reject frequencies that fail a static constraint.
            Full-sampling experiments turn this off to allow ``f_v == f_nv == 1``.

    Raises:
        ConstraintViolation: class order or budget constraint fails.
        InfeasibleSchedule: a per-slot cap fails, or the coverage period
            (override or horizon) is too short.
    """
    if enforce_constraints:
        report = validate_constraints(inv, freq)
        if not report.ok:
            failed = ", ".join(f"constraint {check.number} ({check.name})" for check in report.failures)
            error = InfeasibleSchedule if all(check.number >= 3 for check in report.failures) \
                else ConstraintViolation
            raise error(f"sampling frequencies violate {failed}", report)

    derived = derive_coverage_period(inv, freq)
    period = derived
    if freq.coverage_period is not None:
        if freq.coverage_period < derived:
            raise InfeasibleSchedule(
                f"coverage period {freq.coverage_period} is shorter than the {derived} slots "
                f"a full rotation needs at f_v={freq.f_v}, f_nv={freq.f_nv}")
        period = freq.coverage_period
    if n_slots < period:
        raise InfeasibleSchedule(f"horizon of {n_slots} slots is shorter than coverage period {period}")

    matrix = np.zeros((n_slots, len(inv)), dtype=bool)
    for device_class in DeviceClass:
        members = inv.members(device_class)
        if not members:
            continue
        columns = np.asarray([inv.column_of(device) for device in members], dtype=np.int64)
        slots, member_positions = _rotation(len(members), freq.for_class(device_class), n_slots)
        matrix[slots, columns[member_positions]] = True

    log.info("built %d-slot schedule for %d devices (f_v=%g, f_nv=%g, coverage period %d)",
             n_slots, len(inv), freq.f_v, freq.f_nv, period)
    return SamplingSchedule(matrix, inv, freq, period)
