"""Experiment parameters; defaults reproduce the published numerical setup."""

from dataclasses import dataclass, replace
from typing import Any, Optional, Tuple

from iotbot_sampler.errors import ConfigurationError
from iotbot_sampler.sampling import SamplingFrequencies
from iotbot_sampler.simulation import AttackModel
from iotbot_sampler.traffic import DeviceInventory, build_inventory

DEFAULT_F_V_GRID: Tuple[float, ...] = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
DEFAULT_F_NV_GRID: Tuple[float, ...] = (0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05)
DEFAULT_P1_VALUES: Tuple[float, ...] = (0.5, 0.7, 0.9)
DEFAULT_P2_VALUES: Tuple[float, ...] = (0.1, 0.2, 0.3)


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of a simulation run.

    ``alpha`` (cost per unit of average detection delay) is carried through to
    reports but never drives a computation.
    """
    n_devices: int = 100
    vulnerable_fraction: float = 0.40
    packets_per_device: int = 100_000
    n_v_max: int = 40
    n_nv_max: int = 80
    f_max: float = 0.5
    window_packets: int = 50
    mean_scan_interarrival: float = 3386.0
    f_v: float = 0.2
    f_nv: float = 0.025
    p1: float = 0.6
    p2: float = 0.2
    n_trials: int = 100
    seed: int = 1
    alpha: float = 1.0
    buffer_capacity: int = 1
    deep_match: bool = False
    coverage_period: Optional[int] = None
    f_v_grid: Tuple[float, ...] = DEFAULT_F_V_GRID
    f_nv_grid: Tuple[float, ...] = DEFAULT_F_NV_GRID
    p1_values: Tuple[float, ...] = DEFAULT_P1_VALUES
    p2_values: Tuple[float, ...] = DEFAULT_P2_VALUES

    def __post_init__(self):
        positive = ("n_devices", "packets_per_device", "n_v_max", "n_nv_max", "window_packets",
                    "n_trials", "buffer_capacity")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if not 0.0 <= self.vulnerable_fraction <= 1.0:
            raise ConfigurationError(
                f"vulnerable_fraction must lie in [0, 1], got {self.vulnerable_fraction}")
        if not self.mean_scan_interarrival > 0:
            raise ConfigurationError(
                f"mean_scan_interarrival must be positive, got {self.mean_scan_interarrival}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        for name in ("f_v_grid", "f_nv_grid", "p1_values", "p2_values"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must list at least one value")

    @property
    def n_slots(self) -> int:
        return self.packets_per_device

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with the non-``None`` overrides applied."""
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def inventory(self) -> DeviceInventory:
        return build_inventory(self.n_devices, self.vulnerable_fraction)

    def frequencies(self, f_v: Optional[float] = None, f_nv: Optional[float] = None) -> SamplingFrequencies:
        return SamplingFrequencies(
            f_v=self.f_v if f_v is None else f_v,
            f_nv=self.f_nv if f_nv is None else f_nv,
            f_max=self.f_max,
            n_v_max=self.n_v_max,
            n_nv_max=self.n_nv_max,
            coverage_period=self.coverage_period,
        )

    def attack_model(self, p1: Optional[float] = None, p2: Optional[float] = None) -> AttackModel:
        return AttackModel(
            p1=self.p1 if p1 is None else p1,
            p2=self.p2 if p2 is None else p2,
            window_packets=self.window_packets,
            mean_scan_interarrival=self.mean_scan_interarrival,
        )
