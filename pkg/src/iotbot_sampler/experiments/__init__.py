"""
iotbot_sampler.experiments

Monte Carlo trials, frequency sweeps and delay histograms.
"""

from .config import (
    DEFAULT_F_NV_GRID,
    DEFAULT_F_V_GRID,
    DEFAULT_P1_VALUES,
    DEFAULT_P2_VALUES,
    ExperimentConfig,
)
from .harness import (
    ENGINES,
    HISTOGRAM_COLUMNS,
    REFERENCE_MEAN_DELAY,
    SWEEP_COLUMNS,
    DelayHistogram,
    ReferenceCheck,
    SweepCell,
    SweepResult,
    TrialOutcome,
    check_reference_mean,
    delay_histogram,
    run_trial,
    sweep,
    sweep_nonvulnerable,
    sweep_vulnerable,
)

__all__ = [
    "DEFAULT_F_NV_GRID",
    "DEFAULT_F_V_GRID",
    "DEFAULT_P1_VALUES",
    "DEFAULT_P2_VALUES",
    "ENGINES",
    "HISTOGRAM_COLUMNS",
    "REFERENCE_MEAN_DELAY",
    "SWEEP_COLUMNS",
    "DelayHistogram",
    "ExperimentConfig",
    "ReferenceCheck",
    "SweepCell",
    "SweepResult",
    "TrialOutcome",
    "check_reference_mean",
    "delay_histogram",
    "run_trial",
    "sweep",
    "sweep_nonvulnerable",
    "sweep_vulnerable",
]
