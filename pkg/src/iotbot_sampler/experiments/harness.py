"""
Monte Carlo evaluation of average detection delay against sampling frequency.

Every trial runs the whole pipeline (inventory, schedule, attack set, scanning
matrix, detection) from one seed; trial ``k`` of every cell uses
``base_seed + k``. Cells average the delays of detected devices of the swept
class over all trials, and keep infected-but-undetected devices as misses.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from iotbot_sampler.detection import DetectionReport, detect_from_matrices, run_detection
from iotbot_sampler.errors import ConfigurationError, ConstraintViolation
from iotbot_sampler.sampling import SamplingFrequencies, SamplingSchedule, build_staggered_schedule
from iotbot_sampler.simulation import generate_scanning_matrix, render_packet_stream, trial_seed
from iotbot_sampler.traffic import DeviceClass, DeviceInventory

from .config import ExperimentConfig

log = logging.getLogger(__name__)

ENGINES = ("matrix", "stream")

# Reference point of the published vulnerable-class histogram
REFERENCE_MEAN_DELAY = 52.0
REFERENCE_TOLERANCE = 0.25
# Fraction of an exponential sample below its mean is 1 - 1/e
EXPONENTIAL_BELOW_MEAN = (0.55, 0.72)
DEFAULT_KNEE = 0.35

SWEEP_COLUMNS = ["class", "f", "p", "n_trials", "n_detected", "n_missed", "mean_delay", "stddev_delay"]
HISTOGRAM_COLUMNS = ["bin_lo", "bin_hi", "count"]


@lru_cache(maxsize=32)
def _cached_schedule(inv: DeviceInventory, freq: SamplingFrequencies, n_slots: int,
                     enforce_constraints: bool) -> SamplingSchedule:
    return build_staggered_schedule(inv, freq, n_slots, enforce_constraints=enforce_constraints)


def run_trial(cfg: ExperimentConfig, f_v: float, f_nv: float, p1: float, p2: float, seed: int, *,
              engine: str = "matrix", enforce_constraints: bool = True) -> DetectionReport:
    """One full pipeline execution, deterministic per seed.

    Args:
        engine: ``"matrix"`` intersects the scanning and sampling matrices;
            ``"stream"`` renders every packet and runs the detection loop.
        enforce_constraints: Passed to the schedule builder; full-sampling
            runs disable it.

    Raises:
        ConstraintViolation: the frequencies fail a schedule constraint.
    """
    if engine not in ENGINES:
        raise ConfigurationError(f"unknown detection engine {engine!r}; choose from {ENGINES}")
    inv = cfg.inventory()
    sched = _cached_schedule(inv, cfg.frequencies(f_v, f_nv), cfg.n_slots, enforce_constraints)
    model = cfg.attack_model(p1, p2)
    scan = generate_scanning_matrix(inv, model, cfg.n_slots, seed)
    metadata = {
        "f_v": f_v, "f_nv": f_nv, "p1": p1, "p2": p2, "seed": seed,
        "alpha": cfg.alpha, "mean_scan_interarrival": cfg.mean_scan_interarrival,
        "engine": engine,
    }
    if engine == "stream":
        return run_detection(render_packet_stream(scan, inv), sched, scan,
                             buffer_capacity=cfg.buffer_capacity, deep_match=cfg.deep_match,
                             metadata=metadata)
    return detect_from_matrices(scan, sched, buffer_capacity=cfg.buffer_capacity,
                                deep_match=cfg.deep_match, metadata=metadata)


@dataclass(frozen=True)
class TrialOutcome:
    delays: Tuple[int, ...]
    n_detected: int
    n_missed: int


def _class_outcome(report: DetectionReport, device_class: DeviceClass) -> TrialOutcome:
    detected = [v for v in report.infected(device_class) if v.flagged]
    return TrialOutcome(
        delays=tuple(report.delays(device_class)),
        n_detected=len(detected),
        n_missed=len(report.missed(device_class)),
    )


def _trial_job(args) -> TrialOutcome:
    cfg, device_class, f_v, f_nv, p1, p2, seed = args
    return _class_outcome(run_trial(cfg, f_v, f_nv, p1, p2, seed), device_class)


def _run_trials(cfg: ExperimentConfig, device_class: DeviceClass, f_v: float, f_nv: float,
                p1: float, p2: float, n_trials: int, workers: int) -> List[TrialOutcome]:
    jobs = [(cfg, device_class, f_v, f_nv, p1, p2, trial_seed(cfg.seed, k)) for k in range(n_trials)]
    if workers <= 1:
        return [_trial_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map keeps trial order, so the reduction is independent of scheduling
        return list(executor.map(_trial_job, jobs, chunksize=max(1, n_trials // (4 * workers))))


@dataclass(frozen=True, eq=False)
class SweepCell:
    """Aggregate over all trials of one (frequency, attack probability) pair."""
    device_class: DeviceClass
    f: float
    p: float
    n_trials: int
    n_detected: int
    n_missed: int
    delays: np.ndarray = field(repr=False)

    @property
    def mean_delay(self) -> Optional[float]:
        return float(self.delays.mean()) if self.delays.size else None

    @property
    def stddev_delay(self) -> Optional[float]:
        if not self.delays.size:
            return None
        return float(self.delays.std(ddof=1)) if self.delays.size > 1 else 0.0

    @property
    def miss_rate(self) -> Optional[float]:
        infected = self.n_detected + self.n_missed
        return self.n_missed / infected if infected else None


def _aggregate(device_class: DeviceClass, f: float, p: float,
               outcomes: Sequence[TrialOutcome]) -> SweepCell:
    delays = [delay for outcome in outcomes for delay in outcome.delays]
    return SweepCell(
        device_class=device_class,
        f=f,
        p=p,
        n_trials=len(outcomes),
        n_detected=sum(outcome.n_detected for outcome in outcomes),
        n_missed=sum(outcome.n_missed for outcome in outcomes),
        delays=np.asarray(delays, dtype=np.int64),
    )


@dataclass
class SweepResult:
    axis: DeviceClass
    cells: List[SweepCell] = field(default_factory=list)
    skipped: List[Tuple[float, float, str]] = field(default_factory=list)

    def probabilities(self) -> List[float]:
        return sorted({cell.p for cell in self.cells})

    def curve(self, p: float) -> List[SweepCell]:
        """Cells of one attack probability with a defined mean, ascending in frequency."""
        return sorted((c for c in self.cells if c.p == p and c.mean_delay is not None), key=lambda c: c.f)

    def frame(self) -> pd.DataFrame:
        rows = [{
            "class": cell.device_class.value,
            "f": cell.f,
            "p": cell.p,
            "n_trials": cell.n_trials,
            "n_detected": cell.n_detected,
            "n_missed": cell.n_missed,
            "mean_delay": cell.mean_delay,
            "stddev_delay": cell.stddev_delay,
        } for cell in self.cells]
        return pd.DataFrame(rows, columns=SWEEP_COLUMNS)

    def adjacent_deltas(self, p: float) -> np.ndarray:
        """Change in mean delay between neighbouring frequencies."""
        means = np.array([cell.mean_delay for cell in self.curve(p)], dtype=float)
        return np.diff(means)

    def slope(self, p: float) -> Optional[float]:
        """Least-squares slope of mean delay against frequency."""
        curve = self.curve(p)
        if len(curve) < 2:
            return None
        f = np.array([cell.f for cell in curve])
        means = np.array([cell.mean_delay for cell in curve])
        return float(np.polyfit(f, means, 1)[0])

    def bootstrap_decreases(self, p: float, n_resamples: int = 1000, confidence: float = 0.95,
                            seed: int = 0) -> List[Tuple[float, float]]:
        """Confidence interval of ``mean(f_i) - mean(f_i+1)`` for each adjacent pair.

        A lower bound above zero confirms the decrease at that confidence.
        """
        rng = np.random.default_rng(seed)
        tail = (1.0 - confidence) / 2.0
        intervals = []
        curve = self.curve(p)
        for lower, upper in zip(curve, curve[1:]):
            a = rng.choice(lower.delays, size=(n_resamples, lower.delays.size)).mean(axis=1)
            b = rng.choice(upper.delays, size=(n_resamples, upper.delays.size)).mean(axis=1)
            lo, hi = np.quantile(a - b, [tail, 1.0 - tail])
            intervals.append((float(lo), float(hi)))
        return intervals

    def segment_slopes(self, p: float, knee: float = DEFAULT_KNEE) -> Tuple[Optional[float], Optional[float]]:
        """Mean |slope| of the segments below and above ``knee``."""
        curve = self.curve(p)
        below, above = [], []
        for left, right in zip(curve, curve[1:]):
            slope = abs((right.mean_delay - left.mean_delay) / (right.f - left.f))
            if right.f <= knee:
                below.append(slope)
            elif left.f >= knee:
                above.append(slope)
        return (float(np.mean(below)) if below else None,
                float(np.mean(above)) if above else None)


def sweep(cfg: ExperimentConfig, device_class: DeviceClass, p_values: Sequence[float],
          f_grid: Sequence[float], *, n_trials: Optional[int] = None, workers: int = 1,
          progress: Optional[Callable[[SweepCell], None]] = None) -> SweepResult:
    """Mean detection delay of one class over a (probability, frequency) grid.

    The other class keeps its configured frequency and attack probability.
    Cells whose frequencies break a constraint are skipped and logged.
    """
    n_trials = cfg.n_trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ConfigurationError(f"n_trials must be positive, got {n_trials}")
    vulnerable = device_class is DeviceClass.VULNERABLE
    result = SweepResult(axis=device_class)
    for p in p_values:
        for f in f_grid:
            f_v, f_nv = (f, cfg.f_nv) if vulnerable else (cfg.f_v, f)
            p1, p2 = (p, cfg.p2) if vulnerable else (cfg.p1, p)
            try:
                _cached_schedule(cfg.inventory(), cfg.frequencies(f_v, f_nv), cfg.n_slots, True)
                outcomes = _run_trials(cfg, device_class, f_v, f_nv, p1, p2, n_trials, workers)
            except ConstraintViolation as e:
                log.warning("skipping cell f=%g p=%g: %s", f, p, e)
                result.skipped.append((f, p, str(e)))
                continue
            cell = _aggregate(device_class, f, p, outcomes)
            log.info("cell f=%g p=%g: %d detected, %d missed, mean delay %s",
                     f, p, cell.n_detected, cell.n_missed, cell.mean_delay)
            result.cells.append(cell)
            if progress is not None:
                progress(cell)
    return result


def sweep_vulnerable(cfg: ExperimentConfig, p1_values: Optional[Sequence[float]] = None,
                     f_v_grid: Optional[Sequence[float]] = None, **kwargs) -> SweepResult:
    return sweep(cfg, DeviceClass.VULNERABLE, p1_values or cfg.p1_values, f_v_grid or cfg.f_v_grid, **kwargs)


def sweep_nonvulnerable(cfg: ExperimentConfig, p2_values: Optional[Sequence[float]] = None,
                        f_nv_grid: Optional[Sequence[float]] = None, **kwargs) -> SweepResult:
    return sweep(cfg, DeviceClass.NON_VULNERABLE, p2_values or cfg.p2_values,
                 f_nv_grid or cfg.f_nv_grid, **kwargs)


@dataclass(frozen=True, eq=False)
class DelayHistogram:
    edges: np.ndarray
    counts: np.ndarray
    samples: np.ndarray = field(repr=False)

    @property
    def density(self) -> np.ndarray:
        """Counts normalised to sum to one."""
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)

    @property
    def mean(self) -> Optional[float]:
        return float(self.samples.mean()) if self.samples.size else None

    @property
    def fraction_below_mean(self) -> Optional[float]:
        if not self.samples.size:
            return None
        return float((self.samples < self.samples.mean()).mean())

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_lo": self.edges[:-1], "bin_hi": self.edges[1:], "count": self.counts},
                            columns=HISTOGRAM_COLUMNS)


def delay_histogram(cfg: ExperimentConfig, device_class: DeviceClass, f: float, p: float,
                    n_trials: int, bins: int = 20, *, workers: int = 1) -> DelayHistogram:
    """Pool per-device delays of one class across trials into a histogram."""
    if n_trials < 100:
        log.warning("histogram over %d trials; at least 100 are needed for a stable shape", n_trials)
    cell = sweep(cfg, device_class, [p], [f], n_trials=n_trials, workers=workers)
    if not cell.cells:
        raise ConstraintViolation(f"frequency {f} is infeasible: {cell.skipped[0][2]}")
    samples = cell.cells[0].delays
    counts, edges = np.histogram(samples, bins=bins)
    return DelayHistogram(edges=edges, counts=counts, samples=samples)


@dataclass(frozen=True)
class ReferenceCheck:
    """Comparison of a pooled delay sample with a published reference mean."""
    expected: float
    observed: Optional[float]
    tolerance: float
    fraction_below_mean: Optional[float]
    interpretation: str

    @property
    def relative_error(self) -> Optional[float]:
        if self.observed is None:
            return None
        return abs(self.observed - self.expected) / self.expected

    @property
    def mean_within_tolerance(self) -> bool:
        return self.relative_error is not None and self.relative_error <= self.tolerance

    @property
    def exponential_shape(self) -> bool:
        lo, hi = EXPONENTIAL_BELOW_MEAN
        return self.fraction_below_mean is not None and lo <= self.fraction_below_mean <= hi

    @property
    def passed(self) -> bool:
        return self.mean_within_tolerance and self.exponential_shape

    def describe(self) -> str:
        observed = "n/a" if self.observed is None else f"{self.observed:.1f}"
        below = "n/a" if self.fraction_below_mean is None else f"{self.fraction_below_mean:.3f}"
        verdict = "matches" if self.mean_within_tolerance else "DIFFERS FROM"
        return (f"pooled mean delay {observed} {verdict} reference {self.expected:g} "
                f"(tolerance {self.tolerance:.0%}); fraction below mean {below}; "
                f"interpretation: {self.interpretation}")


def check_reference_mean(hist: DelayHistogram, cfg: ExperimentConfig,
                         expected: float = REFERENCE_MEAN_DELAY,
                         tolerance: float = REFERENCE_TOLERANCE) -> ReferenceCheck:
    """Check a histogram against the reference mean; misses are logged with the arrival interpretation."""
    check = ReferenceCheck(
        expected=expected,
        observed=hist.mean,
        tolerance=tolerance,
        fraction_below_mean=hist.fraction_below_mean,
        interpretation=(f"mean_scan_interarrival={cfg.mean_scan_interarrival:g} read as the mean "
                        f"number of slots between consecutive scan packets of a bot"),
    )
    if not check.mean_within_tolerance:
        log.warning(check.describe())
    return check
