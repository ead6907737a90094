"""Click command group: validate, simulate, detect, sweep, histogram and defaults."""

import logging
import sys
from pathlib import Path
from typing import Optional

import click

from iotbot_sampler.decorators import handle_error
from iotbot_sampler.detection import DetectionReport, detect_from_matrices, run_detection
from iotbot_sampler.experiments import (
    ENGINES,
    ExperimentConfig,
    SweepResult,
    check_reference_mean,
    delay_histogram,
    sweep,
)
from iotbot_sampler.sampling import (
    build_staggered_schedule,
    derive_coverage_period,
    validate_constraints,
)
from iotbot_sampler.simulation import generate_scanning_matrix, render_packet_stream
from iotbot_sampler.traffic import DeviceClass

from .artifacts import (
    iter_trace,
    report_frame,
    write_attack_set,
    write_ground_truth,
    write_histogram,
    write_report,
    write_schedule,
    write_sweep,
    write_trace,
)
from .config import load_config, render_config

log = logging.getLogger(__name__)

AXES = {"vulnerable": DeviceClass.VULNERABLE, "nonvulnerable": DeviceClass.NON_VULNERABLE}

config_option = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                             help="Experiment configuration file (key = value).")
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None,
                           help="Override the configured seed.")
trials_option = click.option("--trials", type=click.IntRange(min=1), default=None,
                             help="Override the configured number of trials.")
workers_option = click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
                              help="Processes running trials in parallel.")
axis_option = click.option("--axis", type=click.Choice(list(AXES)), default="vulnerable", show_default=True,
                           help="Device class whose sampling frequency is varied.")


def _load(config_path: str, seed: Optional[int] = None, trials: Optional[int] = None) -> ExperimentConfig:
    return load_config(config_path).with_overrides(seed=seed, n_trials=trials)


def _summarize(report: DetectionReport, alpha: float) -> None:
    for device_class in DeviceClass:
        label = "vulnerable" if device_class is DeviceClass.VULNERABLE else "non-vulnerable"
        flagged = len(report.flagged(device_class))
        if report.has_ground_truth:
            mean = report.mean_delay(device_class)
            mean_text = "n/a" if mean is None else f"{mean:.1f} packets (cost {alpha * mean:.1f})"
            click.echo(f"{label:>15}: {len(report.infected(device_class))} infected, {flagged} detected, "
                       f"{len(report.missed(device_class))} missed, mean delay {mean_text}")
        else:
            click.echo(f"{label:>15}: {flagged} flagged")


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging and tracebacks on error.")
@click.pass_context
def cli(ctx, verbose):
    """Detect Mirai-like IoT bots under two-dimensional packet sub-sampling."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


@cli.command()
@config_option
@handle_error
def validate(config_path):
    """Check the configured frequencies against the schedule constraints."""
    cfg = _load(config_path)
    inv = cfg.inventory()
    freq = cfg.frequencies()
    report = validate_constraints(inv, freq)
    for check in report:
        click.secho(f"{'✓' if check.holds else '✗'} {check.describe()}",
                    fg="green" if check.holds else "red")
    click.echo(f"coverage period: {freq.coverage_period or derive_coverage_period(inv, freq)} slots "
               f"(derived minimum {derive_coverage_period(inv, freq)})")
    if not report.ok:
        sys.exit(1)


@cli.command()
@config_option
@click.option("--out", "prefix", required=True, help="Prefix of the artifact files written.")
@seed_option
@click.option("--engine", type=click.Choice(ENGINES), default="stream", show_default=True,
              help="Run the packet-level loop or intersect the matrices directly.")
@handle_error
def simulate(config_path, prefix, seed, engine):
    """Run one end-to-end trial and write its trace, ground truth and report."""
    cfg = _load(config_path, seed=seed)
    inv = cfg.inventory()
    sched = build_staggered_schedule(inv, cfg.frequencies(), cfg.n_slots)
    scan = generate_scanning_matrix(inv, cfg.attack_model(), cfg.n_slots, cfg.seed)

    prefix_path = Path(prefix)
    if prefix_path.parent != Path("."):
        prefix_path.parent.mkdir(parents=True, exist_ok=True)
    rows = write_trace(f"{prefix}.trace.csv", scan, inv)
    write_ground_truth(f"{prefix}.truth.csv", scan)
    write_attack_set(f"{prefix}.attack.csv", scan)
    write_schedule(f"{prefix}.schedule.csv", sched)
    log.info("wrote %d trace rows and %d scan events", rows, scan.n_scans)

    metadata = {"seed": cfg.seed, "f_v": cfg.f_v, "f_nv": cfg.f_nv, "p1": cfg.p1, "p2": cfg.p2,
                "alpha": cfg.alpha, "engine": engine}
    if engine == "stream":
        report = run_detection(render_packet_stream(scan, inv), sched, scan,
                               buffer_capacity=cfg.buffer_capacity, deep_match=cfg.deep_match,
                               metadata=metadata)
    else:
        report = detect_from_matrices(scan, sched, buffer_capacity=cfg.buffer_capacity,
                                      deep_match=cfg.deep_match, metadata=metadata)
    write_report(f"{prefix}.report.csv", report)
    _summarize(report, cfg.alpha)


@cli.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(dir_okay=False),
              help="Trace file to scan.")
@config_option
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Report file; standard output when omitted.")
@handle_error
def detect(trace_path, config_path, out_path):
    """Run the sampled detection loop over a recorded trace."""
    cfg = _load(config_path)
    inv = cfg.inventory()
    sched = build_staggered_schedule(inv, cfg.frequencies(), cfg.n_slots)
    report = run_detection(iter_trace(trace_path, inv), sched,
                           buffer_capacity=cfg.buffer_capacity, deep_match=cfg.deep_match,
                           metadata={"trace": trace_path})
    if out_path is None:
        click.echo(report_frame(report).to_csv(index=False, lineterminator="\n"), nl=False)
    else:
        write_report(out_path, report)
    for verdict in report.flagged():
        click.secho(f"device {verdict.device} flagged at slot {verdict.detection_slot}", fg="yellow", err=True)
    if report.malformed_packets:
        click.secho(f"{report.malformed_packets} malformed packets rejected", fg="red", err=True)


def _print_trends(result: SweepResult) -> None:
    for p in result.probabilities():
        slope = result.slope(p)
        deltas = result.adjacent_deltas(p)
        increases = int((deltas > 0).sum())
        slope_text = "n/a" if slope is None else f"{slope:.1f}"
        click.echo(f"p={p:g}: fitted slope {slope_text}, {increases} of {deltas.size} adjacent steps increase")
        if result.axis is DeviceClass.VULNERABLE:
            below, above = result.segment_slopes(p)
            if below is not None and above is not None:
                click.echo(f"       mean |slope| below knee {below:.1f}, above knee {above:.1f}")


@cli.command("sweep")
@config_option
@axis_option
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Sweep CSV file.")
@seed_option
@trials_option
@workers_option
@handle_error
def sweep_command(config_path, axis, out_path, seed, trials, workers):
    """Mean detection delay over the frequency grid of one device class."""
    cfg = _load(config_path, seed=seed, trials=trials)
    device_class = AXES[axis]
    vulnerable = device_class is DeviceClass.VULNERABLE
    p_values = cfg.p1_values if vulnerable else cfg.p2_values
    grid = cfg.f_v_grid if vulnerable else cfg.f_nv_grid

    with click.progressbar(length=len(p_values) * len(grid), label=f"{axis} sweep",
                           file=sys.stderr) as bar:
        result = sweep(cfg, device_class, p_values, grid, workers=workers,
                       progress=lambda cell: bar.update(1))
        bar.update(len(result.skipped))
    write_sweep(out_path, result)
    for f, p, reason in result.skipped:
        click.secho(f"skipped f={f:g} p={p:g}: {reason}", fg="yellow", err=True)
    _print_trends(result)
    click.echo(f"wrote {len(result.cells)} cells to {out_path}")


@cli.command()
@config_option
@axis_option
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Histogram CSV file.")
@click.option("--f", "frequency", type=float, default=None, help="Sampling frequency (default: configured).")
@click.option("--p", "probability", type=float, default=None, help="Attack probability (default: configured).")
@click.option("--bins", type=click.IntRange(min=1), default=20, show_default=True)
@seed_option
@trials_option
@workers_option
@handle_error
def histogram(config_path, axis, out_path, frequency, probability, bins, seed, trials, workers):
    """Distribution of detection delays for one device class."""
    cfg = _load(config_path, seed=seed, trials=trials)
    device_class = AXES[axis]
    vulnerable = device_class is DeviceClass.VULNERABLE
    f = frequency if frequency is not None else (cfg.f_v if vulnerable else cfg.f_nv)
    p = probability if probability is not None else (cfg.p1 if vulnerable else cfg.p2)

    hist = delay_histogram(cfg, device_class, f, p, cfg.n_trials, bins, workers=workers)
    write_histogram(out_path, hist)
    if hist.mean is None:
        click.echo("no devices detected; histogram is empty")
        return
    click.echo(f"{hist.samples.size} delays pooled over {cfg.n_trials} trials: mean {hist.mean:.1f}, "
               f"fraction below mean {hist.fraction_below_mean:.3f}")
    if vulnerable:
        check = check_reference_mean(hist, cfg)
        click.secho(check.describe(), fg="green" if check.passed else "yellow")


@cli.command()
def defaults():
    """Print the default configuration file."""
    click.echo(render_config(ExperimentConfig()), nl=False)
