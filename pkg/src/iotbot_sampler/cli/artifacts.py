"""
Reading and writing of trace files and CSV result artifacts.

Every file is comma-separated with a mandatory header row and ``\\n`` line
endings, so equal inputs give byte-identical files on every platform.
"""

import logging
from pathlib import Path
from typing import Dict, Iterator, Optional, TextIO, Union

import numpy as np
import pandas as pd

from iotbot_sampler.detection import DetectionReport
from iotbot_sampler.errors import ConfigurationError, TraceFormatError, UnsortedStreamError
from iotbot_sampler.experiments import DelayHistogram, SweepResult
from iotbot_sampler.sampling import SamplingSchedule
from iotbot_sampler.simulation import ScanningMatrix, render_packet_columns
from iotbot_sampler.traffic import (
    MAX_PORT,
    DeviceClass,
    DeviceId,
    DeviceInventory,
    PacketRecord,
    TcpFlags,
)

log = logging.getLogger(__name__)

PathOrBuffer = Union[str, Path, TextIO]

TRACE_COLUMNS = ["slot", "device_id", "device_class", "protocol", "tcp_flags", "dst_port"]
REPORT_COLUMNS = ["device_id", "class", "infected", "first_scan_slot", "detection_slot", "delay"]
TRACE_READ_CHUNK = 500_000
_CSV_OPTIONS = {"index": False, "lineterminator": "\n"}


def _flag_letters(values: np.ndarray) -> np.ndarray:
    lookup = {int(v): TcpFlags(int(v)).letters() for v in np.unique(values)}
    return pd.Series(values).map(lookup).to_numpy()


def write_trace(path: PathOrBuffer, scan: ScanningMatrix, inv: DeviceInventory) -> int:
    """Write the rendered packet stream of a trial; returns the number of rows."""
    class_code: Dict[int, str] = {int(device): cls.value for device, cls in inv}
    rows = 0
    header = True
    target = open(path, "w", encoding="utf-8", newline="") if isinstance(path, (str, Path)) else path
    try:
        for block in render_packet_columns(scan, inv):
            frame = pd.DataFrame({
                "slot": block.slot,
                "device_id": block.device,
                "device_class": pd.Series(block.device).map(class_code).to_numpy(),
                "protocol": np.where(block.is_tcp, "TCP", "OTHER"),
                "tcp_flags": _flag_letters(block.tcp_flags),
                "dst_port": block.dst_port,
            }, columns=TRACE_COLUMNS)
            frame.to_csv(target, header=header, **_CSV_OPTIONS)
            header = False
            rows += len(frame)
        if header:
            pd.DataFrame(columns=TRACE_COLUMNS).to_csv(target, **_CSV_OPTIONS)
    finally:
        if target is not path:
            target.close()
    return rows


def _bad_rows(mask: np.ndarray, frame: pd.DataFrame, reason: str) -> None:
    if mask.any():
        position = int(np.flatnonzero(mask)[0])
        line = int(frame.index[position]) + 2
        raise TraceFormatError(reason, line=line)


def _integers(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
    bad = values.isna().to_numpy() | (values.to_numpy(dtype=float, na_value=np.nan) % 1 != 0)
    _bad_rows(bad, frame, f"{column} must be an integer")
    return values.to_numpy(dtype=np.int64)


def iter_trace(path: PathOrBuffer, inventory: Optional[DeviceInventory] = None) -> Iterator[PacketRecord]:
    """Stream packets from a trace file, validating every row.

    Raises:
        TraceFormatError: a row does not parse, or its device class
            disagrees with ``inventory``; the message names the line.
        UnsortedStreamError: slots decrease between rows.
    """
    try:
        reader = pd.read_csv(path, dtype=str, keep_default_na=False, chunksize=TRACE_READ_CHUNK)
        first = True
        last_slot = -1
        for frame in reader:
            if first and list(frame.columns) != TRACE_COLUMNS:
                raise TraceFormatError(f"header must be {','.join(TRACE_COLUMNS)}", line=1)
            first = False
            yield from _chunk_records(frame, inventory, last_slot)
            if len(frame):
                last_slot = int(frame["slot"].iloc[-1])
        if first:
            raise TraceFormatError("trace file is empty", line=1)
    except pd.errors.EmptyDataError as e:
        raise TraceFormatError("trace file is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise TraceFormatError(f"cannot parse trace: {e}") from e
    except FileNotFoundError as e:
        raise ConfigurationError(f"cannot read trace file {path}: {e.strerror}") from e


def _chunk_records(frame: pd.DataFrame, inventory: Optional[DeviceInventory],
                   last_slot: int) -> Iterator[PacketRecord]:
    slot = _integers(frame, "slot")
    device = _integers(frame, "device_id")
    port = _integers(frame, "dst_port")
    _bad_rows(slot < 0, frame, "slot must be non-negative")
    _bad_rows(device < 0, frame, "device_id must be non-negative")
    _bad_rows((port < 0) | (port > MAX_PORT), frame, f"dst_port must lie in [0, {MAX_PORT}]")

    previous = np.concatenate(([last_slot], slot[:-1]))
    if (slot < previous).any():
        position = int(np.flatnonzero(slot < previous)[0])
        raise UnsortedStreamError(f"slot {slot[position]} follows slot {previous[position]}",
                                  line=int(frame.index[position]) + 2)

    protocol = frame["protocol"].str.strip().str.upper()
    _bad_rows(~protocol.isin(["TCP", "OTHER"]).to_numpy(), frame, "protocol must be TCP or OTHER")
    is_tcp = (protocol == "TCP").to_numpy()

    codes = frame["device_class"].str.strip().str.upper()
    _bad_rows(~codes.isin([c.value for c in DeviceClass]).to_numpy(), frame, "device_class must be V or N")

    flag_text = frame["tcp_flags"].str.strip()
    parsed: Dict[str, TcpFlags] = {}
    for text in flag_text.unique():
        try:
            parsed[text] = TcpFlags.parse(text)
        except ValueError as e:
            _bad_rows((flag_text == text).to_numpy(), frame, str(e))
    flags = flag_text.map(parsed).to_numpy()
    has_flags = np.array([f != TcpFlags.NONE for f in flags], dtype=bool)
    _bad_rows(~is_tcp & has_flags, frame, "tcp_flags must be '-' for non-TCP packets")

    if inventory is not None:
        expected = np.array([inventory.class_of(DeviceId(int(d))).value if d in inventory else c
                             for d, c in zip(device.tolist(), codes.tolist())], dtype=object)
        _bad_rows((codes.to_numpy() != expected), frame, "device_class disagrees with the configured inventory")

    for i in range(len(frame)):
        yield PacketRecord(int(slot[i]), DeviceId(int(device[i])), bool(is_tcp[i]), flags[i], int(port[i]))


def _nullable(values) -> pd.Series:
    return pd.Series(values, dtype="Int64")


def report_frame(report: DetectionReport) -> pd.DataFrame:
    """Rows for flagged devices and for infected devices that were missed."""
    rows = [v for v in report.verdicts if v.flagged or v.infected]
    return pd.DataFrame({
        "device_id": _nullable([int(v.device) for v in rows]),
        "class": pd.Series([v.device_class.value for v in rows], dtype=object),
        "infected": _nullable([None if v.infected is None else int(v.infected) for v in rows]),
        "first_scan_slot": _nullable([v.first_scan_slot for v in rows]),
        "detection_slot": _nullable([v.detection_slot for v in rows]),
        "delay": _nullable([v.detection_delay for v in rows]),
    }, columns=REPORT_COLUMNS)


def write_report(path: PathOrBuffer, report: DetectionReport) -> None:
    report_frame(report).to_csv(path, **_CSV_OPTIONS)


def write_schedule(path: PathOrBuffer, sched: SamplingSchedule) -> None:
    """Audit export of every sampled (slot, device_id) pair."""
    slots, device_ids = sched.pairs()
    pd.DataFrame({"slot": slots, "device_id": device_ids}).to_csv(path, **_CSV_OPTIONS)


def write_ground_truth(path: PathOrBuffer, scan: ScanningMatrix) -> None:
    """Every scan packet as a (slot, device_id) pair."""
    slots, columns = np.nonzero(scan.as_matrix())
    ids = np.asarray(scan.inventory.ids, dtype=np.int64)
    pd.DataFrame({"slot": slots, "device_id": ids[columns]}).to_csv(path, **_CSV_OPTIONS)


def write_attack_set(path: PathOrBuffer, scan: ScanningMatrix) -> None:
    rows = [(int(device), scan.inventory.class_of(device).value, scan.infection_slot[device])
            for device in scan.inventory.ids if device in scan.attacked_set]
    pd.DataFrame(rows, columns=["device_id", "class", "infection_slot"]).to_csv(path, **_CSV_OPTIONS)


def write_sweep(path: PathOrBuffer, result: SweepResult) -> None:
    result.frame().to_csv(path, float_format="%.6f", na_rep="", **_CSV_OPTIONS)


def write_histogram(path: PathOrBuffer, hist: DelayHistogram) -> None:
    hist.frame().to_csv(path, float_format="%.6f", **_CSV_OPTIONS)
