import logging

import numpy as np
import pytest

from iotbot_sampler.detection import (
    BotDetector,
    DeviceBuffer,
    detect_from_matrices,
    run_detection,
)
from iotbot_sampler.errors import ConfigurationError, UnsortedStreamError
from iotbot_sampler.sampling import (
    SamplingFrequencies,
    SamplingSchedule,
    build_staggered_schedule,
    validate_constraints,
)
from iotbot_sampler.simulation import (
    AttackModel,
    AttackSet,
    ScanningMatrix,
    generate_scanning_matrix,
    render_packet_stream,
)
from iotbot_sampler.traffic import DeviceId, PacketRecord, TcpFlags, build_inventory


def scan_pkt(slot, device, port=23):
    return PacketRecord(slot, DeviceId(device), True, TcpFlags.SYN, port)


def benign_pkt(slot, device):
    return PacketRecord(slot, DeviceId(device), True, TcpFlags.PSH | TcpFlags.ACK, 50000)


def hand_schedule(inv, columns):
    """Schedule from explicit per-device sampled slots."""
    matrix = np.zeros((10, len(inv)), dtype=bool)
    for column, slots in enumerate(columns):
        matrix[slots, column] = True
    return SamplingSchedule(matrix, inv, SamplingFrequencies(f_v=0.5, f_nv=0.1), 10)


def hand_scan(inv, scans, n_slots=10):
    """Scanning matrix with explicit scan slots; infection one slot before the first scan."""
    scan_slots = {DeviceId(d): np.asarray(slots, dtype=np.int64) for d, slots in scans.items()}
    infection = {device: max(0, int(slots[0]) - 1) for device, slots in scan_slots.items()}
    return ScanningMatrix(n_slots, inv, AttackSet(frozenset(infection), infection), scan_slots, 0)


def and_oracle(scan, sched):
    """First slot where a device both scans and is sampled."""
    both = scan.as_matrix() & sched.matrix
    detections = {}
    for column, device in enumerate(sched.inventory.ids):
        hits = np.flatnonzero(both[:, column])
        if hits.size:
            detections[device] = int(hits[0])
    return detections


def random_instance(seed):
    """10 devices, 1000 slots, constraint-valid random frequencies."""
    rng = np.random.default_rng(seed)
    inv = build_inventory(10, 0.4)
    while True:
        f_v = round(float(rng.uniform(0.05, 0.9)), 2)
        f_nv = round(float(rng.uniform(0.01, 0.5)), 2)
        freq = SamplingFrequencies(f_v=f_v, f_nv=f_nv)
        if validate_constraints(inv, freq).ok:
            break
    sched = build_staggered_schedule(inv, freq, 1_000)
    model = AttackModel(p1=0.3, p2=0.1, mean_scan_interarrival=25.0)
    return inv, sched, generate_scanning_matrix(inv, model, 1_000, seed)


# --- Buffers ---

def test_buffer_evicts_oldest():
    """A capacity-1 buffer keeps only the newest packet."""
    buffer = DeviceBuffer(DeviceId(3), capacity=1)
    buffer.add(benign_pkt(0, 3))
    buffer.add(scan_pkt(1, 3))
    assert len(buffer) == 1
    assert buffer.current == scan_pkt(1, 3)


def test_buffer_holds_up_to_capacity():
    """Packets accumulate until the capacity is reached."""
    buffer = DeviceBuffer(DeviceId(3), capacity=2)
    for slot in range(3):
        buffer.add(benign_pkt(slot, 3))
    assert [pkt.slot for pkt in buffer] == [1, 2]


def test_buffer_rejects_foreign_packets():
    """A buffer never holds another device's packets."""
    buffer = DeviceBuffer(DeviceId(3))
    with pytest.raises(ValueError):
        buffer.add(benign_pkt(0, 4))


@pytest.mark.parametrize("capacity", [0, -2])
def test_buffer_capacity_must_be_positive(capacity):
    """Capacity is at least one packet."""
    with pytest.raises(ConfigurationError):
        DeviceBuffer(DeviceId(0), capacity)
    with pytest.raises(ConfigurationError):
        BotDetector(buffer_capacity=capacity)


# --- Ingest and step ---

def test_ingest_registers_new_devices():
    """The first packet of an unseen device adds it to the device list."""
    detector = BotDetector(buffer_capacity=2)
    detector.ingest(benign_pkt(0, 42))
    assert detector.devices == [42]
    detector.ingest(benign_pkt(1, 42))
    assert detector.devices == [42]
    assert len(detector.buffer(DeviceId(42))) == 2


def test_malformed_packets_are_counted_not_raised():
    """Out-of-range ports and flags on non-TCP packets are dropped with a count."""
    detector = BotDetector()
    assert not detector.ingest(PacketRecord(0, DeviceId(1), True, TcpFlags.SYN, 70000))
    assert not detector.ingest(PacketRecord(0, DeviceId(1), False, TcpFlags.SYN, 23))
    assert detector.malformed_packets == 2
    assert detector.devices == []


def test_sampled_scan_is_flagged():
    """A sampled device whose slot-t packet is a TELNET SYN is flagged at t."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[4], []])
    detector = BotDetector()
    detector.ingest(scan_pkt(4, 0))
    assert detector.step(4, sched) == frozenset({0})
    assert detector.detections == {0: 4}


def test_unsampled_scan_is_missed():
    """A scan on a slot where the device is not sampled goes unseen."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[5], []])
    detector = BotDetector()
    detector.ingest(scan_pkt(4, 0))
    assert detector.step(4, sched) == frozenset()
    assert not detector.is_flagged(DeviceId(0))


def test_only_current_packet_is_checked():
    """A stale scan in the buffer does not match a later sampled slot."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[5], []])
    detector = BotDetector(buffer_capacity=4)
    detector.ingest(scan_pkt(4, 0))
    detector.ingest(benign_pkt(5, 0))
    assert detector.step(5, sched) == frozenset()


def test_deep_match_checks_whole_buffer():
    """With deep matching a buffered scan is still caught a slot later."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[5], []])
    detector = BotDetector(buffer_capacity=2, deep_match=True)
    detector.ingest(scan_pkt(4, 0))
    detector.ingest(benign_pkt(5, 0))
    assert detector.step(5, sched) == frozenset({0})


def test_flag_is_sticky():
    """Once flagged, a device keeps its first detection slot."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[2, 6], []])
    detector = BotDetector()
    detector.ingest(scan_pkt(2, 0))
    assert detector.step(2, sched) == frozenset({0})
    detector.ingest(scan_pkt(6, 0))
    assert detector.step(6, sched) == frozenset()
    assert detector.detections == {0: 2}


def test_sampling_an_empty_buffer_is_a_no_op():
    """Sampled devices that sent nothing are skipped."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[0], [0]])
    assert BotDetector().step(0, sched) == frozenset()


# --- Full runs ---

@pytest.mark.parametrize("seed", range(1, 51))
def test_stream_engine_matches_and_oracle(seed):
    """Detection slots equal the first scanning-and-sampled slot, exactly."""
    inv, sched, scan = random_instance(seed)
    expected = and_oracle(scan, sched)
    report = run_detection(render_packet_stream(scan, inv), sched, scan)
    assert report.detection_slots() == expected
    assert detect_from_matrices(scan, sched).detection_slots() == expected


@pytest.mark.parametrize("seed", [3, 8, 21])
def test_deep_match_engines_agree(seed):
    """Both engines agree when scans linger in a three-packet buffer."""
    inv, sched, scan = random_instance(seed)
    stream = run_detection(render_packet_stream(scan, inv), sched, scan, buffer_capacity=3, deep_match=True)
    matrix = detect_from_matrices(scan, sched, buffer_capacity=3, deep_match=True)
    assert stream.detection_slots() == matrix.detection_slots()
    assert set(and_oracle(scan, sched)) <= set(matrix.detection_slots())


def test_full_sampling_has_zero_delay():
    """Sampling every device every slot detects each bot at its first scan."""
    inv = build_inventory(10, 0.4)
    sched = build_staggered_schedule(inv, SamplingFrequencies(f_v=1.0, f_nv=1.0), 2_000,
                                     enforce_constraints=False)
    scan = generate_scanning_matrix(inv, AttackModel(p1=0.5, p2=0.5, mean_scan_interarrival=50.0), 2_000, 9)
    for report in (run_detection(render_packet_stream(scan, inv), sched, scan),
                   detect_from_matrices(scan, sched)):
        infected = [v for v in report.verdicts if v.infected and v.first_scan_slot is not None]
        assert infected
        assert all(v.detection_delay == 0 for v in infected)
        assert report.mean_delay() == 0


def test_no_infections_flag_nothing():
    """With no attacks the report flags nothing and has no mean delay."""
    inv = build_inventory(10, 0.4)
    sched = build_staggered_schedule(inv, SamplingFrequencies(f_v=0.5, f_nv=0.1), 500)
    scan = generate_scanning_matrix(inv, AttackModel(p1=0.0, p2=0.0), 500, 1)
    report = run_detection(render_packet_stream(scan, inv), sched, scan)
    assert report.flagged() == []
    assert report.mean_delay() is None


def test_unsampled_infection_is_reported_as_miss():
    """An infected device never sampled on a scan slot is a miss."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[4, 8], [0]])
    scan = hand_scan(inv, {0: [3, 7]})
    report = detect_from_matrices(scan, sched)
    verdict = report.verdict(DeviceId(0))
    assert verdict.infected and not verdict.flagged and verdict.missed
    assert [v.device for v in report.missed()] == [0]

    deep = detect_from_matrices(scan, sched, buffer_capacity=2, deep_match=True)
    assert deep.verdict(DeviceId(0)).detection_slot == 4
    assert deep.verdict(DeviceId(0)).detection_delay == 1


def test_clean_devices_never_flagged():
    """Devices with an all-zero scanning row are never flagged."""
    for seed in range(1, 11):
        inv, sched, scan = random_instance(seed)
        report = run_detection(render_packet_stream(scan, inv), sched, scan)
        for verdict in report.flagged():
            assert scan.slots_of(verdict.device).size > 0


def test_delays_are_non_negative():
    """Detection never precedes the first scan."""
    for seed in range(1, 11):
        _, sched, scan = random_instance(seed)
        assert all(delay >= 0 for delay in detect_from_matrices(scan, sched).delays())


def test_unsorted_stream_rejected():
    """A slot that goes backwards aborts the run."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[0, 1, 2], []])
    stream = [benign_pkt(0, 0), benign_pkt(2, 0), benign_pkt(1, 1)]
    with pytest.raises(UnsortedStreamError, match="slot 1 of device 1 follows slot 2"):
        run_detection(stream, sched)


def test_report_without_ground_truth():
    """Operational runs report detection slots but no delays."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[3], []])
    report = run_detection([benign_pkt(2, 0), scan_pkt(3, 0), scan_pkt(3, 1)], sched,
                           metadata={"trace": "inline"})
    assert not report.has_ground_truth
    assert report.detection_slots() == {0: 3}
    assert report.verdict(DeviceId(0)).detection_delay is None
    assert report.metadata == {"trace": "inline"}


def test_malformed_packets_reach_report():
    """Rejected packets are counted in the report."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[1], []])
    stream = [benign_pkt(0, 0), PacketRecord(1, DeviceId(0), True, TcpFlags.SYN, 99999), scan_pkt(1, 0)]
    report = run_detection(stream, sched)
    assert report.malformed_packets == 1
    assert report.detection_slots() == {0: 1}


def test_stream_past_horizon_warns(caplog):
    """Packets beyond the schedule are never sampled and trigger one warning."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [list(range(10)), []])
    with caplog.at_level(logging.WARNING):
        report = run_detection([benign_pkt(9, 0), scan_pkt(10, 0), scan_pkt(11, 0)], sched)
    assert report.flagged() == []
    assert caplog.text.count("runs past the 10-slot schedule") == 1


def test_unknown_devices_are_ignored():
    """Devices outside the inventory are buffered but never sampled."""
    inv = build_inventory(2, 0.5)
    sched = hand_schedule(inv, [[0], [0]])
    report = run_detection([scan_pkt(0, 77)], sched)
    assert report.flagged() == []
    assert len(report.verdicts) == 2
