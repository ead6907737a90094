import logging
import math

import numpy as np
import pytest

from iotbot_sampler.errors import ConfigurationError
from iotbot_sampler.simulation import (
    AttackModel,
    generate_scanning_matrix,
    render_packet_columns,
    render_packet_stream,
    sample_attack_set,
    scan_gaps,
    scan_ports,
    trial_seed,
    trial_streams,
)
from iotbot_sampler.traffic import DeviceId, build_inventory, is_scan_packet


@pytest.fixture
def inventory():
    """Ten devices, four vulnerable."""
    return build_inventory(10, 0.4)


def brute_force_attack_set(inv, model, n_slots, seed):
    """Per-device, per-window Bernoulli trials read one at a time."""
    n_windows = math.ceil(n_slots / model.window_packets)
    draws = trial_streams(seed).attack.random((len(inv), n_windows))
    infection = {}
    for column, (device, device_class) in enumerate(inv):
        p = model.probability_for(device_class)
        for window in range(n_windows):
            if draws[column, window] < p:
                infection[device] = window * model.window_packets
                break
    return infection


# --- Attack model ---

@pytest.mark.parametrize("kwargs", [
    {"p1": 1.5},
    {"p2": -0.1},
    {"window_packets": 0},
    {"mean_scan_interarrival": 0.0},
])
def test_attack_model_rejects_bad_parameters(kwargs):
    """Probabilities stay in [0, 1]; windows and arrival means are positive."""
    with pytest.raises(ConfigurationError):
        AttackModel(**kwargs)


def test_attack_model_warns_when_p2_exceeds_p1(caplog):
    """p2 > p1 is unusual but allowed."""
    with caplog.at_level(logging.WARNING):
        model = AttackModel(p1=0.1, p2=0.3)
    assert model.p2 == 0.3
    assert "exceeds vulnerable" in caplog.text


# --- Attack sets ---

def test_certain_attack_infects_everyone_at_zero(inventory):
    """p1 = p2 = 1 infects every device in the first window."""
    attack = sample_attack_set(inventory, AttackModel(p1=1.0, p2=1.0), 1_000, rng_seed=3)
    assert attack.members == frozenset(inventory.ids)
    assert set(attack.infection_slot.values()) == {0}


def test_zero_probability_attacks_nobody(inventory):
    """p1 = p2 = 0 leaves the attack set empty and the matrix all zero."""
    scan = generate_scanning_matrix(inventory, AttackModel(p1=0.0, p2=0.0), 1_000, rng_seed=3)
    assert scan.attacked_set == frozenset()
    assert scan.n_scans == 0
    assert not scan.as_matrix().any()


@pytest.mark.parametrize("seed", [1, 2, 17, 99])
def test_attack_set_matches_brute_force(seed):
    """Vectorised onset sampling agrees with a window-by-window loop."""
    inv = build_inventory(40, 0.5)
    model = AttackModel(p1=0.05, p2=0.01, window_packets=50)
    attack = sample_attack_set(inv, model, 5_000, seed)
    assert attack.infection_slot == brute_force_attack_set(inv, model, 5_000, seed)


def test_onset_is_geometric():
    """With p1 = 0.5 the first successful window has mean (1 - p) / p = 1."""
    inv = build_inventory(40, 1.0)
    model = AttackModel(p1=0.5, p2=0.0, window_packets=50)
    windows = []
    for seed in range(50):
        attack = sample_attack_set(inv, model, 100_000, seed)
        assert len(attack.members) == 40
        assert all(slot % 50 == 0 for slot in attack.infection_slot.values())
        windows.extend(slot // 50 for slot in attack.infection_slot.values())
    assert np.mean(windows) == pytest.approx(1.0, abs=0.15)


def test_horizon_shorter_than_window_rejected(inventory):
    """The horizon must hold at least one attack window."""
    with pytest.raises(ConfigurationError):
        sample_attack_set(inventory, AttackModel(window_packets=50), 49, rng_seed=1)


# --- Scan arrivals ---

def test_gap_mean_converges():
    """Rounded exponential gaps keep their mean within 5%."""
    gaps = scan_gaps(np.random.default_rng(11), 3386.0, 20_000)
    assert gaps.min() >= 1
    assert gaps.mean() == pytest.approx(3386.0, rel=0.05)


def test_scan_count_over_horizon():
    """A bot infected at slot 0 emits about 100000 / 3386 scans."""
    inv = build_inventory(1, 1.0)
    model = AttackModel(p1=1.0, p2=0.0)
    counts = [generate_scanning_matrix(inv, model, 100_000, seed).n_scans for seed in range(1000)]
    assert np.mean(counts) == pytest.approx(100_000 / 3386, rel=0.10)


def test_unit_mean_saturates():
    """A mean gap of one slot puts a scan in most slots after infection."""
    inv = build_inventory(1, 1.0)
    scan = generate_scanning_matrix(inv, AttackModel(p1=1.0, p2=0.0, mean_scan_interarrival=1.0), 2_000, 5)
    slots = scan.slots_of(DeviceId(0))
    assert (np.diff(slots) >= 1).all()
    assert slots.size >= 0.6 * 2_000


def test_no_scan_before_infection(inventory):
    """Scans start strictly after the infection slot and stay inside the horizon."""
    model = AttackModel(p1=0.02, p2=0.01, mean_scan_interarrival=200.0)
    for seed in range(20):
        scan = generate_scanning_matrix(inventory, model, 20_000, seed)
        for device in inventory.ids:
            slots = scan.slots_of(device)
            if device not in scan.attacked_set:
                assert slots.size == 0
                continue
            if slots.size:
                assert slots[0] > scan.infection_slot[device]
                assert slots[-1] < 20_000
                assert scan.first_scan_slot(device) == slots[0]


def test_generation_is_reproducible(inventory):
    """Equal seeds give equal matrices; different seeds differ."""
    model = AttackModel(p1=0.3, p2=0.1, mean_scan_interarrival=100.0)
    first = generate_scanning_matrix(inventory, model, 10_000, trial_seed(1, 4))
    second = generate_scanning_matrix(inventory, model, 10_000, trial_seed(1, 4))
    other = generate_scanning_matrix(inventory, model, 10_000, trial_seed(1, 5))
    assert np.array_equal(first.as_matrix(), second.as_matrix())
    assert first.infection_slot == second.infection_slot
    assert not np.array_equal(first.as_matrix(), other.as_matrix())


def test_seed_streams_are_independent():
    """The three streams of one seed draw different numbers, reproducibly."""
    streams = trial_streams(42)
    again = trial_streams(42)
    a = streams.attack.random(5)
    assert np.array_equal(a, again.attack.random(5))
    assert not np.array_equal(a, streams.arrivals.random(5))
    assert trial_seed(10, 3) == 13


def test_row_and_events_agree(inventory):
    """Per-device rows and the slot-major event list describe the same scans."""
    scan = generate_scanning_matrix(inventory, AttackModel(p1=1.0, p2=1.0, mean_scan_interarrival=30.0), 500, 8)
    events = list(scan.events())
    assert len(events) == scan.n_scans
    assert [slot for slot, _ in events] == sorted(slot for slot, _ in events)
    for device in inventory.ids:
        assert np.flatnonzero(scan.row(device)).tolist() == scan.slots_of(device).tolist()


# --- Packet rendering ---

def test_port_split_is_ninety_ten():
    """About 90% of scan probes go to port 23, the rest to 2323."""
    inv = build_inventory(10, 1.0)
    scan = generate_scanning_matrix(inv, AttackModel(p1=1.0, p2=1.0, mean_scan_interarrival=10.0), 20_000, 4)
    ports = np.concatenate(list(scan_ports(scan).values()))
    assert ports.size >= 10_000
    assert set(ports.tolist()) <= {23, 2323}
    assert 0.88 <= (ports == 23).mean() <= 0.92


def test_stream_round_trip_reproduces_matrix(inventory):
    """Re-deriving scans from the stream with the signature gives the matrix back."""
    scan = generate_scanning_matrix(inventory, AttackModel(p1=0.5, p2=0.2, mean_scan_interarrival=40.0), 2_000, 12)
    rebuilt = np.zeros((2_000, len(inventory)), dtype=bool)
    count = 0
    for pkt in render_packet_stream(scan, inventory):
        count += 1
        assert pkt.is_well_formed
        if is_scan_packet(pkt):
            rebuilt[pkt.slot, inventory.column_of(pkt.device)] = True
    assert count == 2_000 * len(inventory)
    assert np.array_equal(rebuilt, scan.as_matrix())


def test_rendered_stream_is_slot_major(inventory):
    """Each slot lists every device once, in inventory order."""
    scan = generate_scanning_matrix(inventory, AttackModel(p1=0.5, p2=0.2), 100, 1)
    blocks = list(render_packet_columns(scan, inventory, chunk_slots=30))
    assert [len(block) for block in blocks] == [300, 300, 300, 100]
    slots = np.concatenate([block.slot for block in blocks])
    devices = np.concatenate([block.device for block in blocks])
    assert (np.diff(slots) >= 0).all()
    assert devices[:10].tolist() == list(inventory.ids)


def test_benign_packets_never_match(inventory):
    """Filler traffic never carries the scan signature."""
    scan = generate_scanning_matrix(inventory, AttackModel(p1=0.0, p2=0.0), 300, 1)
    assert not any(is_scan_packet(pkt) for pkt in render_packet_stream(scan, inventory))
