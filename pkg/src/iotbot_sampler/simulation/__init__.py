"""
iotbot_sampler.simulation

Seeded generation of attack sets, scanning matrices, packet streams and labelled corpora.
"""

from .scanner import (
    ALTERNATE_TELNET_PORT,
    BENIGN_FLAGS,
    PRIMARY_PORT_SHARE,
    PRIMARY_TELNET_PORT,
    AttackModel,
    AttackSet,
    PacketColumns,
    ScanningMatrix,
    benign_port,
    generate_scanning_matrix,
    render_packet_columns,
    render_packet_stream,
    sample_attack_set,
    scan_gaps,
    scan_ports,
    synthetic_corpus,
)
from .seeding import TrialStreams, trial_seed, trial_streams

__all__ = [
    "ALTERNATE_TELNET_PORT",
    "BENIGN_FLAGS",
    "PRIMARY_PORT_SHARE",
    "PRIMARY_TELNET_PORT",
    "AttackModel",
    "AttackSet",
    "PacketColumns",
    "ScanningMatrix",
    "TrialStreams",
    "benign_port",
    "generate_scanning_matrix",
    "render_packet_columns",
    "render_packet_stream",
    "sample_attack_set",
    "scan_gaps",
    "scan_ports",
    "synthetic_corpus",
    "trial_seed",
    "trial_streams",
]
