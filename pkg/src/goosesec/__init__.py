"""Authenticated GOOSE messaging, a rule-based subscriber IDS and an
attack/mitigation bus simulator."""

from .attacks import Archive, AttackKind, Attacker, AttackSpec
from .bussim import Bus, PublisherActor, Subscriber, VirtualClock
from .codec import (
    DecodeError,
    EncodeError,
    EthernetHeader,
    GooseApdu,
    GooseFrame,
    GoosePdu,
    MacAddress,
    VlanTag,
    decode_frame,
    encode_frame,
    frame_to_pcap,
)
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .ids import RuleIds, StreamKey, inspect
from .pipeline import FilterPipeline, LatencyStats, Mode, Verdict, measure, process
from .scenario import GOLDEN_MATRIX, ScenarioReport, bench, render_report, render_trace, run_cell, run_matrix
from .secure import AuthVerdict, KeyStore, SecurityExtension, gmac, sign, sign_frame, verify
from .transmission import Publisher, TransmissionProfile, burst_schedule

__version__ = "0.1.0"
