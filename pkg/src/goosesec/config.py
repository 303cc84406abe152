"""Scenario configuration files.

INI-style: ``[section]`` headers and ``key = value`` lines, ``#`` comments.
Every key is optional; omitted ones take the defaults below.  Paths are
relative to the configuration file.

.. code-block:: ini

    [scenario]
    duration_ms = 10000
    seed = 1
    modes = mac, ids, hybrid
    attacks = replay, masquerade, flood, drop

    [profile]
    t0 = 2
    t1 = 1000
    ttl_multiplier = 2

    [publisher]
    dst = 01:0c:cd:01:00:10
    src = dc:37:52:0a:cf:c2
    appid = 0x1000
    vlan_priority = 4
    vlan_id = 0
    go_id = IED1_GOOSE1
    sender_id = 00000001
    events = 2000, 8500

    [security]
    keystore = keys.txt
    key_id = 0000000a

    [attack.flood]
    trigger_at = 5500
    rate_hz = 1000
    duration_ms = 2000

    [bench]
    packets = 100000
    event_every_ms = 1500

    [output]
    report = report.json
    pcap_dir = captures
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .attacks import AttackKind, AttackSpec
from .codec import MacAddress, VlanTag
from .pipeline import Mode
from .secure import KeyStore
from .transmission import TransmissionProfile

DEFAULT_KEY_ID = 0x0000000A
DEFAULT_KEY = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")


class ConfigError(Exception):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


def default_attacks() -> dict[AttackKind, AttackSpec]:
    return {
        AttackKind.REPLAY: AttackSpec(AttackKind.REPLAY, 5500.0, select="event"),
        AttackKind.MASQUERADE: AttackSpec(AttackKind.MASQUERADE, 5500.0, value=True),
        AttackKind.FLOOD: AttackSpec(AttackKind.FLOOD, 5500.0, rate_hz=1000.0, duration_ms=2000.0),
        AttackKind.DROP: AttackSpec(AttackKind.DROP, 8500.0, count=3),
    }


def default_keystore() -> KeyStore:
    ks = KeyStore()
    ks.add_key(DEFAULT_KEY_ID, DEFAULT_KEY)
    return ks


@dataclass
class PublisherConfig:
    dst: MacAddress = field(default_factory=lambda: MacAddress.parse("01:0c:cd:01:00:10"))
    src: MacAddress = field(default_factory=lambda: MacAddress.parse("dc:37:52:0a:cf:c2"))
    appid: int = 0x1000
    vlan: VlanTag | None = field(default_factory=lambda: VlanTag(4, 0))
    gocb_ref: str = "IED1LD0/LLN0$GO$gcbTrip"
    dat_set: str = "IED1LD0/LLN0$TripStatus"
    go_id: str = "IED1_GOOSE1"
    conf_rev: int = 1
    entries: int = 1
    sender_id: int = 0x00000001
    events: list[float] = field(default_factory=lambda: [2000.0, 8500.0])
    epoch_ms: int = 1_750_000_000_000


@dataclass
class ScenarioConfig:
    profile: TransmissionProfile = field(default_factory=TransmissionProfile)
    publisher: PublisherConfig = field(default_factory=PublisherConfig)
    keystore: KeyStore = field(default_factory=default_keystore)
    key_id: int = DEFAULT_KEY_ID
    modes: list[Mode] = field(default_factory=lambda: list(Mode))
    attacks: dict[AttackKind, AttackSpec] = field(default_factory=default_attacks)
    duration_ms: float = 10_000.0
    seed: int = 1
    bench_packets: int = 100_000
    bench_event_every_ms: float = 1500.0
    report_path: Path | None = None
    pcap_dir: Path | None = None
    source: str | None = None

    def validate(self) -> None:
        for spec in self.attacks.values():
            if spec.trigger_at > self.duration_ms:
                raise ConfigError(f"{spec.kind.value} triggers at {spec.trigger_at} ms, after the scenario ends")
        if self.key_id not in self.keystore.keys:
            raise ConfigError(f"key id {self.key_id:08x} is not in the keystore")


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return n
    return None


def _int(v: str) -> int:
    return int(v, 0)


def _hex32(v: str) -> int:
    n = int(v, 16)
    if not 0 <= n <= 0xFFFFFFFF:
        raise ValueError("not a 32-bit value")
    return n


def _floats(v: str) -> list[float]:
    return [float(x) for x in v.replace(",", " ").split()]


def _names(v: str) -> list[str]:
    return [x.strip().lower() for x in v.replace(",", " ").split() if x.strip()]


def load_config(path, seed: int | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", str(path)) from None
    return parse_config(text, base_dir=path.parent, source=str(path), seed=seed)


def parse_config(text: str, base_dir=None, source: str | None = None, seed: int | None = None) -> ScenarioConfig:
    base_dir = Path(base_dir or ".")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], source, getattr(exc, "lineno", None)) from None

    cfg = ScenarioConfig(source=source)

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}", source, _line_of(text, section, key)) from None

    known = {"scenario", "profile", "publisher", "security", "bench", "output"} | {
        f"attack.{k.value}" for k in AttackKind
    }
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]", source, _line_of(text, section, None))

    cfg.duration_ms = get("scenario", "duration_ms", float, cfg.duration_ms)
    cfg.seed = get("scenario", "seed", int, cfg.seed)
    if seed is not None:
        cfg.seed = seed
    cfg.modes = get("scenario", "modes", lambda v: [Mode(x) for x in _names(v)], cfg.modes)
    attack_names = get("scenario", "attacks", lambda v: [AttackKind(x) for x in _names(v)], None)

    try:
        cfg.profile = TransmissionProfile(
            t0=get("profile", "t0", float, cfg.profile.t0),
            t1=get("profile", "t1", float, cfg.profile.t1),
            ttl_multiplier=get("profile", "ttl_multiplier", float, cfg.profile.ttl_multiplier),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), source, _line_of(text, "profile", None)) from None

    pub = cfg.publisher
    pub.dst = get("publisher", "dst", MacAddress.parse, pub.dst)
    pub.src = get("publisher", "src", MacAddress.parse, pub.src)
    pub.appid = get("publisher", "appid", _int, pub.appid)
    vlan_id = get("publisher", "vlan_id", _int, None)
    vlan_priority = get("publisher", "vlan_priority", _int, None)
    if vlan_id is not None and vlan_id < 0:
        pub.vlan = None
    elif vlan_id is not None or vlan_priority is not None:
        try:
            pub.vlan = VlanTag(4 if vlan_priority is None else vlan_priority, 0 if vlan_id is None else vlan_id)
        except ValueError as exc:
            raise ConfigError(str(exc), source, _line_of(text, "publisher", "vlan_id")) from None
    pub.gocb_ref = get("publisher", "gocb_ref", str, pub.gocb_ref)
    pub.dat_set = get("publisher", "dat_set", str, pub.dat_set)
    pub.go_id = get("publisher", "go_id", str, pub.go_id)
    pub.conf_rev = get("publisher", "conf_rev", _int, pub.conf_rev)
    pub.entries = get("publisher", "entries", _int, pub.entries)
    pub.sender_id = get("publisher", "sender_id", _hex32, pub.sender_id)
    pub.events = get("publisher", "events", _floats, pub.events)

    ks_path = get("security", "keystore", str, None)
    if ks_path is not None:
        full = base_dir / ks_path
        try:
            cfg.keystore = KeyStore.load(full)
        except OSError as exc:
            raise ConfigError(f"keystore {full}: {exc.strerror}", source, _line_of(text, "security", "keystore")) from None
        except ValueError as exc:
            raise ConfigError(f"keystore: {exc}", str(full)) from None
    cfg.key_id = get("security", "key_id", _hex32, cfg.key_id)

    attacks = default_attacks()
    for kind in AttackKind:
        section = f"attack.{kind.value}"
        if not parser.has_section(section):
            continue
        d = attacks[kind]
        select = get(section, "select", lambda v: int(v) if re.fullmatch(r"-?\d+", v) else v, d.select)
        count = get(section, "count", int, None)
        duration = get(section, "duration_ms", float, None)
        if count is None and duration is None:
            count, duration = d.count, d.duration_ms
        try:
            attacks[kind] = AttackSpec(
                kind,
                trigger_at=get(section, "trigger_at", float, d.trigger_at),
                select=select,
                value=get(section, "value", lambda v: {"true": True, "false": False}[v.lower()], d.value),
                rate_hz=get(section, "rate_hz", float, d.rate_hz),
                duration_ms=duration,
                payload=get(section, "payload", str, d.payload),
                count=count,
            )
        except ValueError as exc:
            raise ConfigError(str(exc), source, _line_of(text, section, None)) from None
    if attack_names is not None:
        attacks = {k: attacks[k] for k in attack_names}
    cfg.attacks = attacks

    cfg.bench_packets = get("bench", "packets", int, cfg.bench_packets)
    cfg.bench_event_every_ms = get("bench", "event_every_ms", float, cfg.bench_event_every_ms)
    report = get("output", "report", str, None)
    if report:
        cfg.report_path = base_dir / report
    pcap_dir = get("output", "pcap_dir", str, None)
    if pcap_dir:
        cfg.pcap_dir = base_dir / pcap_dir

    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(str(exc), source) from None
    return cfg
