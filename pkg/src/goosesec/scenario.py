"""Attack x mitigation scenarios, their outcome classification and reports.

Each matrix cell is an independent simulation: a publisher (signing its
frames when the mode uses MAC verification), an attacker tapping the bus,
and one subscriber running the filter pipeline under test.

Outcome per cell:

detection
    Pass when at least one flag is attributable to the attack and no flag
    was raised against legitimate traffic for any other reason.  A flag is
    attributable when it was raised on an attacker frame, or, for a drop
    attack, between the first dropped frame and the detector's next
    acceptance of a legitimate frame (the sequence gap and TTL expiry the
    drop causes).  Flags on legitimate frames outside that window are false
    alarms, which is how a detector that has lost track of the stream shows.
mitigation
    Pass when no attacker frame was delivered and every legitimate frame
    sent during the run was delivered.  Drop attacks always Fail: the
    discarded frames never reach the subscriber.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .attacks import AttackKind, Attacker, AttackSpec
from .bussim import ATTACK, LEGIT, Bus, PublisherActor, Subscriber
from .codec import EthernetHeader, GooseApdu, GooseFrame, GoosePdu, frame_to_pcap
from .config import ScenarioConfig
from .ids import INFORMATIONAL, RuleIds, StreamKey
from .pipeline import Delivery, FilterPipeline, LatencyStats, Mode, Stage, measure
from .secure import sign_frame
from .transmission import Publisher

PASS = "Pass"
FAIL = "Fail"

GOLDEN_MATRIX = {
    Mode.MAC_ONLY: {
        AttackKind.REPLAY: (FAIL, FAIL),
        AttackKind.MASQUERADE: (PASS, PASS),
        AttackKind.FLOOD: (PASS, PASS),
        AttackKind.DROP: (FAIL, FAIL),
    },
    Mode.IDS_ONLY: {
        AttackKind.REPLAY: (PASS, PASS),
        AttackKind.MASQUERADE: (FAIL, FAIL),
        AttackKind.FLOOD: (FAIL, FAIL),
        AttackKind.DROP: (PASS, FAIL),
    },
    Mode.HYBRID: {
        AttackKind.REPLAY: (PASS, PASS),
        AttackKind.MASQUERADE: (PASS, PASS),
        AttackKind.FLOOD: (PASS, PASS),
        AttackKind.DROP: (PASS, FAIL),
    },
}

MODE_TITLES = {
    Mode.MAC_ONLY: "MAC verification",
    Mode.IDS_ONLY: "Rule-based IDS",
    Mode.HYBRID: "Hybrid approach",
}
ATTACK_TITLES = {
    AttackKind.REPLAY: "Replay",
    AttackKind.MASQUERADE: "Masquerade",
    AttackKind.FLOOD: "Flooding",
    AttackKind.DROP: "Packet drop",
}


@dataclass
class Cell:
    attack: AttackKind
    mode: Mode
    detection: str
    mitigation: str
    evidence: dict
    verdict_log: list = field(default_factory=list, repr=False)
    bus_log: list = field(default_factory=list, repr=False)
    wire: list = field(default_factory=list, repr=False)
    # subscriber view: (bus record, Verdict | None, decode error | None)
    results: list = field(default_factory=list, repr=False)
    expiry_flags: list = field(default_factory=list, repr=False)
    wire_by_id: dict = field(default_factory=dict, repr=False)

    def as_record(self) -> dict:
        return {
            "attack": self.attack.value,
            "mode": self.mode.value,
            "detection": self.detection,
            "mitigation": self.mitigation,
            "evidence": self.evidence,
        }


@dataclass
class ScenarioReport:
    cells: dict = field(default_factory=dict)
    latency: dict | None = None
    seed: int | None = None

    def outcome(self, attack: AttackKind, mode: Mode) -> tuple[str, str]:
        c = self.cells[(attack, mode)]
        return c.detection, c.mitigation

    def mismatches(self) -> list[str]:
        out = []
        for (attack, mode), cell in sorted(self.cells.items(), key=lambda kv: (kv[0][1].value, kv[0][0].value)):
            want = GOLDEN_MATRIX[mode][attack]
            got = (cell.detection, cell.mitigation)
            if got != want:
                out.append(f"{MODE_TITLES[mode]} / {ATTACK_TITLES[attack]}: got {'/'.join(got)}, expected {'/'.join(want)}")
        return out

    def as_record(self) -> dict:
        rec = {
            "seed": self.seed,
            "cells": [
                self.cells[k].as_record()
                for k in sorted(self.cells, key=lambda k: (list(Mode).index(k[1]), list(AttackKind).index(k[0])))
            ],
        }
        if self.latency is not None:
            rec["latency"] = {m.value: s.as_record() for m, s in self.latency.items()}
        return rec


def _template(cfg: ScenarioConfig) -> GooseApdu:
    pub = cfg.publisher
    return GooseApdu(
        gocb_ref=pub.gocb_ref,
        time_allowed_to_live=cfg.profile.ttl_for(cfg.profile.t1),
        dat_set=pub.dat_set,
        go_id=pub.go_id,
        t=pub.epoch_ms,
        st_num=0,
        sq_num=0,
        conf_rev=pub.conf_rev,
        all_data=(False,) * pub.entries,
    )


def build_publisher(cfg: ScenarioConfig, bus: Bus, signed: bool) -> PublisherActor:
    pub = cfg.publisher
    eth = EthernetHeader(pub.dst, pub.src, pub.vlan)
    secure = None
    if signed:
        cfg.keystore.set_active(pub.sender_id, cfg.key_id)
        secure = lambda f: sign_frame(f, cfg.keystore, pub.sender_id)  # noqa: E731
    actor = PublisherActor(bus, Publisher(_template(cfg), cfg.profile), eth, pub.appid, secure=secure)
    value = False
    for at in pub.events:
        value = not value
        actor.schedule_event(at, (value,) * pub.entries)
    return actor


def run_cell(cfg: ScenarioConfig, attack: AttackSpec, mode: Mode) -> Cell:
    bus = Bus()
    wire, wire_by_id = [], {}

    def tap(t, data, rec):
        wire.append((t, data))
        wire_by_id[rec["id"]] = data

    bus.tap(tap)
    publisher = build_publisher(cfg, bus, signed=mode.uses_mac)
    pipeline = FilterPipeline(mode, cfg.keystore if mode.uses_mac else None, RuleIds(cfg.profile))
    subscriber = Subscriber(bus, pipeline).attach()
    attacker = Attacker(bus, seed=cfg.seed)
    stream = StreamKey(cfg.publisher.src, cfg.publisher.appid, cfg.publisher.go_id)
    publisher.start()
    attacker.launch(attack, stream)
    bus.run_until(cfg.duration_ms)
    detection, mitigation, evidence = classify(attack, bus.log, subscriber)
    return Cell(
        attack.kind, mode, detection, mitigation, evidence, pipeline.log, bus.log, wire,
        subscriber.results, subscriber.expiry_flags, wire_by_id,
    )


def classify(attack: AttackSpec, bus_log: list, subscriber: Subscriber) -> tuple[str, str, dict]:
    sent = [r for r in bus_log if r["event"] == "tx"]
    switch_drops = [r for r in bus_log if r["event"] == "switch_drop"]
    legit_ids = {r["id"] for r in sent if r["origin"] == LEGIT}
    attack_ids = {r["id"] for r in sent if r["origin"] == ATTACK}

    delivered, dropped = set(), set()
    frame_flags = []  # (time, frame_id, origin, rule)
    for rec, verdict, decode_error in subscriber.results:
        if verdict is not None and verdict.decision is Delivery.DELIVER:
            delivered.add(rec["id"])
        else:
            dropped.add(rec["id"])
        if verdict is not None:
            for f in verdict.flags:
                if f.rule not in INFORMATIONAL:
                    frame_flags.append((f.time, rec["id"], rec["origin"], f.rule))
    ttl_flags = [(f.time, None, None, f.rule) for f in subscriber.expiry_flags]

    window = None
    if attack.kind is AttackKind.DROP:
        start = attack.trigger_at
        last_drop = max((r["t"] for r in switch_drops), default=None)
        end = float("inf")
        if last_drop is not None:
            later = [
                rec["t"]
                for rec, v, _ in subscriber.results
                if v is not None and v.delivered and rec["origin"] == LEGIT and rec["t"] > last_drop
            ]
            end = min(later, default=float("inf"))
        window = (start, end)

    def attributable(flag) -> bool:
        t, _, origin, _ = flag
        if origin == ATTACK:
            return True
        return window is not None and window[0] <= t <= window[1]

    all_flags = frame_flags + ttl_flags
    hits = [f for f in all_flags if attributable(f)]
    false_alarms = [f for f in all_flags if not attributable(f)]
    detection = PASS if hits and not false_alarms else FAIL

    legit_delivered = legit_ids & delivered
    attack_delivered = attack_ids & delivered
    mitigated = not attack_delivered and legit_delivered == legit_ids and attack.kind is not AttackKind.DROP
    mitigation = PASS if mitigated else FAIL

    by_rule: dict[str, int] = {}
    for f in all_flags:
        by_rule[f[3]] = by_rule.get(f[3], 0) + 1
    evidence = {
        "legit_sent": len(legit_ids),
        "legit_delivered": len(legit_delivered),
        "legit_dropped": len(legit_ids & dropped),
        "legit_lost_in_switch": len([r for r in switch_drops if r["origin"] == LEGIT]),
        "attack_sent": len(attack_ids),
        "attack_delivered": len(attack_delivered),
        "attack_dropped": len(attack_ids & dropped),
        "attack_lost_in_switch": len([r for r in switch_drops if r["origin"] == ATTACK]),
        "flags": dict(sorted(by_rule.items())),
        "attributable_flags": len(hits),
        "false_alarms": len(false_alarms),
    }
    return detection, mitigation, evidence


def run_matrix(cfg: ScenarioConfig) -> ScenarioReport:
    report = ScenarioReport(seed=cfg.seed)
    for mode in cfg.modes:
        for kind, spec in cfg.attacks.items():
            report.cells[(kind, mode)] = run_cell(cfg, spec, mode)
    return report


# -- latency bench ----------------------------------------------------------


def bench_stream(cfg: ScenarioConfig, packets: int | None = None) -> list[tuple[float, GooseFrame]]:
    """Signed legitimate traffic with an event every ``bench_event_every_ms``."""
    packets = cfg.bench_packets if packets is None else packets
    pub = cfg.publisher
    publisher = Publisher(_template(cfg), cfg.profile)
    eth = EthernetHeader(pub.dst, pub.src, pub.vlan)
    cfg.keystore.set_active(pub.sender_id, cfg.key_id)
    out = []
    next_event = cfg.bench_event_every_ms
    value = False
    while len(out) < packets:
        t = publisher.state.next_send_at
        if t >= next_event:
            value = not value
            publisher.report_event((value,) * pub.entries, next_event)
            next_event += cfg.bench_event_every_ms
            t = publisher.state.next_send_at
        apdu = publisher.tick(t)
        frame = sign_frame(GooseFrame(eth, GoosePdu(pub.appid, apdu)), cfg.keystore, pub.sender_id)
        out.append((t, frame))
    return out


def bench(cfg: ScenarioConfig, packets: int | None = None) -> dict[Mode, LatencyStats]:
    stream = bench_stream(cfg, packets)
    return {mode: measure(stream, mode, cfg.keystore, cfg.profile) for mode in Mode}


def render_latency(stats: dict[Mode, LatencyStats]) -> str:
    lines = [f"{'Technique':<18}{'Average processing time/ms':>28}{'Maximum processing time/ms':>28}{'Samples':>10}"]
    for mode in Mode:
        if mode in stats:
            s = stats[mode]
            lines.append(f"{MODE_TITLES[mode]:<18}{s.avg_ms:>28.4f}{s.max_ms:>28.4f}{s.count:>10}")
    return "\n".join(lines) + "\n"


# -- rendering --------------------------------------------------------------


def render_trace(cell: Cell) -> str:
    """Console trace of one cell, one line per packet seen by the subscriber."""
    lines = []
    for rec in cell.verdict_log:
        dst, src = rec["dst"], rec["src"]
        if rec["decision"] == "flag":
            lines.append(f"! GOOSE IDS flag {','.join(rec['flags'])} on stream from {src}")
            continue
        ok = rec["decision"] == Delivery.DELIVER.value
        if cell.mode is Mode.MAC_ONLY:
            word = "PASS. Forwarding" if ok else "FAIL. Dropping"
            lines.append(f"{'✓' if ok else '✗'} GOOSE ({dst}) MAC Auth {word} packet from {src}")
        elif ok:
            label = "Auth + IDS" if cell.mode is Mode.HYBRID else "IDS"
            lines.append(f"✓ GOOSE ({dst}) {label} PASS. Forwarding packet from {src}")
        elif rec["stage"] == Stage.MAC.value:
            lines.append(f"✗ GOOSE ({dst}) MAC Auth FAIL. Dropping packet from {src}")
        else:
            lines.append(f"✗ GOOSE IDS ({dst}) FAIL. Dropping packet from {src}")
    return "\n".join(lines) + ("\n" if lines else "")


def _render_text(report: ScenarioReport) -> str:
    out = []
    for mode in Mode:
        out.append(f"{MODE_TITLES[mode]}\n")
        out.append(f"  {'Attack type':<14}{'Detection':<11}{'Mitigation':<11}Evidence\n")
        for kind in AttackKind:
            cell = report.cells.get((kind, mode))
            if cell is None:
                continue
            ev = cell.evidence
            flags = ", ".join(f"{k}x{v}" for k, v in ev["flags"].items()) or "none"
            note = (
                f"legit {ev['legit_delivered']}/{ev['legit_sent']} delivered, "
                f"attack {ev['attack_delivered']}/{ev['attack_sent']} delivered, flags: {flags}"
            )
            out.append(f"  {ATTACK_TITLES[kind]:<14}{cell.detection:<11}{cell.mitigation:<11}{note}\n")
        out.append("\n")
    if report.latency:
        out.append(render_latency(report.latency))
    return "".join(out)


def render_report(report: ScenarioReport, fmt: str = "text") -> bytes:
    if fmt == "text":
        return _render_text(report).encode("utf-8")
    if fmt in ("json", "structured"):
        return (json.dumps(report.as_record(), indent=2, sort_keys=True) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def export_captures(report: ScenarioReport, directory) -> list[Path]:
    """Write every cell's bus traffic to ``<attack>_<mode>.pcap``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for (kind, mode), cell in sorted(report.cells.items(), key=lambda kv: (kv[0][1].value, kv[0][0].value)):
        path = directory / f"{kind.value}_{mode.value}.pcap"
        path.write_bytes(frame_to_pcap(cell.wire))
        paths.append(path)
    return paths
