"""Attack generators working from traffic captured on the bus."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace

from .bussim import ATTACK, Bus, SwitchRule
from .codec import GooseFrame, decode_frame, encode_frame, frame_to_pcap
from .ids import StreamKey
from .secure import EXTENSION_LEN, IV_LEN, KEY_ID_LEN, TAG_LEN
from .transmission import WRAP


class AttackKind(enum.Enum):
    REPLAY = "replay"
    MASQUERADE = "masquerade"
    FLOOD = "flood"
    DROP = "drop"


FLOOD_PAYLOADS = ("unauthentic", "verbatim", "increment")


@dataclass(frozen=True)
class AttackSpec:
    """What to do and when.

    replay: ``select`` picks the captured frame (``"event"``, ``"last"`` or
    an archive index).  masquerade: ``value`` is written to every data set
    member.  flood: ``rate_hz`` for ``duration_ms``; ``payload`` is
    ``"unauthentic"`` (captured frame, tag the attacker cannot compute),
    ``"verbatim"`` (bit-exact copies) or ``"increment"`` (sqNum advanced per
    copy).  drop: ``count`` frames, or everything for ``duration_ms``.
    """

    kind: AttackKind
    trigger_at: float
    select: str | int = "event"
    value: bool = True
    rate_hz: float = 1000.0
    duration_ms: float | None = None
    payload: str = "unauthentic"
    count: int | None = None

    def __post_init__(self):
        if self.kind is AttackKind.FLOOD:
            if self.rate_hz <= 0 or not self.duration_ms or self.duration_ms <= 0:
                raise ValueError("flood needs a positive rate and duration")
            if self.payload not in FLOOD_PAYLOADS:
                raise ValueError(f"flood payload must be one of {FLOOD_PAYLOADS}")
        if self.kind is AttackKind.DROP:
            if self.count is None and self.duration_ms is None:
                raise ValueError("drop needs a packet count or a duration")
            if (self.count is not None and self.count < 0) or (self.duration_ms is not None and self.duration_ms < 0):
                raise ValueError("drop count and duration cannot be negative")


class Archive:
    """Time-ordered, bit-exact copies of frames seen on the bus."""

    def __init__(self):
        self.entries: list[tuple[float, bytes]] = []

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, t: float, data: bytes) -> None:
        self.entries.append((t, bytes(data)))

    def select(self, selector: str | int = "last") -> tuple[float, bytes]:
        if not self.entries:
            raise IndexError("nothing captured yet")
        if isinstance(selector, int):
            return self.entries[selector]
        if selector == "last":
            return self.entries[-1]
        if selector == "event":
            # latest frame whose stNum differs from the frame before it
            frames = [decode_frame(d).pdu.apdu.st_num for _, d in self.entries]
            for i in range(len(frames) - 1, 0, -1):
                if frames[i] != frames[i - 1]:
                    return self.entries[i]
            return self.entries[0]
        raise ValueError(f"unknown selector {selector!r}")

    def to_pcap(self) -> bytes:
        return frame_to_pcap(self.entries)


def capture(bus: Bus, exclude_source: str | None = None) -> Archive:
    """Tap ``bus`` and archive every frame not sent by ``exclude_source``."""
    archive = Archive()

    def tap(t, data, rec):
        if rec["source"] != exclude_source:
            archive.record(t, data)

    bus.tap(tap)
    return archive


def replay_attack(archive: Archive, spec: AttackSpec) -> list[tuple[float, bytes]]:
    _, data = archive.select(spec.select)
    return [(spec.trigger_at, data)]


def _forge_tag(frame: GooseFrame, rng: random.Random) -> GooseFrame:
    ext = frame.extension
    if not ext or len(ext) != EXTENSION_LEN:
        return frame
    tag = rng.getrandbits(8 * TAG_LEN).to_bytes(TAG_LEN, "big")
    return replace(frame, extension=ext[: IV_LEN + KEY_ID_LEN] + tag)


def masquerade_attack(
    archive: Archive,
    spec: AttackSpec,
    observed: tuple[int, int] | None = None,
) -> tuple[float, bytes]:
    """Forge the next event of the stream: stNum+1, sqNum 0, data set to ``value``.

    The captured security extension is copied unchanged.
    """
    _, data = archive.select("last")
    frame = decode_frame(data)
    apdu = frame.pdu.apdu
    st = apdu.st_num if observed is None else observed[0]
    forged = replace(
        apdu,
        st_num=(st + 1) % WRAP,
        sq_num=0,
        t=int(spec.trigger_at),
        all_data=tuple(spec.value for _ in apdu.all_data),
    )
    frame = replace(frame, pdu=replace(frame.pdu, apdu=forged))
    return spec.trigger_at, encode_frame(frame)


def flood_attack(archive: Archive, spec: AttackSpec, rng: random.Random | None = None) -> list[tuple[float, bytes]]:
    rng = rng or random.Random(0)
    t, data = archive.select("last")
    n = round(spec.rate_hz * spec.duration_ms / 1000.0)
    step = 1000.0 / spec.rate_hz
    base = decode_frame(data)
    out = []
    for k in range(n):
        if spec.payload == "verbatim":
            wire = data
        else:
            frame = base
            if spec.payload == "increment":
                apdu = frame.pdu.apdu
                apdu = replace(apdu, sq_num=(apdu.sq_num + k + 1) % WRAP)
                frame = replace(frame, pdu=replace(frame.pdu, apdu=apdu))
            wire = encode_frame(_forge_tag(frame, rng))
        out.append((spec.trigger_at + k * step, wire))
    return out


def drop_attack(bus: Bus, spec: AttackSpec, stream: StreamKey | None = None) -> SwitchRule:
    """Install a switch rule discarding ``count`` frames or ``duration_ms`` of traffic."""
    end = float("inf") if spec.duration_ms is None else spec.trigger_at + spec.duration_ms
    return bus.add_rule(SwitchRule("drop", stream=stream, start=spec.trigger_at, end=end, max_count=spec.count))


class Attacker:
    """Attacker actor on the bus: captures everything and runs scheduled attacks."""

    def __init__(self, bus: Bus, name: str = "attacker", seed: int = 0):
        self.bus = bus
        self.name = name
        self.rng = random.Random(seed)
        self.archive = capture(bus, exclude_source=name)
        self.injected: list[dict] = []
        self.rules: list[SwitchRule] = []

    def launch(self, spec: AttackSpec, stream: StreamKey | None = None) -> None:
        if spec.kind is AttackKind.DROP:
            self.rules.append(drop_attack(self.bus, spec, stream))
            return
        self.bus.clock.schedule(self.name, spec.trigger_at, lambda: self._fire(spec))

    def _fire(self, spec: AttackSpec) -> None:
        if spec.kind is AttackKind.REPLAY:
            plan = replay_attack(self.archive, spec)
        elif spec.kind is AttackKind.MASQUERADE:
            plan = [masquerade_attack(self.archive, spec)]
        else:
            plan = flood_attack(self.archive, spec, self.rng)
        for at, data in plan:
            self.bus.clock.schedule(self.name, at, lambda data=data: self._inject(data))

    def _inject(self, data: bytes) -> None:
        self.injected.append(self.bus.inject(self.name, data, ATTACK))
