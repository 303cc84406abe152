"""Deterministic discrete-event model of a process bus.

One switch, any number of injecting sources, taps that see every frame
entering the switch, and subscribers that receive whatever the switch
forwards.  Times are virtual milliseconds; events at equal times run in the
order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from typing import Callable

from .codec import DecodeError, GooseFrame, GoosePdu, MacAddress, decode_frame, encode_frame
from .ids import StreamKey

LEGIT = "legit"
ATTACK = "attack"


class SchedulingError(ValueError):
    pass


class VirtualClock:
    def __init__(self, start: float = 0.0):
        self.now = start
        self._queue: list = []
        self._seq = 0

    def schedule(self, actor: str, at: float, action: Callable[[], None]) -> None:
        if at < self.now:
            raise SchedulingError(f"{actor}: cannot schedule at {at}, clock is at {self.now}")
        heapq.heappush(self._queue, (at, self._seq, actor, action))
        self._seq += 1

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: float) -> int:
        """Run every queued action with time <= ``t_end``; return how many ran."""
        n = 0
        while self._queue and self._queue[0][0] <= t_end:
            at, _, _, action = heapq.heappop(self._queue)
            assert at >= self.now, "virtual clock went backwards"
            self.now = at
            action()
            n += 1
        self.now = max(self.now, t_end)
        return n


@dataclass
class SwitchRule:
    """Drop (or explicitly forward) frames from a source or of one stream.

    The rule is live between ``start`` and ``end`` and, if ``max_count`` is
    set, only for its first ``max_count`` matches.
    """

    action: str = "drop"
    src: MacAddress | None = None
    stream: StreamKey | None = None
    start: float = 0.0
    end: float = float("inf")
    max_count: int | None = None
    hits: int = 0

    def matches(self, frame: GooseFrame | None, now: float) -> bool:
        if not self.start <= now < self.end:
            return False
        if self.max_count is not None and self.hits >= self.max_count:
            return False
        if frame is None:
            return self.src is None and self.stream is None
        if self.src is not None and frame.eth.src != self.src:
            return False
        if self.stream is not None:
            key = StreamKey(frame.eth.src, frame.pdu.appid, frame.pdu.apdu.go_id)
            if key != self.stream:
                return False
        return True


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass
class Bus:
    clock: VirtualClock = field(default_factory=VirtualClock)
    hop_delay: float = 0.0
    rules: list[SwitchRule] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    _taps: list = field(default_factory=list)
    _subscribers: list = field(default_factory=list)
    _next_id: int = 0

    def tap(self, fn: Callable[[float, bytes, dict], None]) -> None:
        """``fn(time, wire_bytes, record)`` sees every frame that enters the switch."""
        self._taps.append(fn)

    def attach(self, name: str, fn: Callable[[float, bytes, dict], None]) -> None:
        self._subscribers.append((name, fn))

    def add_rule(self, rule: SwitchRule) -> SwitchRule:
        self.rules.append(rule)
        return rule

    def inject(self, source: str, data: bytes, origin: str = LEGIT) -> dict:
        """Put a frame on the wire now; returns its log record."""
        data = bytes(data)
        frame_id = self._next_id
        self._next_id += 1
        now = self.clock.now
        rec = {"id": frame_id, "t": now, "event": "tx", "source": source, "origin": origin, "digest": digest(data)}
        self.log.append(rec)
        for fn in self._taps:
            fn(now, data, rec)
        self.clock.schedule("switch", now + self.hop_delay, lambda: self._switch(data, rec))
        return rec

    def _switch(self, data: bytes, rec: dict) -> None:
        now = self.clock.now
        try:
            frame = decode_frame(data)
        except DecodeError:
            frame = None
        for rule in self.rules:
            if rule.action == "drop" and rule.matches(frame, now):
                rule.hits += 1
                self.log.append({"id": rec["id"], "t": now, "event": "switch_drop", "origin": rec["origin"]})
                return
        self.log.append({"id": rec["id"], "t": now, "event": "forward", "origin": rec["origin"]})
        for name, fn in self._subscribers:
            self.clock.schedule(name, now + self.hop_delay, lambda fn=fn, name=name: self._deliver(name, fn, data, rec))

    def _deliver(self, name, fn, data, rec) -> None:
        now = self.clock.now
        self.log.append({"id": rec["id"], "t": now, "event": "arrive", "to": name, "origin": rec["origin"]})
        fn(now, data, rec)

    def run_until(self, t_end: float) -> list[dict]:
        self.clock.run_until(t_end)
        return self.log

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.log)


@dataclass
class PublisherActor:
    """Drives a :class:`~goosesec.transmission.Publisher` on the bus.

    ``secure`` is an optional callable turning an unsigned frame into the
    frame to transmit (the MAC generator in front of the publisher).
    """

    bus: Bus
    publisher: object
    eth: object
    appid: int
    name: str = "publisher"
    secure: Callable[[GooseFrame], GooseFrame] | None = None
    sent: int = 0
    _generation: int = 0

    def start(self) -> None:
        self._arm()

    def _arm(self) -> None:
        self._generation += 1
        gen = self._generation
        at = max(self.publisher.state.next_send_at, self.bus.clock.now)
        self.bus.clock.schedule(self.name, at, lambda: self._wake(gen))

    def _wake(self, gen: int) -> None:
        if gen != self._generation:
            return
        now = self.bus.clock.now
        apdu = self.publisher.tick(now)
        if apdu is not None:
            frame = GooseFrame(self.eth, GoosePdu(self.appid, apdu))
            if self.secure is not None:
                frame = self.secure(frame)
            self.bus.inject(self.name, encode_frame(frame), LEGIT)
            self.sent += 1
        self._arm()

    def schedule_event(self, at: float, data) -> None:
        def fire():
            self.publisher.report_event(data, self.bus.clock.now)
            self._arm()

        self.bus.clock.schedule(self.name, at, fire)


@dataclass
class Subscriber:
    """Decodes arriving frames and hands them to a filter pipeline.

    After every frame a TTL watchdog is armed just past the announced
    timeAllowedToLive; it asks the pipeline to evaluate expiry at that time.
    """

    bus: Bus
    pipeline: object
    name: str = "subscriber"
    watchdog_slack: float = 0.5
    results: list = field(default_factory=list)
    expiry_flags: list = field(default_factory=list)

    def attach(self) -> "Subscriber":
        self.bus.attach(self.name, self.receive)
        return self

    def receive(self, now: float, data: bytes, rec: dict) -> None:
        try:
            frame = decode_frame(data)
        except DecodeError as exc:
            self.results.append((rec, None, f"decode:{type(exc).__name__}"))
            return
        verdict = self.pipeline.process(frame, now)
        self.results.append((rec, verdict, None))
        if self.pipeline.mode.uses_ids:
            key = StreamKey(frame.eth.src, frame.pdu.appid, frame.pdu.apdu.go_id)
            state = self.pipeline.ids.streams.get(key)
            if state is not None and state.last_arrival == now:
                self.bus.clock.schedule(self.name, now + state.last_ttl + self.watchdog_slack, self._watch)

    def _watch(self) -> None:
        self.expiry_flags.extend(self.pipeline.check_expiry(self.bus.clock.now))


def real_time_mode(stream, pipeline) -> "object":
    """Push pre-generated ``(virtual_ms, frame)`` pairs through ``pipeline``
    back to back under the wall clock and return latency statistics."""
    from .pipeline import measure

    return measure(stream, pipeline.mode, pipeline.keystore, pipeline.ids.profile)
