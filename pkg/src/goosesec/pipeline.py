"""Subscriber-side mitigation: MAC only, IDS only, or MAC then IDS."""

from __future__ import annotations

import enum
import gc
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codec import GooseFrame
from .ids import FlagEvent, RuleIds, StreamKey
from .secure import AuthVerdict, KeyStore, frame_extension, mac_input, verify_bytes
from .transmission import TransmissionProfile

MAC_AUTH_FAILED = "MAC_AUTH_FAILED"
UNKNOWN_KEY = "UNKNOWN_KEY"
NO_AUTH_EXTENSION = "NO_AUTH_EXTENSION"

LOW_CONFIDENCE_SAMPLES = 1000


class Mode(enum.Enum):
    MAC_ONLY = "mac"
    IDS_ONLY = "ids"
    HYBRID = "hybrid"

    @property
    def uses_mac(self) -> bool:
        return self is not Mode.IDS_ONLY

    @property
    def uses_ids(self) -> bool:
        return self is not Mode.MAC_ONLY


class Stage(enum.Enum):
    MAC = "mac"
    IDS = "ids"
    NONE = "none"


class Delivery(enum.Enum):
    DELIVER = "deliver"
    DROP = "drop"


@dataclass(frozen=True)
class Verdict:
    decision: Delivery
    stage: Stage
    flags: tuple[FlagEvent, ...] = ()
    processing_time_ns: int = 0
    # stages the packet actually went through, in order, with their outcome
    trace: tuple[str, ...] = ()

    @property
    def delivered(self) -> bool:
        return self.decision is Delivery.DELIVER


def stream_key(frame: GooseFrame) -> StreamKey:
    return StreamKey(frame.eth.src, frame.pdu.appid, frame.pdu.apdu.go_id)


@dataclass
class FilterPipeline:
    """One subscriber's receive path.

    In hybrid mode a packet that fails MAC verification is dropped before
    the IDS sees it, so forged traffic cannot move the IDS state (its rate
    window included).
    """

    mode: Mode
    keystore: KeyStore | None = None
    ids: RuleIds = field(default_factory=RuleIds)
    log: list[dict] = field(default_factory=list)
    keep_log: bool = True
    # CPU time of this thread: excludes time the OS spends running others
    clock: Callable[[], int] = time.thread_time_ns

    def __post_init__(self):
        if self.mode.uses_mac and self.keystore is None:
            raise ValueError(f"{self.mode.value} mode needs a keystore")

    @classmethod
    def for_profile(cls, mode: Mode, keystore: KeyStore | None, profile: TransmissionProfile, **kw):
        return cls(mode, keystore, RuleIds(profile), **kw)

    def _mac_stage(self, frame: GooseFrame, key: StreamKey, now: float) -> FlagEvent | None:
        ext = frame_extension(frame) if frame.pdu.secured else None
        if ext is None:
            return FlagEvent(now, key, NO_AUTH_EXTENSION, "no usable security extension")
        result = verify_bytes(mac_input(frame.pdu), ext, self.keystore)
        if result is AuthVerdict.AUTHENTIC:
            return None
        if result is AuthVerdict.UNKNOWN_KEY:
            return FlagEvent(now, key, UNKNOWN_KEY, f"key id {ext.key_id:08x} not provisioned")
        return FlagEvent(now, key, MAC_AUTH_FAILED, "MAC tag mismatch")

    def process(self, frame: GooseFrame, now: float) -> Verdict:
        clock = self.clock
        started = clock()
        key = stream_key(frame)
        trace = []
        if self.mode.uses_mac:
            failure = self._mac_stage(frame, key, now)
            if failure is not None:
                trace.append("mac:fail")
                verdict = Verdict(Delivery.DROP, Stage.MAC, (failure,), clock() - started, tuple(trace))
                return self._record(verdict, frame, now)
            trace.append("mac:pass")
        if self.mode.uses_ids:
            ids_verdict, events = self.ids.inspect(key, frame.pdu.apdu, now)
            trace.append("ids:pass" if ids_verdict.accepted else "ids:fail")
            elapsed = clock() - started
            if not ids_verdict.accepted:
                return self._record(Verdict(Delivery.DROP, Stage.IDS, tuple(events), elapsed, tuple(trace)), frame, now)
            return self._record(Verdict(Delivery.DELIVER, Stage.NONE, tuple(events), elapsed, tuple(trace)), frame, now)
        elapsed = clock() - started
        return self._record(Verdict(Delivery.DELIVER, Stage.NONE, (), elapsed, tuple(trace)), frame, now)

    def check_expiry(self, now: float) -> list[FlagEvent]:
        """Evaluate the TTL watch on every stream the IDS knows."""
        if not self.mode.uses_ids:
            return []
        events = []
        for key in list(self.ids.streams):
            ev = self.ids.check_expiry(key, now)
            if ev is not None:
                events.append(ev)
                if self.keep_log:
                    self.log.append(
                        {"time": now, "mode": self.mode.value, "stage": Stage.IDS.value, "decision": "flag",
                         "flags": [ev.rule], "src": str(key.src), "dst": None}
                    )
        return events

    def _record(self, verdict: Verdict, frame: GooseFrame, now: float) -> Verdict:
        if self.keep_log:
            self.log.append(
                {
                    "time": now,
                    "mode": self.mode.value,
                    "stage": verdict.stage.value,
                    "decision": verdict.decision.value,
                    "flags": [f.rule for f in verdict.flags],
                    "src": str(frame.eth.src),
                    "dst": str(frame.eth.dst),
                }
            )
        return verdict


def process(frame: GooseFrame, mode: Mode, keystore: KeyStore | None, ids: RuleIds, now: float) -> Verdict:
    """One-shot form of :meth:`FilterPipeline.process` around an existing IDS table."""
    return FilterPipeline(mode, keystore, ids, keep_log=False).process(frame, now)


@dataclass(frozen=True)
class LatencyStats:
    avg_ms: float
    max_ms: float
    count: int
    p99_ms: float = float("nan")
    wall_avg_ms: float = float("nan")
    wall_max_ms: float = float("nan")

    @property
    def low_confidence(self) -> bool:
        return self.count < LOW_CONFIDENCE_SAMPLES

    def as_record(self) -> dict:
        return {
            "avg_ms": self.avg_ms,
            "max_ms": self.max_ms,
            "p99_ms": self.p99_ms,
            "wall_avg_ms": self.wall_avg_ms,
            "wall_max_ms": self.wall_max_ms,
            "count": self.count,
            "low_confidence": self.low_confidence,
        }


def latency_stats(cpu_ns, wall_ns=None) -> LatencyStats:
    cpu = np.asarray(cpu_ns, dtype=np.float64) / 1e6
    if cpu.size == 0:
        return LatencyStats(float("nan"), float("nan"), 0)
    wall_avg = wall_max = float("nan")
    if wall_ns is not None:
        wall = np.asarray(wall_ns, dtype=np.float64) / 1e6
        wall_avg, wall_max = float(wall.mean()), float(wall.max())
    return LatencyStats(
        float(cpu.mean()), float(cpu.max()), int(cpu.size), float(np.percentile(cpu, 99)), wall_avg, wall_max
    )


def measure(
    stream,
    mode: Mode,
    keystore: KeyStore | None = None,
    profile: TransmissionProfile | None = None,
) -> LatencyStats:
    """Cost of :meth:`FilterPipeline.process` per packet.

    ``stream`` is a sequence of ``(virtual_time_ms, GooseFrame)``; the
    virtual time only feeds the IDS clock.  The headline figures are thread
    CPU time; elapsed wall time is kept alongside (``wall_*``) and includes
    any preemption by the OS.  The garbage collector is paused while timing
    so collection pauses are not charged to a single packet.
    """
    pipe = FilterPipeline.for_profile(mode, keystore, profile or TransmissionProfile(), keep_log=False)
    cpu = np.empty(len(stream), dtype=np.int64)
    wall = np.empty(len(stream), dtype=np.int64)
    perf = time.perf_counter_ns
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i, (now, frame) in enumerate(stream):
            started = perf()
            cpu[i] = pipe.process(frame, now).processing_time_ns
            wall[i] = perf() - started
    finally:
        if was_enabled:
            gc.enable()
    return latency_stats(cpu, wall)
