"""Rule-based GOOSE intrusion detection.

Every stream (source MAC, APPID, goID) is tracked independently.  A packet
is accepted only if its stNum/sqNum continue the stream the way a
publisher would, it does not arrive faster than ``t0`` allows, and the
stream has not carried more packets in the last ``t1`` than a publisher can
legitimately send.

Rules, evaluated in order:

``RATE_EXCEEDED``
    more than ``len(burst_schedule) + 2`` arrivals (accepted or not) in a
    sliding ``t1`` window.  The detector then considers itself out of sync
    and rejects everything until the stream has been quiet for ``t1``.
``SEQ_REPLAY_OR_GAP``
    same stNum, but sqNum is not the previous one plus one.
``EVENT_SEQ``
    stNum advanced by one but sqNum is not zero.
``STNUM_ANOMALY``
    any other stNum.
``TOO_FAST``
    less than ``t0 - jitter_tolerance`` since the last accepted packet.
``TTL_EXPIRED``
    raised by :func:`check_expiry` when nothing has arrived within the last
    announced timeAllowedToLive.

Sequence state only moves on accepted packets, so replays never disturb
it.  A forward jump in the sequence (packets lost in transit) rejects the
packet and drops the stream out of sync; the stream is re-adopted on the
next packet that directly follows the jump, or after a quiet ``t1``.
"""

from __future__ import annotations

import enum
import functools
import hashlib
from dataclasses import dataclass, field, replace

from .codec import GooseApdu, MacAddress, encode_apdu
from .transmission import WRAP, TransmissionProfile, burst_schedule

HALF = WRAP // 2

SEQ_REPLAY_OR_GAP = "SEQ_REPLAY_OR_GAP"
EVENT_SEQ = "EVENT_SEQ"
STNUM_ANOMALY = "STNUM_ANOMALY"
RATE_EXCEEDED = "RATE_EXCEEDED"
TOO_FAST = "TOO_FAST"
TTL_EXPIRED = "TTL_EXPIRED"
NOT_SYNCHRONIZED = "NOT_SYNCHRONIZED"
BASELINE_ADOPTED = "BASELINE_ADOPTED"

INFORMATIONAL = frozenset({BASELINE_ADOPTED})
SEQUENCE_RULES = frozenset({SEQ_REPLAY_OR_GAP, EVENT_SEQ, STNUM_ANOMALY})


class Decision(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass(frozen=True)
class Flag:
    rule: str
    description: str

    @property
    def informational(self) -> bool:
        return self.rule in INFORMATIONAL


@dataclass(frozen=True)
class IdsVerdict:
    decision: Decision
    flags: tuple[Flag, ...] = ()

    def __post_init__(self):
        if self.decision is Decision.REJECT and not self.flags:
            raise ValueError("a rejection must carry at least one flag")

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT


@dataclass(frozen=True)
class StreamKey:
    src: MacAddress
    appid: int
    go_id: str

    def __str__(self) -> str:
        return f"{self.src}/{self.appid:04x}/{self.go_id}"


@dataclass(frozen=True)
class StreamState:
    last_st_num: int = 0
    last_sq_num: int = 0
    last_arrival: float | None = None
    last_accept: float | None = None
    last_ttl: int = 0
    expected_interval: float = 0.0
    burst_position: int | None = None
    # most recent arrival times inside the rate window, at most cap + 1
    window: tuple[float, ...] = ()
    synchronized: bool = False
    fresh: bool = True
    desync_reason: str | None = None
    candidate: tuple[int, int] | None = None
    expired: bool = False

    @property
    def window_start(self) -> float | None:
        return self.window[0] if self.window else None

    @property
    def window_count(self) -> int:
        return len(self.window)


@functools.lru_cache(maxsize=32)
def _schedule(profile: TransmissionProfile) -> tuple[float, ...]:
    return tuple(burst_schedule(profile))


def rate_cap(profile: TransmissionProfile) -> int:
    """Most packets one publisher can send within any ``t1`` window."""
    return len(_schedule(profile)) + 2


def default_jitter(profile: TransmissionProfile) -> float:
    return 0.25 * profile.t0


def _flag(rule: str, description: str) -> Flag:
    return Flag(rule, description)


def _is_successor(prev: tuple[int, int] | None, apdu: GooseApdu) -> bool:
    if prev is None:
        return False
    st, sq = prev
    if apdu.st_num == st:
        return apdu.sq_num == (sq + 1) % WRAP
    return apdu.st_num == (st + 1) % WRAP and apdu.sq_num == 0


def _position(state: StreamState, apdu: GooseApdu, event: bool, sched: tuple) -> tuple[int | None, float]:
    if event:
        pos = 0
    elif state.burst_position is not None:
        pos = state.burst_position + 1
    else:
        pos = None
    if pos is not None and pos >= len(sched) - 1:
        pos = None
    return pos, (sched[pos] if pos is not None else sched[-1])


def on_resync(state: StreamState, apdu: GooseApdu, now: float, profile: TransmissionProfile) -> StreamState:
    """Adopt ``apdu`` as the new sequence baseline and mark the stream in sync."""
    return replace(
        state,
        last_st_num=apdu.st_num,
        last_sq_num=apdu.sq_num,
        last_arrival=now,
        last_accept=now,
        last_ttl=apdu.time_allowed_to_live,
        burst_position=None,
        expected_interval=profile.t1,
        synchronized=True,
        fresh=False,
        desync_reason=None,
        candidate=None,
        expired=False,
    )


def inspect(
    state: StreamState,
    apdu: GooseApdu,
    now: float,
    profile: TransmissionProfile,
    jitter_tolerance: float | None = None,
) -> tuple[IdsVerdict, StreamState]:
    """Judge one packet of a stream; pure in all of its arguments."""
    cap = rate_cap(profile)
    horizon = now - profile.t1
    window = tuple(t for t in state.window if t > horizon) + (now,)
    if len(window) > cap + 1:
        window = window[-(cap + 1) :]
    prev_arrival = state.last_arrival
    base = replace(state, window=window, last_arrival=now, expired=False)

    if state.fresh:
        new = on_resync(base, apdu, now, profile)
        return IdsVerdict(Decision.ACCEPT, (_flag(BASELINE_ADOPTED, "first packet of stream"),)), new

    if len(window) > cap and state.desync_reason != "rate":
        flag = _flag(RATE_EXCEEDED, f"{len(window)} packets within {profile.t1} ms, limit {cap}")
        new = replace(base, synchronized=False, desync_reason="rate", candidate=None)
        return IdsVerdict(Decision.REJECT, (flag,)), new

    if not state.synchronized:
        quiet = prev_arrival is None or now - prev_arrival >= profile.t1
        follows = state.desync_reason == "gap" and _is_successor(state.candidate, apdu)
        if quiet or follows:
            why = "quiet period elapsed" if quiet else "sequence re-established"
            new = on_resync(base, apdu, now, profile)
            return IdsVerdict(Decision.ACCEPT, (_flag(BASELINE_ADOPTED, why),)), new
        flag = _flag(NOT_SYNCHRONIZED, f"stream out of sync ({state.desync_reason})")
        cand = (apdu.st_num, apdu.sq_num) if state.desync_reason == "gap" else None
        return IdsVerdict(Decision.REJECT, (flag,)), replace(base, candidate=cand)

    flags = []
    gap = False
    d_st = (apdu.st_num - state.last_st_num) % WRAP
    if d_st == 0:
        d_sq = (apdu.sq_num - state.last_sq_num) % WRAP
        if d_sq != 1:
            if d_sq == 0 or d_sq >= HALF:
                desc = f"sqNum {apdu.sq_num} repeats or precedes {state.last_sq_num}"
            else:
                desc = f"sqNum jumped from {state.last_sq_num} to {apdu.sq_num}"
                gap = True
            flags.append(_flag(SEQ_REPLAY_OR_GAP, desc))
    elif d_st == 1:
        if apdu.sq_num != 0:
            flags.append(_flag(EVENT_SEQ, f"new stNum {apdu.st_num} starts at sqNum {apdu.sq_num}"))
            gap = True
    else:
        flags.append(_flag(STNUM_ANOMALY, f"stNum {apdu.st_num} after {state.last_st_num}"))
        gap = d_st < HALF

    jitter = default_jitter(profile) if jitter_tolerance is None else jitter_tolerance
    if state.last_accept is not None and now - state.last_accept < profile.t0 - jitter:
        flags.append(_flag(TOO_FAST, f"{now - state.last_accept:g} ms after previous packet"))

    if flags:
        if gap:
            new = replace(base, synchronized=False, desync_reason="gap", candidate=(apdu.st_num, apdu.sq_num))
        else:
            new = base
        return IdsVerdict(Decision.REJECT, tuple(flags)), new

    sched = _schedule(profile)
    pos, expected = _position(state, apdu, d_st == 1, sched)
    new = replace(
        base,
        last_st_num=apdu.st_num,
        last_sq_num=apdu.sq_num,
        last_accept=now,
        last_ttl=apdu.time_allowed_to_live,
        burst_position=pos,
        expected_interval=expected,
    )
    return IdsVerdict(Decision.ACCEPT), new


def check_expiry(state: StreamState, now: float, last_ttl: float | None = None) -> tuple[Flag | None, StreamState]:
    """Raise ``TTL_EXPIRED`` once per silence longer than the announced TTL."""
    ttl = state.last_ttl if last_ttl is None else last_ttl
    if state.last_arrival is None or state.expired:
        return None, state
    silence = now - state.last_arrival
    if silence > ttl:
        flag = _flag(TTL_EXPIRED, f"no packet for {silence:g} ms, timeAllowedToLive {ttl} ms")
        return flag, replace(state, expired=True)
    return None, state


@dataclass(frozen=True)
class FlagEvent:
    time: float
    stream: StreamKey
    rule: str
    description: str
    digest: str = ""

    @property
    def informational(self) -> bool:
        return self.rule in INFORMATIONAL

    def as_record(self) -> dict:
        return {
            "time": self.time,
            "stream": str(self.stream),
            "rule": self.rule,
            "description": self.description,
            "digest": self.digest,
        }


def apdu_digest(apdu: GooseApdu) -> str:
    return hashlib.sha256(encode_apdu(apdu)).hexdigest()[:16]


@dataclass
class RuleIds:
    """Per-stream state table around :func:`inspect` and :func:`check_expiry`."""

    profile: TransmissionProfile = field(default_factory=TransmissionProfile)
    jitter_tolerance: float | None = None
    streams: dict[StreamKey, StreamState] = field(default_factory=dict)

    def inspect(self, key: StreamKey, apdu: GooseApdu, now: float) -> tuple[IdsVerdict, list[FlagEvent]]:
        state = self.streams.get(key, StreamState())
        verdict, self.streams[key] = inspect(state, apdu, now, self.profile, self.jitter_tolerance)
        events = []
        if verdict.flags:
            digest = apdu_digest(apdu)
            events = [FlagEvent(now, key, f.rule, f.description, digest) for f in verdict.flags]
        return verdict, events

    def check_expiry(self, key: StreamKey, now: float) -> FlagEvent | None:
        state = self.streams.get(key)
        if state is None:
            return None
        flag, self.streams[key] = check_expiry(state, now)
        if flag is None:
            return None
        return FlagEvent(now, key, flag.rule, flag.description)
