"""Publisher-side GOOSE retransmission.

In steady state a publisher repeats its last message every ``t1``.  An
event bumps ``stNum``, resets ``sqNum`` and restarts transmission at the
minimum interval ``t0``, doubling the interval after every frame until it is
back at ``t1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .codec import UINT32_MAX, GooseApdu

WRAP = UINT32_MAX + 1


@dataclass(frozen=True)
class TransmissionProfile:
    t0: float = 2.0
    t1: float = 1000.0
    ttl_multiplier: float = 2.0

    def __post_init__(self):
        if not 0 < self.t0 < self.t1:
            raise ValueError(f"need 0 < t0 < t1, got t0={self.t0}, t1={self.t1}")
        if self.ttl_multiplier < 2:
            raise ValueError("ttl_multiplier must be at least 2")

    def ttl_for(self, interval: float) -> int:
        return math.ceil(self.ttl_multiplier * interval)


def burst_schedule(profile: TransmissionProfile) -> list[float]:
    """Intervals between frames after an event, ending at the first ``t1``.

    >>> burst_schedule(TransmissionProfile(2, 1000))
    [2, 4, 8, 16, 32, 64, 128, 256, 512, 1000]
    """
    out = []
    step = profile.t0
    while step < profile.t1:
        out.append(step)
        step *= 2
    out.append(profile.t1)
    return out


@dataclass
class PublisherState:
    st_num: int = 0
    sq_num: int = 0
    current_interval: float = 1000.0
    next_send_at: float = 0.0
    event_data: tuple[bool, ...] = ()
    last_sent_at: float | None = None
    event_t: int = 0
    # an event was reported and its first frame has not gone out yet
    event_pending: bool = False


@dataclass
class Publisher:
    """One GOOSE control block's transmission state machine.

    ``template`` supplies the identity fields (gocbRef, datSet, goID, ...);
    stNum, sqNum, t, timeAllowedToLive and allData are filled in per frame.
    Times are virtual milliseconds.
    """

    template: GooseApdu
    profile: TransmissionProfile = field(default_factory=TransmissionProfile)
    state: PublisherState | None = None
    start_at: float = 0.0

    def __post_init__(self):
        if self.state is None:
            self.state = PublisherState(
                st_num=self.template.st_num,
                sq_num=self.template.sq_num,
                current_interval=self.profile.t1,
                next_send_at=self.start_at,
                event_data=self.template.all_data,
                event_t=self.template.t,
            )

    def due(self, now: float) -> bool:
        return now >= self.state.next_send_at

    def tick(self, now: float) -> GooseApdu | None:
        """Emit the next frame if one is due at ``now``.

        The next deadline is computed from the scheduled send time, not from
        ``now``, so a virtual clock reproduces the burst schedule exactly.
        """
        s = self.state
        if now < s.next_send_at:
            return None
        interval = s.current_interval
        apdu = replace(
            self.template,
            st_num=s.st_num,
            sq_num=s.sq_num,
            t=s.event_t,
            time_allowed_to_live=self.profile.ttl_for(interval),
            all_data=s.event_data,
        )
        s.sq_num = (s.sq_num + 1) % WRAP
        s.last_sent_at = now
        s.event_pending = False
        s.next_send_at = s.next_send_at + interval
        s.current_interval = min(interval * 2, self.profile.t1)
        return apdu

    def report_event(self, new_data, now: float) -> PublisherState:
        """Start a new status: stNum+1, sqNum 0, burst from ``t0``.

        The first burst frame goes out at ``now``, or ``t0`` after the
        previous frame if that is later, so no two frames of a stream are
        ever closer than ``t0``.  Reports arriving before that frame is sent
        merge into the pending status change: stNum advances once and the
        latest data is published.
        """
        s = self.state
        if not s.event_pending:
            s.st_num = (s.st_num + 1) % WRAP
        s.event_pending = True
        s.sq_num = 0
        s.current_interval = self.profile.t0
        s.event_data = tuple(bool(v) for v in new_data)
        s.event_t = self.template.t + int(now)
        earliest = now if s.last_sent_at is None else max(now, s.last_sent_at + self.profile.t0)
        s.next_send_at = earliest
        return s

