"""
Retransmission after an event
=============================

A publisher repeats its last status every t1.  When the status changes it
bumps stNum, restarts sqNum at zero and sends a burst whose spacing doubles
from t0 until it is back at t1.  timeAllowedToLive tracks the interval to
the next frame.
"""

import numpy as np

from goosesec import GooseApdu, Publisher, TransmissionProfile, burst_schedule

profile = TransmissionProfile(t0=2, t1=1000)
print("burst schedule (ms):", burst_schedule(profile))

pub = Publisher(
    GooseApdu("IED1LD0/LLN0$GO$gcbTrip", 2000, "IED1LD0/LLN0$TripStatus", "IED1_GOOSE1", 0, 1, 0, all_data=(False,)),
    profile,
)
rows = []
event_at = 2500.0
while pub.state.next_send_at < 6000:
    t = pub.state.next_send_at
    if event_at is not None and t >= event_at:
        pub.report_event((True,), event_at)
        event_at = None
        continue
    a = pub.tick(t)
    rows.append((t, a.st_num, a.sq_num, a.time_allowed_to_live))

rows = np.array(rows)
print(f"{'t/ms':>8} {'stNum':>6} {'sqNum':>6} {'TTL/ms':>7}")
for t, stn, sqn, ttl in rows:
    print(f"{t:8.0f} {int(stn):6d} {int(sqn):6d} {int(ttl):7d}")
print("gaps after the event:", np.diff(rows[rows[:, 1] == 2][:, 0]).tolist())
