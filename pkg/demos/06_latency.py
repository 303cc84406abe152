"""
Per-packet processing cost
==========================

Signed legitimate traffic, steady and burst, is pushed back to back
through each receive path.  Times are thread CPU time; wall-clock figures
are shown alongside and include whatever the OS was doing meanwhile.
"""

from goosesec import ScenarioConfig, bench
from goosesec.scenario import render_latency

stats = bench(ScenarioConfig(), packets=20_000)
print(render_latency(stats))
for mode, s in stats.items():
    print(f"{mode.value:>6}: p99 {s.p99_ms:.4f} ms, wall avg {s.wall_avg_ms:.4f} ms, wall max {s.wall_max_ms:.4f} ms")
