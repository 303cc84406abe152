"""
What the subscriber prints
==========================

Per-packet console lines for a masquerade under MAC checking and for a
replay under the hybrid pipeline.  Only the lines around the attack are
shown.
"""

from goosesec import AttackKind, Mode, ScenarioConfig, render_trace, run_cell

cfg = ScenarioConfig()
for kind, mode in [(AttackKind.MASQUERADE, Mode.MAC_ONLY), (AttackKind.REPLAY, Mode.HYBRID)]:
    cell = run_cell(cfg, cfg.attacks[kind], mode)
    lines = render_trace(cell).splitlines()
    i = next(n for n, l in enumerate(lines) if "FAIL" in l)
    print(f"--- {kind.value} / {mode.value}")
    print("\n".join(lines[max(0, i - 2) : i + 3]))
