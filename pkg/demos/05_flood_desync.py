"""
Flooding knocks the IDS out of step
===================================

A 1000 frames/s flood of captured frames with bad tags hits the
subscriber for two seconds.  The IDS on its own counts every one of them,
trips its rate limit and then refuses the real publisher too until the
stream goes quiet.  With the MAC check in front, the flood never reaches
the IDS.
"""

import numpy as np

from goosesec import AttackKind, Mode, ScenarioConfig, run_cell

cfg = ScenarioConfig()
spec = cfg.attacks[AttackKind.FLOOD]
for mode in (Mode.IDS_ONLY, Mode.HYBRID):
    cell = run_cell(cfg, spec, mode)
    legit = [(rec["t"], v.delivered) for rec, v, _ in cell.results if rec["origin"] == "legit"]
    t, ok = np.array(legit).T
    lost = t[ok == 0]
    print(f"{mode.value:>6}: {int(ok.sum())}/{len(ok)} legitimate frames delivered; refused at {lost.tolist()}")
