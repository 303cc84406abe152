"""
Four attacks against three defences
===================================

Each of replay, masquerade, flooding and packet drop is run against a
subscriber that checks MAC tags only, runs the rule-based IDS only, or
does both in sequence.  Every cell is its own deterministic simulation.
"""

from goosesec import ScenarioConfig, render_report, run_matrix

report = run_matrix(ScenarioConfig())
print(render_report(report).decode())
print("differences from the expected outcomes:", report.mismatches() or "none")
