"""Reactive alert: switch a flag on while the robot is inside a zone.

The mission pairs the patrol with a reaction rule over the right-hand
column.  We replay the enactment trace and print each zone entry/exit
next to the moment the simulated alert flag changed.

    python demos/alert_zone.py
"""
from importlib.resources import files

from missionsynth.pipeline import simulate_mission, synthesize_mission
from missionsynth.workspace import load_mission, parse_cell_action

mission = load_mission(files("missionsynth") / "data" / "mission3.msn")
zone = set(mission.reactions[0].zone)
syn = synthesize_mission(mission)
print(syn.report())

res = simulate_mission(mission, syn.controller, budget=120.0)
inside, changes = False, []
for e in res.trace.entries:
    parsed = parse_cell_action(e.action)
    if parsed and parsed[0] == "arrived" and (parsed[1] in zone) != inside:
        inside = parsed[1] in zone
        changes.append((e.t, inside))

print("\n  zone change       flag change")
for (tz, z), (tf, f) in zip(changes, res.alert_timeline[1:]):
    print(f"  t={tz:7.2f} {'in ' if z else 'out'}   t={tf:7.2f} {'on' if f else 'off'}")
