"""Door actuator fault at the destination, with and without a passenger able
to work the manual release. Only the first case is a trapping risk.

    python demos/trapped_passenger.py
"""

from companion_av.harness.runner import run
from companion_av.harness.scenario import load_scenario

for name in ("S5", "S5_capable"):
    log = run(load_scenario(f"builtin:{name}"))
    hazards = sorted({h["kind"] for r in log.of_type("hazards") for h in r.payload["hazards"]})
    print(f"{name:<11} outcome={log.outcome:<10} hazards={hazards or '-'} alerts={len(log.alerts)}")
    for r in log.of_type("user_event"):
        print(f"            {r.tick / 1000:.0f} s {r.payload['event']['kind']} by "
              f"{r.payload['event']['actor']}: {r.payload['status']} {r.payload.get('reason', '')}")
