"""Walk through the medical-emergency run: the passenger's heart rate spikes
on the way to C, the strategic level weighs its four options and diverts to
the care facility at H while calling a rescue service.

    python demos/medical_diversion.py
"""

import json

from companion_av.harness.runner import run
from companion_av.harness.scenario import load_scenario


def main():
    log = run(load_scenario("builtin:S4"))
    last = None
    for r in log.records:
        if r.type == "hazards" and r.payload["hazards"]:
            h = r.payload["hazards"][0]
            print(f"{r.tick / 1000:7.1f} s  hazard {h['kind']} for {h['subject']} (severity {h['severity']})")
        elif r.type == "plan" and r.payload["rationale"] and (r.payload["action"], r.payload["goal"]) != last:
            last = (r.payload["action"], r.payload["goal"])
            print(f"{r.tick / 1000:7.1f} s  options considered:")
            for o in r.payload["rationale"]:
                s = o["score"]
                print(f"             {o['action']:<17} {str(o['goal']):<5} severity={s['severity']} "
                      f"resolve={s['time_to_resolution']} delay={s['mission_delay']}")
            print(f"             chosen: {r.payload['action']} -> {r.payload['goal']} via {r.payload['route']}")
        elif r.type == "alert":
            print(f"{r.tick / 1000:7.1f} s  alert sent: {r.payload['message']}")
    print("verdict:", json.dumps(log.verdict))


if __name__ == "__main__":
    main()
