"""Run a batch of random disturbance schedules and count interlock breaches.

    python demos/fuzz_interlocks.py [N]
"""

import sys
from collections import Counter

from companion_av.harness.fuzz import random_scenario
from companion_av.harness.runner import run


def breaches(log):
    n = 0
    for r in log.of_type("vehicle"):
        v = r.payload
        n += v["door"] != "CLOSED" and v["speed"] > 0.5
        n += v["platform"] in ("DEPLOYING", "LIFTING", "STOWING") and v["door"] != "OPEN"
    return n


def main(count):
    outcomes, total = Counter(), 0
    for seed in range(count):
        log = run(random_scenario(seed))
        outcomes[log.outcome] += 1
        total += breaches(log)
    print(f"{count} runs: {dict(outcomes)}; interlock breaches: {total}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20)
