"""Independent reference computations used to freeze expected values.

None of these import the package's planning or scheduling code; they work
from first principles (graph enumeration, interval arithmetic, replay).
"""

import math

import networkx as nx


def brute_force_route(nodes, edges, start, goal, excluded_nodes=(), excluded_edges=()):
    """Minimum-cost simple path by enumerating every simple path.

    Returns (cost, path) or None. The start node is never excluded; ties go to
    the lexicographically smallest node sequence.
    """
    g = nx.Graph()
    g.add_nodes_from(nodes)
    banned_e = {frozenset(e) for e in excluded_edges}
    for a, b, t in edges:
        if frozenset((a, b)) in banned_e:
            continue
        if (a in excluded_nodes and a != start) or (b in excluded_nodes and b != start):
            continue
        g.add_edge(a, b, w=t)
    if start == goal:
        return 0.0, [start]
    if goal not in g or start not in g:
        return None
    best = None
    for path in nx.all_simple_paths(g, start, goal):
        cost = sum(g[u][v]["w"] for u, v in zip(path, path[1:]))
        key = (cost, path)
        if best is None or key < best:
            best = key
    return best


def earliest_gap(busy, now, gap, lookahead):
    """Earliest t >= now where [t, t+gap) misses every busy interval, by brute scan at 1 ms."""
    for t in range(now, now + lookahead + 1):
        if all(t + gap <= a or t >= b for a, b in busy):
            return t
    return None


def health_replay(samples, normal=(50, 120), emergency=(40, 150), sustain_ms=10_000):
    """Classify a (tick, hr) stream sample by sample; returns the last class."""
    abnormal_since = critical_since = None
    state = "NORMAL"
    for tick, hr in samples:
        out_n = not (normal[0] <= hr <= normal[1])
        out_e = not (emergency[0] <= hr <= emergency[1])
        abnormal_since = (abnormal_since if abnormal_since is not None else tick) if out_n else None
        critical_since = (critical_since if critical_since is not None else tick) if out_e else None
        if critical_since is not None and tick - critical_since >= sustain_ms:
            state = "EMERGENCY"
        elif abnormal_since is not None and tick - abnormal_since >= sustain_ms:
            state = "ELEVATED"
        else:
            state = "NORMAL"
    return state


def debounce_replay(stream, window=3):
    """Subsystems whose commanded != achieved for the last `window` entries."""
    recent = stream[-window:]
    if len(recent) < window:
        return set()
    subs = set(recent[0])
    for tick in recent:
        subs &= {s for s, (cmd, ach) in tick.items() if cmd != ach}
    return subs


def kinematic_progress(speeds_mps, dt_s, length_m):
    """Fraction of an edge covered by a speed profile (rectangle rule)."""
    return min(1.0, sum(v * dt_s for v in speeds_mps) / length_m)


def enumerate_options(options):
    """Lexicographic minimum over (severity, ttr, delay, action order)."""
    order = {"CONTINUE": 0, "DIVERT": 1, "RETURN": 2, "STOP_IMMEDIATELY": 3}
    return min(options, key=lambda o: (o[2][0], o[2][1], o[2][2], order[o[0]]))


INF = math.inf


def lagged_stop_distance(v0, gain, cap, dt, snap=0.1):
    """Distance to stop under capped proportional braking applied one period late.

    The first period runs with no command at all, as on the first tick of a loop.
    """
    v, prev, dist = v0, None, 0.0
    while v > 0:
        decel = 0.0 if prev is None else min(cap, gain * prev)
        nv = max(0.0, v - decel * dt)
        if decel > 0 and nv < snap:
            nv = 0.0
        dist += 0.5 * (v + nv) * dt
        prev, v = nv, nv
    return dist
