"""Independent reference implementations used by the tests.

Nothing here imports the package's arithmetic: every formula is written
out directly on plain integers and floats so that agreement with the
library is evidence, not tautology.
"""
from __future__ import annotations

import itertools
import math


def ceil_div(a, b):
    return (a + b - 1) // b


def ports(a, b, c, ctc):
    return ceil_div(a * b, ctc) + ceil_div(c * b, ctc), ceil_div(a * c, ctc)


def buffers(a, b, c, x, y, z, ti, tk, tj, bpd):
    lhs = x * a * ti * y * b * tk * bpd
    rhs = y * b * tk * z * c * tj * bpd
    out = x * a * ti * z * c * tj * bpd
    return lhs, rhs, out, 2 * lhs + 2 * rhs + 2 * out


def compute_seconds(x, y, z, ti, tk, tj, mac, eff, freq):
    cycles = (x * y * z * ti * tk * tj / mac) / eff
    return cycles / freq


def layer_seconds(m, k, n, batch, count, a, b, c, x, y, z, ti, tk, tj, bpd,
                  mac, eff, freq, bw_l, bw_r, bw_o):
    tx = ceil_div(m, a * ti * x)
    ty = ceil_div(k, b * tk * y)
    tz = ceil_div(n, c * tj * z)
    lhs, rhs, out, _ = buffers(a, b, c, x, y, z, ti, tk, tj, bpd)
    t_l, t_r, t_o = lhs / bw_l, rhs / bw_r, out / bw_o
    t_c = compute_seconds(x, y, z, ti, tk, tj, mac, eff, freq)
    per_pass = max(t_l, t_r, t_c) * tx * ty * tz + t_o * tx * tz + max(t_l, t_r)
    return batch * count * per_pass


def brute_force_configs(aie_max, pin_max, pout_max, ram_max, ti=32, tk=32, tj=32, ctc=4, bpd=4,
                        cap=64):
    """Every feasible 6-tuple by nested loops, up to `cap` per factor."""
    out = []
    for a, b, c in itertools.product(range(1, aie_max + 1), repeat=3):
        if a * b * c > aie_max:
            continue
        pin, pout = ports(a, b, c, ctc)
        if pin > pin_max or pout > pout_max:
            continue
        for x, y, z in itertools.product(range(1, cap + 1), repeat=3):
            if buffers(a, b, c, x, y, z, ti, tk, tj, bpd)[3] <= ram_max:
                out.append((a, b, c, x, y, z))
    return sorted(out)


def contiguous_partitions(n, num):
    for cuts in itertools.combinations(range(1, n), num - 1):
        bounds = (0, *cuts, n)
        yield [(bounds[i], bounds[i + 1]) for i in range(num)]


def brute_force_schedule(kernels, deps, acc_of, dur):
    """Optimal non-preemptive makespan for a tiny instance.

    Searches every order of list scheduling (each permutation consistent
    with dependencies, started as early as possible on its fixed acc).
    Semi-active schedules include an optimal one, so the minimum over
    permutations is the optimum.
    """
    preds = {k: [p for p, s in deps if s == k] for k in kernels}
    best = math.inf
    for perm in itertools.permutations(kernels):
        pos = {k: i for i, k in enumerate(perm)}
        if any(pos[p] > pos[s] for p, s in deps):
            continue
        end = {}
        free = {}
        for k in perm:
            acc = acc_of[k]
            start = max([free.get(acc, 0.0)] + [end[p] for p in preds[k]])
            end[k] = start + dur[k]
            free[acc] = end[k]
        best = min(best, max(end.values(), default=0.0))
    return best


def critical_path(kernels, deps, dur):
    preds = {k: [p for p, s in deps if s == k] for k in kernels}
    memo = {}

    def finish(k):
        if k not in memo:
            memo[k] = dur[k] + max((finish(p) for p in preds[k]), default=0.0)
        return memo[k]

    return max((finish(k) for k in kernels), default=0.0)


def timeline_violations(events, deps, acc_of, dur):
    """Every broken schedule invariant of a timeline, as readable strings.

    Checks non-overlap per acc, dependency order within each task, exact
    durations, and work conservation: from the moment a kernel becomes ready
    until it starts, its acc must be continuously busy.
    """
    bad = []
    preds = {}
    for p, s in deps:
        preds.setdefault(s, []).append(p)
    end_of = {(e.task, e.kernel): e.end_s for e in events}
    by_acc = {}
    for e in events:
        by_acc.setdefault(e.acc, []).append(e)
        if e.acc != acc_of[e.kernel]:
            bad.append(f"kernel {e.kernel} ran on acc {e.acc}")
        if not (e.end_s > e.start_s >= 0):
            bad.append(f"bad interval {e}")
        if e.end_s - e.start_s != _stored_duration(dur[e.kernel], e):
            bad.append(f"wrong duration {e}")
        for p in preds.get(e.kernel, ()):
            if end_of[e.task, p] > e.start_s:
                bad.append(f"edge {p}->{e.kernel} of task {e.task} violated")
    for acc, evs in by_acc.items():
        evs.sort(key=lambda e: e.start_s)
        for a, b in zip(evs, evs[1:]):
            if b.start_s < a.end_s:
                bad.append(f"overlap on acc {acc}: {a} {b}")
        for e in evs:
            ready = max((end_of[e.task, p] for p in preds.get(e.kernel, ())), default=0.0)
            t = ready
            for o in evs:
                if o.start_s <= t < o.end_s:
                    t = o.end_s
            if t < e.start_s:
                bad.append(f"acc {acc} idle at {t} while {e} was ready")
    return bad


def _stored_duration(d, e):
    """The duration the simulator should have produced for event `e`."""
    return (e.start_s + d) - e.start_s


def random_schedule_instance(rng, max_kernels=8, max_accs=3):
    """A random DAG over 1..max_kernels kernels, a kernel-to-acc map and
    positive durations drawn from a small set so ties are common."""
    n = rng.randint(1, max_kernels)
    num_accs = rng.randint(1, max_accs)
    deps = sorted({(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3})
    acc_of = {k: rng.randrange(num_accs) for k in range(n)}
    dur = {k: rng.choice([0.5, 1.0, 1.0, 2.0, 3.0, 0.1 * rng.randint(1, 30)]) for k in range(n)}
    return n, deps, acc_of, dur
