"""Event-driven simulation of the FIFO runtime scheduler.

Tasks are independent inferences of one model. Each kernel is pinned to the
accelerator named by the runtime config. Whenever accelerators become idle
they are visited in index order; each takes the first ready kernel mapped to
it, scanning tasks in ascending index and kernels in ascending id.
"""
from __future__ import annotations

import csv
import heapq
import io
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

from .perfmodel import layer_time
from .platform import PlatformSpec
from .workload import DependencyGraph, LayerShape, ModelSpec, model_ops, validate_graph

__all__ = [
    "Status",
    "TaskPool",
    "ScheduleEvent",
    "Timeline",
    "ScheduleSummary",
    "build_task_pool",
    "kernel_times_for",
    "simulate",
    "metrics",
    "write_timeline_csv",
    "read_timeline_csv",
]


class Status(str, Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"
    DONE = "done"


class TaskPool:
    """Status of every (task, kernel) pair."""

    def __init__(self, deps: DependencyGraph, num_kernels: int, num_tasks: int):
        if num_tasks < 1:
            raise ValueError("num_tasks must be >= 1")
        validate_graph(deps, num_kernels)
        self.deps = deps
        self.num_kernels = num_kernels
        self.num_tasks = num_tasks
        self.preds = {k: deps.predecessors(k) for k in range(num_kernels)}
        self.succs = {k: deps.successors(k) for k in range(num_kernels)}
        self.entries = {}
        for t in range(num_tasks):
            for k in range(num_kernels):
                self.entries[t, k] = Status.READY if not self.preds[k] else Status.PENDING

    def __len__(self):
        return len(self.entries)

    def status(self, task: int, kernel: int) -> Status:
        return self.entries[task, kernel]

    def ready(self, task: int, kernel: int) -> bool:
        return self.entries[task, kernel] is Status.READY

    def start(self, task: int, kernel: int) -> None:
        assert self.entries[task, kernel] is Status.READY
        self.entries[task, kernel] = Status.RUNNING

    def finish(self, task: int, kernel: int) -> None:
        assert self.entries[task, kernel] is Status.RUNNING
        self.entries[task, kernel] = Status.DONE
        for s in self.succs[kernel]:
            if self.entries[task, s] is Status.PENDING and all(
                    self.entries[task, p] is Status.DONE for p in self.preds[s]):
                self.entries[task, s] = Status.READY

    @property
    def drained(self) -> bool:
        return all(s is Status.DONE for s in self.entries.values())


def build_task_pool(model: ModelSpec, num_tasks: int) -> TaskPool:
    return TaskPool(model.deps, model.num_kernels, num_tasks)


@dataclass(frozen=True)
class ScheduleEvent:
    acc: int
    task: int
    kernel: int
    start_s: float
    end_s: float


@dataclass(frozen=True)
class Timeline:
    events: tuple
    task_latency: tuple     # MM completion time of each task, seconds from 0
    makespan: float
    per_acc_busy: tuple

    @property
    def num_accs(self) -> int:
        return len(self.per_acc_busy)


def kernel_times_for(comp, model: ModelSpec, plat: PlatformSpec) -> dict:
    """Modeled seconds of every kernel on every acc of a composition.

    A kernel is one instance of its layer (``count`` 1, ``batch`` kept). Each
    acc is evaluated with the bandwidth share of its budget.
    """
    out = {}
    for kid, layer in model.kernels():
        single = LayerShape(layer.id, layer.m, layer.k, layer.n, layer.batch, 1)
        for acc, (design, budget) in enumerate(zip(comp.accs, comp.budgets)):
            out[kid, acc] = layer_time(single, design.cfg, plat.with_bandwidth(budget.bw)).total_time
    return out


def simulate(comp, pool: TaskPool, kernel_times: Mapping) -> Timeline:
    """Run the pool to completion.

    `comp` is a CompositionResult or a plain ``{kernel_id: acc}`` mapping.
    `kernel_times` maps ``(kernel_id, acc)`` to seconds.
    """
    mapping = dict(getattr(comp, "runtime_config", comp))
    num_accs = (len(comp.accs) if hasattr(comp, "accs")
                else (max(mapping.values()) + 1 if mapping else 0))
    for k in range(pool.num_kernels):
        if k not in mapping:
            raise KeyError(f"kernel {k} has no assigned accelerator")
        t = kernel_times.get((k, mapping[k]))
        if t is None:
            raise KeyError(f"missing time for kernel {k} on acc {mapping[k]}")
        if not t > 0:
            raise ValueError(f"kernel {k} time must be positive, got {t!r}")

    by_acc = {a: [k for k in range(pool.num_kernels) if mapping[k] == a] for a in range(num_accs)}
    busy_until = [None] * num_accs
    running: list = []  # heap of (end, acc, task, kernel)
    events = []
    busy = [0.0] * num_accs
    now = 0.0
    while True:
        for acc in range(num_accs):
            if busy_until[acc] is not None:
                continue
            pick = next(((t, k) for t in range(pool.num_tasks) for k in by_acc[acc]
                         if pool.ready(t, k)), None)
            if pick is None:
                continue
            t, k = pick
            pool.start(t, k)
            dur = kernel_times[k, acc]
            end = now + dur
            busy_until[acc] = end
            busy[acc] += dur
            events.append(ScheduleEvent(acc, t, k, now, end))
            heapq.heappush(running, (end, acc, t, k))
        if not running:
            break
        now = running[0][0]
        while running and running[0][0] == now:
            _, acc, t, k = heapq.heappop(running)
            pool.finish(t, k)
            busy_until[acc] = None
    assert pool.drained, "scheduler stalled with unfinished kernels"

    latency = [0.0] * pool.num_tasks
    for e in events:
        latency[e.task] = max(latency[e.task], e.end_s)
    makespan = max((e.end_s for e in events), default=0.0)
    return Timeline(tuple(events), tuple(latency), makespan, tuple(busy))


@dataclass(frozen=True)
class ScheduleSummary:
    task_latency: tuple      # MM span plus the model's fixed-kernel time, per task
    makespan: float
    throughput_gflops: float
    utilization: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def metrics(tl: Timeline, model: ModelSpec, num_tasks: int) -> ScheduleSummary:
    """Latency, throughput and utilisation of a simulated schedule.

    Non-MM kernels run after a task's MM kernels, one task at a time, so each
    task's latency gains the model's summed fixed-kernel time. Throughput
    counts MM operations only.
    """
    if not tl.events:
        return ScheduleSummary((), 0.0, 0.0, tuple(0.0 for _ in tl.per_acc_busy))
    fixed = model.fixed_time_s
    lat = tuple(l + fixed for l in tl.task_latency)
    gflops = num_tasks * model_ops(model) / tl.makespan / 1e9
    util = tuple(b / tl.makespan for b in tl.per_acc_busy)
    return ScheduleSummary(lat, tl.makespan, gflops, util)


_CSV_FIELDS = ("acc", "task", "kernel", "start_s", "end_s")


def write_timeline_csv(tl: Timeline, path=None) -> str:
    """Gantt rows, one per event; returns the text and writes it if `path`."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for e in tl.events:
        w.writerow((e.acc, e.task, e.kernel, repr(e.start_s), repr(e.end_s)))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_timeline_csv(source) -> list[ScheduleEvent]:
    text = Path(source).read_text() if not str(source).startswith("acc,") else source
    rows = csv.DictReader(io.StringIO(text))
    return [ScheduleEvent(int(r["acc"]), int(r["task"]), int(r["kernel"]),
                          float(r["start_s"]), float(r["end_s"])) for r in rows]
