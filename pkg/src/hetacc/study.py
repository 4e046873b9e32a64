"""Design-style comparisons, pipelined runs and resource sweeps.

Throughput is reported two ways. ``steady_gflops`` assumes every acc stays
busy with its own share of an endless task stream. ``simulated_gflops``
runs a finite batch of tasks through the FIFO scheduler with the model's
dependency graph, so pipeline fill and drain are paid for.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .cdac import ComposerParams, CompositionResult, compose, duplicate_design, fixed_design
from .cdse import RankedDesign, ResourceBudget, SearchSpace
from .crts import build_task_pool, kernel_times_for, metrics, simulate
from .errors import InfeasibleError
from .perfmodel import DEFAULT_KERNEL, AccConfig, KernelSpec, layers_time
from .platform import PlatformSpec, scale_platform
from .reference import REFERENCE_MONOLITHIC
from .workload import ModelSpec, model_ops

__all__ = [
    "DEFAULT_TASKS",
    "StyleResult",
    "SweepCell",
    "one_specialized",
    "run_pipeline",
    "compare_styles",
    "sweep",
    "thread_count",
]

DEFAULT_TASKS = 4


@dataclass(frozen=True)
class StyleResult:
    style: str
    num: int
    steady_gflops: float
    simulated_gflops: float
    task_latency_s: tuple


def thread_count() -> int:
    """Worker threads for sweeps, from ``HETACC_THREADS`` (default 1)."""
    raw = os.environ.get("HETACC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def one_specialized(comp: CompositionResult, model: ModelSpec, plat: PlatformSpec) -> RankedDesign:
    """The composition's largest acc running the whole model alone.

    It keeps its configuration but gets the full platform bandwidth, since
    it no longer shares the off-chip link.
    """
    big = max(range(comp.num), key=lambda i: (comp.accs[i].cfg.tiles, -i))
    d = comp.accs[big]
    t = layers_time(model.layers, d.cfg, plat)
    return RankedDesign(d.cfg, t, model_ops(model) / t / 1e9, d.ports, d.buffers)


def run_pipeline(comp: CompositionResult, model: ModelSpec, plat: PlatformSpec,
                 num_tasks: int = DEFAULT_TASKS):
    """Simulate `num_tasks` concurrent inferences; returns (timeline, summary)."""
    tl = simulate(comp, build_task_pool(model, num_tasks), kernel_times_for(comp, model, plat))
    return tl, metrics(tl, model, num_tasks)


def _serial(style: str, design: RankedDesign, model: ModelSpec) -> StyleResult:
    # One acc runs kernels back to back, so a finite batch gets the steady rate.
    lat = design.total_time + model.fixed_time_s
    return StyleResult(style, 1, design.gflops, design.gflops, (lat,))


def compare_styles(model: ModelSpec, plat: PlatformSpec, *, num_tasks: int = DEFAULT_TASKS,
                   ubound: int = 32, duplicates: int = 8,
                   monolithic: AccConfig = REFERENCE_MONOLITHIC,
                   kernel: KernelSpec = DEFAULT_KERNEL,
                   space: Optional[SearchSpace] = None) -> dict[str, StyleResult]:
    """Throughput of the four design styles of the application study.

    ``one_mono`` is the fixed reference design, ``one_acc`` the best single
    acc for this model, ``two_diverse`` the two-acc composition and
    ``<n>_duplicate`` n identical accs each running whole inferences.
    Duplicates report the steady rate in both columns: with fewer tasks
    than accs a finite batch would leave accs idle, and the generous figure
    keeps the comparison conservative.
    """
    if space is None:
        space = SearchSpace(ResourceBudget.from_platform(plat), kernel)
    out = {}
    out["one_mono"] = _serial("one_mono", fixed_design(model, plat, monolithic).design, model)
    one = compose(model, plat, ComposerParams(1, ubound), kernel=kernel, space=space)
    out["one_acc"] = _serial("one_acc", one.accs[0], model)
    two = compose(model, plat, ComposerParams(2, ubound), kernel=kernel, space=space)
    _, summ = run_pipeline(two, model, plat, num_tasks)
    out["two_diverse"] = StyleResult("two_diverse", 2, two.throughput_gflops,
                                     summ.throughput_gflops, summ.task_latency)
    dup = duplicate_design(model, plat, duplicates, kernel=kernel, space=space)
    lat = dup.design.total_time + model.fixed_time_s
    out["eight_duplicate" if duplicates == 8 else f"{duplicates}_duplicate"] = StyleResult(
        dup.style, duplicates, dup.throughput_gflops, dup.throughput_gflops, (lat,))
    return out


@dataclass(frozen=True)
class SweepCell:
    aie_scale: str
    ram_scale: str
    bw_scale: str
    style: str            # "single", "diverse" or "duplicate"
    num: int
    steady_gflops: Optional[float]   # None when the cell is infeasible
    compute_roof_gflops: float

    def to_dict(self) -> dict:
        return asdict(self)


def _cells_for(model: ModelSpec, plat: PlatformSpec, nums: Sequence[int], ubound: int,
               kernel: KernelSpec, scales: tuple) -> list[SweepCell]:
    space = SearchSpace(ResourceBudget.from_platform(plat), kernel)
    tags = tuple(str(Fraction(s).limit_denominator()) for s in scales)
    out = []

    def cell(style, num, value):
        out.append(SweepCell(*tags, style, num, value, plat.compute_roof_gflops))

    for num in nums:
        if num == 1:
            try:
                r = compose(model, plat, ComposerParams(1, ubound), kernel=kernel, space=space)
                cell("single", 1, r.throughput_gflops)
            except InfeasibleError:
                cell("single", 1, None)
            continue
        try:
            r = compose(model, plat, ComposerParams(num, ubound), kernel=kernel, space=space)
            cell("diverse", num, r.throughput_gflops)
        except InfeasibleError:
            cell("diverse", num, None)
        try:
            cell("duplicate", num,
                 duplicate_design(model, plat, num, kernel=kernel, space=space).throughput_gflops)
        except InfeasibleError:
            cell("duplicate", num, None)
    return out


def sweep(model: ModelSpec, base: PlatformSpec, scales: Sequence[tuple],
          nums: Sequence[int] = (1, 2, 4, 8), *, ubound: int = 32,
          kernel: KernelSpec = DEFAULT_KERNEL, threads: Optional[int] = None) -> list[SweepCell]:
    """Steady-state throughput for every (scale, acc count) cell.

    `scales` holds ``(aie_scale, ram_scale, bw_scale)`` triples. A diverse
    cell needs at least as many layer shapes as accs, so larger counts are
    reported infeasible for small models. Output order follows the input
    order whatever the thread count.
    """
    jobs = [(tuple(s), scale_platform(base, *s)) for s in scales]
    threads = thread_count() if threads is None else max(1, threads)

    def run(job):
        s, plat = job
        return _cells_for(model, plat, nums, ubound, kernel, s)

    if threads == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, jobs))
    return [c for part in parts for c in part]
