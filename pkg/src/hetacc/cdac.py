"""Composition of several differently shaped accelerators on one platform."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

from .cdse import (RankedDesign, ResourceBudget, SearchSpace, cdse_search)
from .errors import InfeasibleError, InvariantError
from .perfmodel import DEFAULT_KERNEL, AccConfig, KernelSpec, layers_time
from .platform import PlatformSpec
from .workload import LayerShape, ModelSpec, layer_ops, model_ops

__all__ = [
    "ComposerParams",
    "Partition",
    "CompositionResult",
    "sort_layers",
    "enumerate_partitions",
    "proportional_resources",
    "memory_tune",
    "compose",
    "duplicate_design",
    "fixed_design",
    "DesignSummary",
]

MIN_PORTS_IN = 3
MIN_PORTS_OUT = 1


@dataclass(frozen=True)
class ComposerParams:
    num: int = 2
    ubound: int = 32
    mem_quantum: float = 1 / 16

    def __post_init__(self):
        if self.num < 1:
            raise InvariantError("num", "must be >= 1")
        if self.ubound < 0:
            raise InvariantError("ubound", "must be >= 0")
        if not 0 < self.mem_quantum < 1:
            raise InvariantError("mem_quantum", "must lie in (0, 1)")


@dataclass(frozen=True)
class Partition:
    """Contiguous ``[start, stop)`` ranges over the ops-sorted layer list."""

    groups: tuple

    def __post_init__(self):
        groups = tuple((int(s), int(e)) for s, e in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups or groups[0][0] != 0:
            raise InvariantError("groups", "must start at 0")
        for (s, e), nxt in zip(groups, groups[1:] + ((groups[-1][1], None),)):
            if e <= s:
                raise InvariantError("groups", "every group must be non-empty")
            if nxt[0] != e:
                raise InvariantError("groups", "groups must be contiguous and disjoint")

    @property
    def n(self) -> int:
        return self.groups[-1][1]

    def select(self, items: Sequence) -> list[list]:
        return [list(items[s:e]) for s, e in self.groups]


@dataclass(frozen=True)
class CompositionResult:
    model_name: str
    assignment: dict            # layer id -> acc index
    accs: tuple                 # RankedDesign per acc
    budgets: tuple              # ResourceBudget per acc
    makespan_time: float        # max per-acc busy seconds for one inference
    partition: Partition
    runtime_config: dict        # kernel id -> acc index
    candidates_evaluated: int = 0
    total_ops: int = 0

    @property
    def num(self) -> int:
        return len(self.accs)

    @property
    def acc_times(self) -> tuple:
        return tuple(d.total_time for d in self.accs)

    @property
    def throughput_gflops(self) -> float:
        """Steady-state GFLOPS with every acc busy on its share each round."""
        return self.total_ops / self.makespan_time / 1e9


def sort_layers(layers: Sequence[LayerShape]) -> list[LayerShape]:
    """Descending by operations; ties by (m, k, n, batch) descending."""
    return sorted(layers, key=lambda l: (layer_ops(l), l.m, l.k, l.n, l.batch, -l.id),
                  reverse=True)


def enumerate_partitions(n: int, num: int) -> Iterator[Partition]:
    """Every split of n sorted layers into num contiguous non-empty groups."""
    if not 1 <= num <= n:
        raise ValueError(f"need 1 <= num <= n, got num={num}, n={n}")
    for cuts in itertools.combinations(range(1, n), num - 1):
        bounds = (0, *cuts, n)
        yield Partition(tuple(zip(bounds[:-1], bounds[1:])))


def _proportional(total: int, weights: Sequence[int], minimum: int) -> list[int]:
    wsum = sum(weights)
    shares = [max(minimum, total * w // wsum) for w in weights]
    largest = max(range(len(weights)), key=lambda i: (weights[i], -i))
    shares[largest] += total - sum(shares)
    if shares[largest] < minimum:
        raise InfeasibleError(f"{total} units cannot give every acc at least {minimum}")
    return shares


def proportional_resources(partition: Partition, layers: Sequence[LayerShape],
                           plat: PlatformSpec, params: ComposerParams) -> list[ResourceBudget]:
    """Tiles and ports proportional to each group's operations; RAM and
    bandwidth split evenly. `layers` is the ops-sorted layer list."""
    num = len(partition.groups)
    if num != params.num:
        raise ValueError("partition group count differs from params.num")
    if (plat.aie_total < num or plat.plio_in < MIN_PORTS_IN * num
            or plat.plio_out < MIN_PORTS_OUT * num or plat.ram_bytes < num):
        raise InfeasibleError(f"platform too small for {num} accelerators")
    ops = [sum(layer_ops(l) for l in g) for g in partition.select(layers)]
    aie = _proportional(plat.aie_total, ops, 1)
    pin = _proportional(plat.plio_in, ops, MIN_PORTS_IN)
    pout = _proportional(plat.plio_out, ops, MIN_PORTS_OUT)
    ram = plat.ram_bytes // num
    bw = plat.bw.split(num) if num > 1 else plat.bw
    return [ResourceBudget(aie[i], pin[i], pout[i], ram, bw) for i in range(num)]


def _min_buffer_bytes(kernel: KernelSpec) -> int:
    return 2 * kernel.bpd * (kernel.ti * kernel.tk + kernel.tk * kernel.tj + kernel.ti * kernel.tj)


class _Searcher:
    """Memoised CDSE calls over one shared search space."""

    def __init__(self, plat: PlatformSpec, kernel: KernelSpec, space: Optional[SearchSpace]):
        self.plat = plat
        self.kernel = kernel
        self.space = space
        self.memo: dict = {}
        self.stats = {"candidates": 0}

    def __call__(self, group: Sequence[LayerShape], budget: ResourceBudget) -> Optional[RankedDesign]:
        key = (tuple(sorted(l.id for l in group)), budget)
        if key not in self.memo:
            try:
                self.memo[key] = cdse_search(group, budget, self.plat, 1, kernel=self.kernel,
                                             space=self.space, stats=self.stats)[0]
            except InfeasibleError:
                self.memo[key] = None
        return self.memo[key]


def _state_cost(designs):
    if any(d is None for d in designs):
        return (math.inf, math.inf)
    return (max(d.total_time for d in designs), sum(d.cfg.tiles for d in designs))


def memory_tune(budgets: Sequence[ResourceBudget], partition: Partition,
                layers: Sequence[LayerShape], plat: PlatformSpec, params: ComposerParams,
                *, kernel: KernelSpec = DEFAULT_KERNEL, space: Optional[SearchSpace] = None,
                searcher=None):
    """Shift RAM toward the slowest accelerator for up to `ubound` rounds.

    Each round moves ``mem_quantum * ram_bytes / num`` bytes from the fastest
    acc that can spare it (it keeps at least one minimal buffer set) to the
    slowest, re-searches both, and records the state if it lowers the
    slowest acc's time. Returns the best ``(budgets, designs)`` seen,
    including the starting point.
    """
    search = searcher or _Searcher(plat, kernel, space)
    groups = partition.select(layers)
    budgets = list(budgets)
    designs = [search(g, b) for g, b in zip(groups, budgets)]
    best = (_state_cost(designs), list(budgets), list(designs))
    num = len(budgets)
    if num < 2:
        return best[1], best[2]
    step = max(1, int(params.mem_quantum * (plat.ram_bytes // num)))
    floor = _min_buffer_bytes(kernel)
    for _ in range(params.ubound):
        if any(d is None for d in designs):
            times = [math.inf if d is None else d.total_time for d in designs]
        else:
            times = [d.total_time for d in designs]
        slow = max(range(num), key=lambda i: (times[i], -i))
        donors = [i for i in range(num) if i != slow and budgets[i].ram_max - step >= floor]
        if not donors:
            break
        give = min(donors, key=lambda i: (times[i], i))
        budgets[slow] = replace(budgets[slow], ram_max=budgets[slow].ram_max + step)
        budgets[give] = replace(budgets[give], ram_max=budgets[give].ram_max - step)
        designs[slow] = search(groups[slow], budgets[slow])
        designs[give] = search(groups[give], budgets[give])
        cost = _state_cost(designs)
        if cost < best[0]:
            best = (cost, list(budgets), list(designs))
    return best[1], best[2]


def _runtime_config(model: ModelSpec, assignment: dict) -> dict:
    return {kid: assignment[layer.id] for kid, layer in model.kernels()}


def compose(model: ModelSpec, plat: PlatformSpec, params: ComposerParams = ComposerParams(),
            *, kernel: KernelSpec = DEFAULT_KERNEL, space: Optional[SearchSpace] = None
            ) -> CompositionResult:
    """Best composition of `params.num` accelerators for `model`.

    Every contiguous split of the ops-sorted layers is tried with
    ops-proportional tiles/ports, an even RAM and bandwidth split, and memory
    fine-tuning. The objective is the slowest accelerator's modeled time;
    ties go to fewer total tiles, then the earlier partition.
    """
    layers = sort_layers(model.layers)
    if len(layers) < params.num:
        raise InfeasibleError(f"model has {len(layers)} layer shapes, fewer than num={params.num}")
    if space is None:
        space = SearchSpace(ResourceBudget.from_platform(plat), kernel)
    search = _Searcher(plat, kernel, space)
    best = None
    for pidx, part in enumerate(enumerate_partitions(len(layers), params.num)):
        try:
            budgets = proportional_resources(part, layers, plat, params)
        except InfeasibleError:
            continue
        budgets, designs = memory_tune(budgets, part, layers, plat, params,
                                       kernel=kernel, space=space, searcher=search)
        if any(d is None for d in designs):
            continue
        key = (*_state_cost(designs), pidx)
        if best is None or key < best[0]:
            best = (key, part, budgets, designs)
    if best is None:
        raise InfeasibleError("no partition admits a feasible design for every accelerator")
    _, part, budgets, designs = best
    assignment = {}
    for acc, group in enumerate(part.select(layers)):
        for layer in group:
            assignment[layer.id] = acc
    assignment = dict(sorted(assignment.items()))
    return CompositionResult(
        model_name=model.name,
        assignment=assignment,
        accs=tuple(designs),
        budgets=tuple(budgets),
        makespan_time=max(d.total_time for d in designs),
        partition=part,
        runtime_config=_runtime_config(model, assignment),
        candidates_evaluated=search.stats["candidates"],
        total_ops=model_ops(model),
    )


@dataclass(frozen=True)
class DesignSummary:
    """Modeled throughput of a baseline design style."""

    style: str
    num: int
    design: RankedDesign
    throughput_gflops: float


def duplicate_design(model: ModelSpec, plat: PlatformSpec, num: int, *,
                     kernel: KernelSpec = DEFAULT_KERNEL,
                     space: Optional[SearchSpace] = None) -> DesignSummary:
    """`num` identical accs, each with an even resource share, each running
    whole inferences independently."""
    if plat.plio_in < MIN_PORTS_IN * num or plat.aie_total < num or plat.plio_out < num:
        raise InfeasibleError(f"platform too small for {num} accelerators")
    budget = ResourceBudget(plat.aie_total // num, plat.plio_in // num, plat.plio_out // num,
                            plat.ram_bytes // num, plat.bw.split(num) if num > 1 else plat.bw)
    best = cdse_search(model.layers, budget, plat, 1, kernel=kernel, space=space)[0]
    return DesignSummary(f"{num}_duplicate", num, best,
                         num * model_ops(model) / best.total_time / 1e9)


def fixed_design(model: ModelSpec, plat: PlatformSpec, cfg: AccConfig) -> DesignSummary:
    """One given accelerator running every layer in turn."""
    from .cdse import satisfies_budget
    from .perfmodel import buffer_bytes, port_count

    if not satisfies_budget(cfg, ResourceBudget.from_platform(plat)):
        raise InfeasibleError("configuration does not fit the platform")
    t = layers_time(model.layers, cfg, plat)
    g = model_ops(model) / t / 1e9
    return DesignSummary("fixed", 1, RankedDesign(cfg, t, g, port_count(cfg), buffer_bytes(cfg)), g)
