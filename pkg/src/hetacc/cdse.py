"""Exhaustive single-accelerator design-space exploration."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InfeasibleError, InvariantError
from .perfmodel import (DEFAULT_KERNEL, AccConfig, BufferFootprint, ConfigArrays,
                        KernelSpec, PortCount, _canonical, _compute_seconds,
                        _parts_total_time, buffer_bytes, layers_time, port_count)
from .platform import BandwidthProfile, PlatformSpec
from .workload import LayerShape, layer_ops

__all__ = [
    "ResourceBudget",
    "FactorBounds",
    "RankedDesign",
    "SearchSpace",
    "enumerate_configs",
    "enumerate_candidates",
    "count_candidates",
    "cdse_search",
    "satisfies_budget",
]


@dataclass(frozen=True)
class ResourceBudget:
    aie_max: int
    plio_in_max: int
    plio_out_max: int
    ram_max: int
    bw: BandwidthProfile

    def __post_init__(self):
        for name in ("aie_max", "plio_in_max", "plio_out_max", "ram_max"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise InvariantError(name, f"must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @classmethod
    def from_platform(cls, plat: PlatformSpec) -> "ResourceBudget":
        return cls(plat.aie_total, plat.plio_in, plat.plio_out, plat.ram_bytes, plat.bw)

    def covers(self, other: "ResourceBudget") -> bool:
        return (self.aie_max >= other.aie_max and self.plio_in_max >= other.plio_in_max
                and self.plio_out_max >= other.plio_out_max and self.ram_max >= other.ram_max)


@dataclass(frozen=True)
class FactorBounds:
    """Optional inclusive upper bounds on each factor; None means unbounded."""

    a: Optional[int] = None
    b: Optional[int] = None
    c: Optional[int] = None
    x: Optional[int] = None
    y: Optional[int] = None
    z: Optional[int] = None


@dataclass(frozen=True)
class RankedDesign:
    cfg: AccConfig
    total_time: float
    gflops: float
    ports: PortCount
    buffers: BufferFootprint


def satisfies_budget(cfg: AccConfig, budget: ResourceBudget) -> bool:
    p = port_count(cfg)
    return (cfg.tiles <= budget.aie_max and p.ports_in <= budget.plio_in_max
            and p.ports_out <= budget.plio_out_max
            and buffer_bytes(cfg).total <= budget.ram_max)


def _cap(limit, bound):
    return limit if bound is None else min(limit, bound)


def _abc_triples(budget: ResourceBudget, kernel: KernelSpec, bounds: FactorBounds):
    ctc = kernel.ctc
    amax = _cap(budget.aie_max, bounds.a)
    for a in range(1, amax + 1):
        for b in range(1, _cap(budget.aie_max // a, bounds.b) + 1):
            if -(-a * b // ctc) + -(-b // ctc) > budget.plio_in_max:
                break  # ports_in grows with b and c
            for c in range(1, _cap(budget.aie_max // (a * b), bounds.c) + 1):
                if -(-a * b // ctc) + -(-c * b // ctc) > budget.plio_in_max:
                    break
                if -(-a * c // ctc) > budget.plio_out_max:
                    break
                yield a, b, c


def enumerate_candidates(budget: ResourceBudget, kernel: KernelSpec = DEFAULT_KERNEL,
                         bounds: FactorBounds = FactorBounds()) -> ConfigArrays:
    """All feasible ``(a, b, c, x, y, z)`` in lexicographic order, as arrays.

    Feasible means tiles, stream ports and double-buffered on-chip bytes all
    fit the budget. The reuse factors need no explicit cap: the RAM limit
    bounds each of them.
    """
    # buffers.total <= ram  <=>  xy*uv + yz*vw + xz*uw <= ram // (2*bpd)
    lim = budget.ram_max // (2 * kernel.bpd)
    blocks = []
    for a, b, c in _abc_triples(budget, kernel, bounds):
        u, v, w = a * kernel.ti, b * kernel.tk, c * kernel.tj
        uv, vw, uw = u * v, v * w, u * w
        if uv + vw + uw > lim:
            continue
        xmax = _cap((lim - vw) // (uv + uw), bounds.x)
        xs = np.arange(1, xmax + 1, dtype=np.int64)
        ymax = (lim - xs * uw) // (xs * uv + vw)
        if bounds.y is not None:
            ymax = np.minimum(ymax, bounds.y)
        keep = ymax >= 1
        xs, ymax = xs[keep], ymax[keep]
        if not len(xs):
            continue
        px = np.repeat(xs, ymax)
        starts = np.cumsum(ymax) - ymax
        py = np.arange(len(px), dtype=np.int64) - np.repeat(starts, ymax) + 1
        zmax = (lim - px * py * uv) // (py * vw + px * uw)
        if bounds.z is not None:
            zmax = np.minimum(zmax, bounds.z)
        keep = zmax >= 1
        px, py, zmax = px[keep], py[keep], zmax[keep]
        if not len(px):
            continue
        cx = np.repeat(px, zmax)
        cy = np.repeat(py, zmax)
        zstarts = np.cumsum(zmax) - zmax
        cz = np.arange(len(cx), dtype=np.int64) - np.repeat(zstarts, zmax) + 1
        blocks.append((a, b, c, cx, cy, cz))
    if not blocks:
        empty = np.zeros(0, dtype=np.int32)
        return ConfigArrays(empty, empty, empty, empty, empty, empty, kernel)
    sizes = [len(blk[3]) for blk in blocks]
    a = np.repeat(np.array([blk[0] for blk in blocks], dtype=np.int32), sizes)
    b = np.repeat(np.array([blk[1] for blk in blocks], dtype=np.int32), sizes)
    c = np.repeat(np.array([blk[2] for blk in blocks], dtype=np.int32), sizes)
    x = np.concatenate([blk[3] for blk in blocks]).astype(np.int32)
    y = np.concatenate([blk[4] for blk in blocks]).astype(np.int32)
    z = np.concatenate([blk[5] for blk in blocks]).astype(np.int32)
    return ConfigArrays(a, b, c, x, y, z, kernel)


def enumerate_configs(budget: ResourceBudget, kernel: KernelSpec = DEFAULT_KERNEL,
                      bounds: FactorBounds = FactorBounds()) -> Iterator[AccConfig]:
    yield from enumerate_candidates(budget, kernel, bounds)


def count_candidates(budget: ResourceBudget, kernel: KernelSpec = DEFAULT_KERNEL,
                     bounds: FactorBounds = FactorBounds()) -> int:
    return len(enumerate_candidates(budget, kernel, bounds))


def _layer_key(layer: LayerShape):
    return (layer.m, layer.k, layer.n, layer.batch, layer.count)


def _plat_key(plat: PlatformSpec):
    return (plat.bw, plat.mac_per_cycle, plat.eff, plat.aie_freq_hz)


class SearchSpace:
    """Candidate superset for a parent budget, reusable for any sub-budget.

    Per-layer and per-group time vectors are cached (LRU, bounded in bytes)
    because composition re-runs the search many times with the same layers
    and bandwidth but different tile/RAM limits.
    """

    def __init__(self, budget: ResourceBudget, kernel: KernelSpec = DEFAULT_KERNEL,
                 bounds: FactorBounds = FactorBounds(), cache_bytes: int = 1 << 30):
        self.budget = budget
        self.kernel = kernel
        self.bounds = bounds
        self.cands = c = enumerate_candidates(budget, kernel, bounds)
        a, b, cc = (v.astype(np.int64) for v in (c.a, c.b, c.c))
        x, y, z = (v.astype(np.int64) for v in (c.x, c.y, c.z))
        k = kernel
        self.tiles = (a * b * cc).astype(np.int32)
        self.ports_in = (-(-(a * b) // k.ctc) + -(-(cc * b) // k.ctc)).astype(np.int32)
        self.ports_out = (-(-(a * cc) // k.ctc)).astype(np.int32)
        self.native = (a * k.ti * x, b * k.tk * y, cc * k.tj * z)
        self.xyz_ops = x * y * z * (k.ti * k.tk * k.tj)
        bl = (x * a * k.ti) * (y * b * k.tk) * k.bpd
        br = y * z * b * cc * k.tk * k.tj * k.bpd
        bo = x * z * a * cc * k.ti * k.tj * k.bpd
        self.buffers = (bl, br, bo, 2 * (bl + br + bo))
        self.cache_bytes = cache_bytes
        self._cache: OrderedDict = OrderedDict()

    def __len__(self):
        return len(self.cands)

    def mask(self, budget: ResourceBudget) -> np.ndarray:
        if not self.budget.covers(budget):
            raise ValueError("sub-budget exceeds the search space's parent budget")
        return ((self.tiles <= budget.aie_max) & (self.ports_in <= budget.plio_in_max)
                & (self.ports_out <= budget.plio_out_max) & (self.buffers[3] <= budget.ram_max))

    def _cached(self, key, compute):
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        val = compute()
        if self.cache_bytes > 0:
            self._cache[key] = val
            total = sum(v.nbytes for v in self._cache.values())
            while len(self._cache) > 1 and total > self.cache_bytes:
                _, old = self._cache.popitem(last=False)
                total -= old.nbytes
        return val

    def layer_times(self, layer: LayerShape, plat: PlatformSpec) -> np.ndarray:
        key = ("layer", _layer_key(layer), _plat_key(plat))
        return self._cached(key, lambda: self._layer_times(layer, plat))

    def _layer_times(self, layer, plat):
        # same operation order as perfmodel.layer_time, so values agree exactly
        pm, pk, pn = self.native
        tx, ty, tz = -(-layer.m // pm), -(-layer.k // pk), -(-layer.n // pn)
        bl, br, bo, _ = self.buffers
        bw = plat.bw
        tcomp = _compute_seconds(self.xyz_ops, plat.mac_per_cycle, plat.eff, plat.aie_freq_hz)
        return _parts_total_time(bl / bw.bw_l, br / bw.bw_r, bo / bw.bw_o, tcomp,
                                 tx, ty, tz, layer.batch * layer.count)

    def group_times(self, layers: Sequence[LayerShape], plat: PlatformSpec) -> np.ndarray:
        """Summed time over `layers`, added in canonical layer order."""
        ordered = _canonical(layers)
        key = ("group", tuple(_layer_key(l) for l in ordered), _plat_key(plat))

        def compute():
            total = 0.0
            for layer in ordered:
                total = total + self.layer_times(layer, plat)
            return total

        return self._cached(key, compute)


def _rank(times: np.ndarray, tiles: np.ndarray, buf: np.ndarray, top_k: int) -> np.ndarray:
    """Indices of the top_k under the total order
    (time, tiles, buffer bytes, enumeration index)."""
    if top_k == 1:
        sel = np.flatnonzero(times == times.min())
    else:
        kth = np.partition(times, top_k - 1)[top_k - 1]
        sel = np.flatnonzero(times <= kth)
    order = np.lexsort((sel, buf[sel], tiles[sel], times[sel]))
    return sel[order[:top_k]]


def cdse_search(layers: Sequence[LayerShape], budget: ResourceBudget, plat: PlatformSpec,
                top_k: int = 1, *, kernel: KernelSpec = DEFAULT_KERNEL,
                bounds: FactorBounds = FactorBounds(),
                space: Optional[SearchSpace] = None, stats: Optional[dict] = None
                ) -> list[RankedDesign]:
    """Rank every feasible configuration by summed modeled time over `layers`.

    Compute parameters (MAC rate, efficiency, clock) come from `plat`;
    bandwidth comes from `budget`. Pass a `space` built for a covering
    budget to reuse its enumeration and cached layer times.
    """
    layers = list(layers)
    if not layers:
        raise ValueError("cdse_search needs at least one layer")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    eval_plat = plat.with_bandwidth(budget.bw)
    if space is None:
        space = SearchSpace(budget, kernel, bounds, cache_bytes=0)
    elif space.kernel != kernel or space.bounds != bounds:
        raise ValueError("search space was built for a different kernel or bounds")
    feasible = space.mask(budget)
    n = int(np.count_nonzero(feasible))
    if stats is not None:
        stats["candidates"] = stats.get("candidates", 0) + n
    if n == 0:
        raise InfeasibleError("no configuration fits the budget")
    total = np.where(feasible, space.group_times(layers, eval_plat), np.inf)
    best = _rank(total, space.tiles, space.buffers[3], min(top_k, n))

    ops = sum(layer_ops(l) for l in layers)
    out = []
    for i in best:
        cfg = space.cands.config(int(i))
        t = layers_time(layers, cfg, eval_plat)
        out.append(RankedDesign(cfg, t, ops / t / 1e9, port_count(cfg), buffer_bytes(cfg)))
    return out
