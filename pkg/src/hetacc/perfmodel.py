"""Analytical time model of one MM layer on one tiled accelerator.

An accelerator spreads an ``a x b x c`` block of single-tile kernels over the
compute array and reuses on-chip buffers ``x``, ``y``, ``z`` times along M, K
and N. Its native tile is ``(a*ti*x, b*tk*y, c*tj*z)``; layers are padded up
to whole native tiles and walked by an off-chip loop of ``tx*ty*tz``
iterations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantError
from .platform import PlatformSpec
from .workload import LayerShape, layer_ops

__all__ = [
    "KernelSpec",
    "AccConfig",
    "TileCounts",
    "PortCount",
    "BufferFootprint",
    "PerfEstimate",
    "DEFAULT_KERNEL",
    "tile_counts",
    "port_count",
    "buffer_bytes",
    "compute_time",
    "layer_time",
    "layers_time",
    "throughput",
    "square_layer",
    "ConfigArrays",
    "layer_time_array",
]


def _pos_int(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
        raise InvariantError(name, f"must be an integer >= 1, got {v!r}")


@dataclass(frozen=True)
class KernelSpec:
    """Single-tile MM kernel: dimensions, compute/communication ratio, bytes per element."""

    ti: int = 32
    tk: int = 32
    tj: int = 32
    ctc: int = 4
    bpd: int = 4

    def __post_init__(self):
        for name in ("ti", "tk", "tj", "ctc"):
            _pos_int(name, getattr(self, name))
        if self.bpd not in (1, 2, 4, 8):
            raise InvariantError("bpd", f"must be one of 1, 2, 4, 8, got {self.bpd!r}")


DEFAULT_KERNEL = KernelSpec()


@dataclass(frozen=True, order=True)
class AccConfig:
    a: int
    b: int
    c: int
    x: int = 1
    y: int = 1
    z: int = 1
    kernel: KernelSpec = field(default=DEFAULT_KERNEL, compare=False)

    def __post_init__(self):
        for name in ("a", "b", "c", "x", "y", "z"):
            _pos_int(name, getattr(self, name))
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def tiles(self) -> int:
        return self.a * self.b * self.c

    @property
    def native_tile(self) -> tuple[int, int, int]:
        k = self.kernel
        return (self.a * k.ti * self.x, self.b * k.tk * self.y, self.c * k.tj * self.z)

    @property
    def factors(self) -> tuple[int, int, int, int, int, int]:
        return (self.a, self.b, self.c, self.x, self.y, self.z)


@dataclass(frozen=True)
class TileCounts:
    tx: int
    ty: int
    tz: int
    padded_m: int
    padded_k: int
    padded_n: int


@dataclass(frozen=True)
class PortCount:
    ports_in: int
    ports_out: int


@dataclass(frozen=True)
class BufferFootprint:
    buff_l: int
    buff_r: int
    buff_o: int
    total: int


@dataclass(frozen=True)
class PerfEstimate:
    time_l: float
    time_r: float
    time_o: float
    time_comp: float
    total_time: float
    gflops: float


def _ceil_div(a, b):
    return -(-a // b)


def square_layer(size: int) -> LayerShape:
    return LayerShape(0, size, size, size)


def tile_counts(layer: LayerShape, cfg: AccConfig) -> TileCounts:
    pm, pk, pn = cfg.native_tile
    tx, ty, tz = _ceil_div(layer.m, pm), _ceil_div(layer.k, pk), _ceil_div(layer.n, pn)
    return TileCounts(tx, ty, tz, tx * pm, ty * pk, tz * pn)


def port_count(cfg: AccConfig) -> PortCount:
    ctc = cfg.kernel.ctc
    pin = _ceil_div(cfg.a * cfg.b, ctc) + _ceil_div(cfg.c * cfg.b, ctc)
    pout = _ceil_div(cfg.a * cfg.c, ctc)
    return PortCount(pin, pout)


def buffer_bytes(cfg: AccConfig) -> BufferFootprint:
    k = cfg.kernel
    bl = (cfg.x * cfg.a * k.ti) * (cfg.y * cfg.b * k.tk) * k.bpd
    br = cfg.y * cfg.z * cfg.b * cfg.c * k.tk * k.tj * k.bpd
    bo = cfg.x * cfg.z * cfg.a * cfg.c * k.ti * k.tj * k.bpd
    return BufferFootprint(bl, br, bo, 2 * (bl + br + bo))


def _compute_seconds(xyz_ops, mac, eff, freq):
    return (xyz_ops / mac) / eff / freq


def compute_time(cfg: AccConfig, plat: PlatformSpec) -> float:
    """Seconds for one pass of the on-chip reuse loops."""
    k = cfg.kernel
    ops = cfg.x * cfg.y * cfg.z * k.ti * k.tk * k.tj
    return _compute_seconds(ops, plat.mac_per_cycle, plat.eff, plat.aie_freq_hz)


def _parts_total_time(time_l, time_r, time_o, time_comp, tx, ty, tz, reps):
    # loads overlap compute per iteration; the output tile is stored once per
    # (tx, tz) after the ty reduction; one extra load fills the pipeline
    load = np.maximum(time_l, time_r)
    step = np.maximum(load, time_comp)
    return reps * (step * (tx * ty * tz) + time_o * (tx * tz) + load)


def layer_time(layer: LayerShape, cfg: AccConfig, plat: PlatformSpec) -> PerfEstimate:
    tc = tile_counts(layer, cfg)
    buf = buffer_bytes(cfg)
    bw = plat.bw
    tl, tr, to = buf.buff_l / bw.bw_l, buf.buff_r / bw.bw_r, buf.buff_o / bw.bw_o
    tcomp = compute_time(cfg, plat)
    total = float(_parts_total_time(tl, tr, to, tcomp, tc.tx, tc.ty, tc.tz,
                                    layer.batch * layer.count))
    return PerfEstimate(tl, tr, to, tcomp, total, layer_ops(layer) / total / 1e9)


def layers_time(layers: Sequence[LayerShape], cfg: AccConfig, plat: PlatformSpec) -> float:
    """Sum of per-layer times, summed in ascending layer-shape order."""
    return float(sum(layer_time(l, cfg, plat).total_time for l in _canonical(layers)))


def _canonical(layers):
    return sorted(layers, key=lambda l: (l.m, l.k, l.n, l.batch, l.count, l.id))


def throughput(layers: Sequence[LayerShape], total_time: float) -> float:
    """GFLOPS of running `layers` in `total_time` seconds."""
    if not total_time > 0:
        raise ValueError("total_time must be positive")
    return sum(layer_ops(l) for l in layers) / total_time / 1e9


@dataclass
class ConfigArrays:
    """Structure-of-arrays view over many configurations sharing one kernel."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    kernel: KernelSpec = DEFAULT_KERNEL

    def __len__(self):
        return len(self.a)

    @classmethod
    def from_configs(cls, cfgs: Sequence[AccConfig]) -> "ConfigArrays":
        cfgs = list(cfgs)
        kernel = cfgs[0].kernel if cfgs else DEFAULT_KERNEL
        if any(c.kernel != kernel for c in cfgs):
            raise ValueError("all configurations must share one kernel")
        cols = np.array([c.factors for c in cfgs], dtype=np.int64).reshape(-1, 6)
        return cls(*(cols[:, i] for i in range(6)), kernel=kernel)

    def take(self, idx) -> "ConfigArrays":
        return ConfigArrays(self.a[idx], self.b[idx], self.c[idx],
                            self.x[idx], self.y[idx], self.z[idx], self.kernel)

    def config(self, i: int) -> AccConfig:
        return AccConfig(int(self.a[i]), int(self.b[i]), int(self.c[i]),
                         int(self.x[i]), int(self.y[i]), int(self.z[i]), self.kernel)

    def __iter__(self):
        for i in range(len(self)):
            yield self.config(i)

    @property
    def tiles(self) -> np.ndarray:
        return self.a * self.b * self.c

    def ports(self) -> tuple[np.ndarray, np.ndarray]:
        ctc = self.kernel.ctc
        pin = _ceil_div(self.a * self.b, ctc) + _ceil_div(self.c * self.b, ctc)
        return pin, _ceil_div(self.a * self.c, ctc)

    def buffers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        k = self.kernel
        bl = (self.x * self.a * k.ti) * (self.y * self.b * k.tk) * k.bpd
        br = self.y * self.z * self.b * self.c * k.tk * k.tj * k.bpd
        bo = self.x * self.z * self.a * self.c * k.ti * k.tj * k.bpd
        return bl, br, bo, 2 * (bl + br + bo)


def layer_time_array(layer: LayerShape, cands: ConfigArrays, plat: PlatformSpec,
                     buffers=None) -> np.ndarray:
    """`layer_time(...).total_time` for every configuration in `cands`.

    Uses the same operation order as the scalar path, so results agree
    bit-for-bit.
    """
    k = cands.kernel
    pm, pk, pn = cands.a * k.ti * cands.x, cands.b * k.tk * cands.y, cands.c * k.tj * cands.z
    tx, ty, tz = _ceil_div(layer.m, pm), _ceil_div(layer.k, pk), _ceil_div(layer.n, pn)
    bl, br, bo, _ = buffers if buffers is not None else cands.buffers()
    bw = plat.bw
    ops = cands.x * cands.y * cands.z * k.ti * k.tk * k.tj
    tcomp = _compute_seconds(ops, plat.mac_per_cycle, plat.eff, plat.aie_freq_hz)
    return _parts_total_time(bl / bw.bw_l, br / bw.bw_r, bo / bw.bw_o, tcomp,
                             tx, ty, tz, layer.batch * layer.count)
