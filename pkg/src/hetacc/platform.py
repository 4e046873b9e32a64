"""Hardware platform descriptions: loading, scaling and bandwidth calibration."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import CalibrationError, InvariantError, ParseError

__all__ = [
    "BandwidthProfile",
    "PlatformSpec",
    "load_platform",
    "builtin_platform",
    "platform_to_dict",
    "dump_platform",
    "scale_platform",
    "calibrate_bandwidth",
    "CalibrationFit",
]


@dataclass(frozen=True)
class BandwidthProfile:
    """Off-chip bandwidth in bytes/s for the LHS, RHS and output streams."""

    bw_l: float
    bw_r: float
    bw_o: float
    bw_total: float

    def __post_init__(self):
        for name in ("bw_l", "bw_r", "bw_o", "bw_total"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvariantError(f"bw.{name}", f"must be a positive finite number, got {v!r}")
        for name in ("bw_l", "bw_r", "bw_o"):
            if getattr(self, name) > self.bw_total * (1 + 1e-12):
                raise InvariantError(f"bw.{name}", "stream bandwidth exceeds bw_total")

    @classmethod
    def uncalibrated(cls, bw_total: float) -> "BandwidthProfile":
        share = bw_total / 4
        return cls(share, share, share, bw_total)

    def scaled(self, factor) -> "BandwidthProfile":
        f = float(factor)
        return BandwidthProfile(self.bw_l * f, self.bw_r * f, self.bw_o * f, self.bw_total * f)

    def split(self, parts: int) -> "BandwidthProfile":
        """Even share for one of `parts` accelerators."""
        return self.scaled(Fraction(1, parts))


def _check_count(name, v, lo=1):
    if isinstance(v, bool) or not isinstance(v, int):
        raise InvariantError(name, f"must be an integer, got {v!r}")
    if v < lo:
        raise InvariantError(name, f"must be >= {lo}, got {v}")


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    aie_total: int
    plio_in: int
    plio_out: int
    ram_bytes: int
    aie_freq_hz: float
    mac_per_cycle: int
    eff: float
    bw: BandwidthProfile = field(repr=False)

    def __post_init__(self):
        _check_count("aie_total", self.aie_total)
        _check_count("plio_in", self.plio_in)
        _check_count("plio_out", self.plio_out)
        _check_count("ram_bytes", self.ram_bytes)
        _check_count("mac_per_cycle", self.mac_per_cycle)
        if not (self.aie_freq_hz > 0 and math.isfinite(self.aie_freq_hz)):
            raise InvariantError("aie_freq_hz", "must be positive")
        if not (0 < self.eff <= 1):
            raise InvariantError("eff", f"must lie in (0, 1], got {self.eff!r}")
        if not isinstance(self.bw, BandwidthProfile):
            raise InvariantError("bw", "must be a BandwidthProfile")

    @property
    def compute_roof_gflops(self) -> float:
        """Peak modeled throughput with every tile busy."""
        return self.aie_total * self.mac_per_cycle * 2 * self.aie_freq_hz * self.eff / 1e9

    def with_bandwidth(self, bw: BandwidthProfile) -> "PlatformSpec":
        return replace(self, bw=bw)


_DEFAULTS = {
    "name": "platform",
    "plio_in": 128,
    "plio_out": 128,
    "aie_freq_hz": 1.0e9,
    "mac_per_cycle": 8,
    "eff": 0.8,
}
_REQUIRED = ("aie_total", "ram_bytes", "bw")
_INT_FIELDS = ("aie_total", "plio_in", "plio_out", "ram_bytes", "mac_per_cycle")


def _as_int(name, v):
    # YAML/JSON may hand back 1.9e7 as a float; accept it only when integral.
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def platform_from_dict(doc: dict) -> PlatformSpec:
    if not isinstance(doc, dict):
        raise ParseError("platform document must be a mapping")
    allowed = {f for f in PlatformSpec.__dataclass_fields__}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise InvariantError(unknown[0], "unknown field")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise InvariantError(missing[0], "missing required field")
    vals = {**_DEFAULTS, **doc}
    for k in _INT_FIELDS:
        vals[k] = _as_int(k, vals[k])
    bw = vals["bw"]
    if isinstance(bw, dict):
        extra = sorted(set(bw) - {"bw_l", "bw_r", "bw_o", "bw_total"})
        if extra:
            raise InvariantError(f"bw.{extra[0]}", "unknown field")
        if "bw_total" not in bw:
            raise InvariantError("bw.bw_total", "missing required field")
        total = float(bw["bw_total"])
        share = total / 4
        bw = BandwidthProfile(
            float(bw.get("bw_l", share)),
            float(bw.get("bw_r", share)),
            float(bw.get("bw_o", share)),
            total,
        )
    elif not isinstance(bw, BandwidthProfile):
        raise InvariantError("bw", "must be a mapping")
    vals["bw"] = bw
    vals["aie_freq_hz"] = float(vals["aie_freq_hz"])
    vals["eff"] = float(vals["eff"])
    vals["name"] = str(vals["name"])
    return PlatformSpec(**vals)


def load_platform(source) -> PlatformSpec:
    """Parse a platform document.

    `source` may be a path, a text document (JSON or YAML) or an already
    decoded mapping.
    """
    if isinstance(source, dict):
        return platform_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse platform document: {exc}") from exc
    return platform_from_dict(doc)


def platform_to_dict(spec: PlatformSpec) -> dict:
    return asdict(spec)


def dump_platform(spec: PlatformSpec, path) -> None:
    Path(path).write_text(json.dumps(platform_to_dict(spec), indent=2) + "\n")


def builtin_platform(name: str = "vck190", calibrated: bool = False) -> PlatformSpec:
    """Load a packaged platform; `calibrated` fits stream bandwidths to the
    published monolithic-design estimates (see `hetacc.reference`)."""
    text = resources.files("hetacc.data").joinpath(f"{name}.yaml").read_text()
    spec = load_platform(text)
    if calibrated:
        from .reference import calibrated_vck190_profile

        if name != "vck190":
            raise ValueError("calibration reference data exists only for vck190")
        spec = spec.with_bandwidth(calibrated_vck190_profile())
    return spec


def _fmt_scale(s) -> str:
    f = Fraction(s).limit_denominator(10**6)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _to_fraction(s) -> Fraction:
    f = Fraction(s) if not isinstance(s, float) else Fraction(s).limit_denominator(10**9)
    if f <= 0:
        raise InvariantError("scale", f"scales must be positive, got {s!r}")
    return f


def scale_platform(spec: PlatformSpec, aie_scale=1, ram_scale=1, bw_scale=1) -> PlatformSpec:
    """Scale tile count, on-chip RAM and every bandwidth field.

    Counts are rounded down and floored at 1. Scales may be ints, floats,
    Fractions or strings such as ``"1/8"``.
    """
    fa, fr, fb = (_to_fraction(s) for s in (aie_scale, ram_scale, bw_scale))
    tag = f"[aie={_fmt_scale(fa)},ram={_fmt_scale(fr)},bw={_fmt_scale(fb)}]"
    return replace(
        spec,
        name=spec.name + tag,
        aie_total=max(1, math.floor(spec.aie_total * fa)),
        ram_bytes=max(1, math.floor(spec.ram_bytes * fr)),
        bw=spec.bw.scaled(fb) if fb != 1 else spec.bw,
    )


@dataclass(frozen=True)
class CalibrationFit:
    profile: BandwidthProfile
    residual: float  # sum of squared relative errors
    modeled_gflops: tuple


def _bandwidth_bound(size, cfg, plat, gflops, margin=0.05):
    from .perfmodel import compute_time, square_layer, tile_counts
    from .workload import layer_ops

    layer = square_layer(size)
    tc = tile_counts(layer, cfg)
    t_inf = compute_time(cfg, plat) * tc.tx * tc.ty * tc.tz
    roof = layer_ops(layer) / t_inf / 1e9
    return gflops < roof * (1 - margin)


def calibrate_bandwidth(
    spec: PlatformSpec,
    observations: Sequence[tuple],
    *,
    grid_levels: int = 7,
    span: float = 64.0,
    max_rms_rel_error: float = 0.25,
    return_fit: bool = False,
):
    """Fit per-stream bandwidths to measured throughput of square MMs.

    Each observation is ``(size, cfg, gflops)``. Every stream bandwidth is
    searched on a geometric grid of ``2**grid_levels + 1`` points spanning
    ``[bw_total/span, bw_total]``; grids of successive levels are nested, so
    a finer grid never fits worse. The objective is the sum of squared
    relative GFLOPS errors.
    """
    from .perfmodel import (_parts_total_time, buffer_bytes, compute_time,
                            square_layer, tile_counts)
    from .workload import layer_ops

    obs = list(observations)
    if len(obs) < 3:
        raise CalibrationError(f"need at least 3 observations, got {len(obs)}")
    if not any(_bandwidth_bound(s, c, spec, g) for s, c, g in obs):
        raise CalibrationError("no bandwidth-bound observation; bandwidth is unidentifiable")
    if grid_levels < 1:
        raise ValueError("grid_levels must be >= 1")

    n = 2**grid_levels + 1
    total = spec.bw.bw_total
    lo = total / span
    grid = lo * np.power(span, np.arange(n) / (n - 1))
    grid[-1] = total

    bl = grid[:, None, None]
    br = grid[None, :, None]
    bo = grid[None, None, :]
    resid = np.zeros((n, n, n))
    for size, cfg, measured in obs:
        layer = square_layer(size)
        tc = tile_counts(layer, cfg)
        buf = buffer_bytes(cfg)
        t = _parts_total_time(
            buf.buff_l / bl, buf.buff_r / br, buf.buff_o / bo,
            compute_time(cfg, spec), tc.tx, tc.ty, tc.tz, layer.batch * layer.count,
        )
        model = layer_ops(layer) / t / 1e9
        resid = resid + ((model - measured) / measured) ** 2

    best = resid.min()
    # ties: larger bw_o, then bw_l, then bw_r
    idx = np.argwhere(resid == best)
    i, j, k = max(map(tuple, idx), key=lambda t: (t[2], t[0], t[1]))
    rms = math.sqrt(best / len(obs))
    if not math.isfinite(best) or rms > max_rms_rel_error:
        raise CalibrationError("no bandwidth profile within grid bounds fits the data", best)
    profile = BandwidthProfile(float(grid[i]), float(grid[j]), float(grid[k]), total)
    if not return_fit:
        return profile

    from .perfmodel import layer_time

    plat = spec.with_bandwidth(profile)
    modeled = tuple(layer_time(square_layer(s), c, plat).gflops for s, c, _ in obs)
    return CalibrationFit(profile, float(best), modeled)
