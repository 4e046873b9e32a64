"""JSON documents for designs, compositions and run reports.

Every writer here has a reader that rebuilds an equal in-memory value, so a
composition written by ``hetacc compose`` can be fed back to
``hetacc simulate`` without re-running the search.
"""
from __future__ import annotations

import json
from pathlib import Path

from .cdac import CompositionResult, Partition
from .cdse import RankedDesign, ResourceBudget
from .errors import ParseError
from .perfmodel import AccConfig, BufferFootprint, KernelSpec, PortCount
from .platform import BandwidthProfile, PlatformSpec, platform_from_dict, platform_to_dict
from .workload import ModelSpec, model_from_dict, model_to_dict

__all__ = [
    "COMPOSITION_FORMAT",
    "cfg_to_dict",
    "cfg_from_dict",
    "design_to_dict",
    "design_from_dict",
    "budget_to_dict",
    "budget_from_dict",
    "composition_to_dict",
    "composition_from_dict",
    "design_descriptor",
    "write_json",
    "read_json",
    "save_composition",
    "load_composition",
]

COMPOSITION_FORMAT = "hetacc.composition/1"


def _bw_to_dict(bw: BandwidthProfile) -> dict:
    return {"bw_l": bw.bw_l, "bw_r": bw.bw_r, "bw_o": bw.bw_o, "bw_total": bw.bw_total}


def _bw_from_dict(doc: dict) -> BandwidthProfile:
    return BandwidthProfile(float(doc["bw_l"]), float(doc["bw_r"]), float(doc["bw_o"]),
                            float(doc["bw_total"]))


def cfg_to_dict(cfg: AccConfig) -> dict:
    k = cfg.kernel
    return {"a": cfg.a, "b": cfg.b, "c": cfg.c, "x": cfg.x, "y": cfg.y, "z": cfg.z,
            "ti": k.ti, "tk": k.tk, "tj": k.tj, "ctc": k.ctc, "bpd": k.bpd}


def cfg_from_dict(doc: dict) -> AccConfig:
    kernel = KernelSpec(int(doc["ti"]), int(doc["tk"]), int(doc["tj"]),
                        int(doc["ctc"]), int(doc["bpd"]))
    return AccConfig(int(doc["a"]), int(doc["b"]), int(doc["c"]),
                     int(doc["x"]), int(doc["y"]), int(doc["z"]), kernel)


def design_to_dict(d: RankedDesign) -> dict:
    return {
        "cfg": cfg_to_dict(d.cfg),
        "tiles": d.cfg.tiles,
        "native_tile": list(d.cfg.native_tile),
        "total_time_s": d.total_time,
        "gflops": d.gflops,
        "ports_in": d.ports.ports_in,
        "ports_out": d.ports.ports_out,
        "buff_l": d.buffers.buff_l,
        "buff_r": d.buffers.buff_r,
        "buff_o": d.buffers.buff_o,
        "buff_total": d.buffers.total,
    }


def design_from_dict(doc: dict) -> RankedDesign:
    return RankedDesign(
        cfg_from_dict(doc["cfg"]),
        float(doc["total_time_s"]),
        float(doc["gflops"]),
        PortCount(int(doc["ports_in"]), int(doc["ports_out"])),
        BufferFootprint(int(doc["buff_l"]), int(doc["buff_r"]), int(doc["buff_o"]),
                        int(doc["buff_total"])),
    )


def budget_to_dict(b: ResourceBudget) -> dict:
    return {"aie_max": b.aie_max, "plio_in_max": b.plio_in_max, "plio_out_max": b.plio_out_max,
            "ram_max": b.ram_max, "bw": _bw_to_dict(b.bw)}


def budget_from_dict(doc: dict) -> ResourceBudget:
    return ResourceBudget(int(doc["aie_max"]), int(doc["plio_in_max"]), int(doc["plio_out_max"]),
                          int(doc["ram_max"]), _bw_from_dict(doc["bw"]))


def composition_to_dict(comp: CompositionResult) -> dict:
    return {
        "model_name": comp.model_name,
        "assignment": {str(k): v for k, v in comp.assignment.items()},
        "accs": [design_to_dict(d) for d in comp.accs],
        "budgets": [budget_to_dict(b) for b in comp.budgets],
        "makespan_time_s": comp.makespan_time,
        "partition": [list(g) for g in comp.partition.groups],
        "runtime_config": {str(k): v for k, v in comp.runtime_config.items()},
        "candidates_evaluated": comp.candidates_evaluated,
        "total_ops": comp.total_ops,
        "throughput_gflops": comp.throughput_gflops,
    }


def composition_from_dict(doc: dict) -> CompositionResult:
    try:
        return CompositionResult(
            model_name=str(doc["model_name"]),
            assignment={int(k): int(v) for k, v in doc["assignment"].items()},
            accs=tuple(design_from_dict(d) for d in doc["accs"]),
            budgets=tuple(budget_from_dict(b) for b in doc["budgets"]),
            makespan_time=float(doc["makespan_time_s"]),
            partition=Partition(tuple(tuple(g) for g in doc["partition"])),
            runtime_config={int(k): int(v) for k, v in doc["runtime_config"].items()},
            candidates_evaluated=int(doc.get("candidates_evaluated", 0)),
            total_ops=int(doc.get("total_ops", 0)),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed composition document: {exc!r}") from exc


def design_descriptor(comp: CompositionResult, acc: int, model: ModelSpec) -> dict:
    """What a code generator needs to build accelerator `acc`: tiling
    factors, port and buffer sizes, and the work it runs."""
    layers = sorted(lid for lid, a in comp.assignment.items() if a == acc)
    kernels = sorted(kid for kid, a in comp.runtime_config.items() if a == acc)
    return {
        "acc": acc,
        "model": model.name,
        "design": design_to_dict(comp.accs[acc]),
        "budget": budget_to_dict(comp.budgets[acc]),
        "layers": layers,
        "kernels": kernels,
    }


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_composition(comp: CompositionResult, model: ModelSpec, plat: PlatformSpec, path) -> None:
    """One self-contained file: the composition plus the model and platform
    it was built for."""
    write_json({
        "format": COMPOSITION_FORMAT,
        "platform": platform_to_dict(plat),
        "model": model_to_dict(model),
        "composition": composition_to_dict(comp),
    }, path)


def load_composition(path) -> tuple[CompositionResult, ModelSpec, PlatformSpec]:
    doc = read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != COMPOSITION_FORMAT:
        raise ParseError(f"{path}: not a {COMPOSITION_FORMAT} document")
    return (composition_from_dict(doc["composition"]), model_from_dict(doc["model"]),
            platform_from_dict(doc["platform"]))
