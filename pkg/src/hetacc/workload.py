"""MM workloads: layer shapes, fixed-cost kernels and dependency graphs."""
from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import (CycleError, DanglingEdgeError, InvariantError, ParseError,
                     SelfEdgeError, UnknownModelError)

__all__ = [
    "LayerShape",
    "FixedKernel",
    "DependencyGraph",
    "ModelSpec",
    "layer_ops",
    "model_ops",
    "validate_graph",
    "builtin_model",
    "BUILTIN_MODELS",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "dump_model",
]


@dataclass(frozen=True)
class LayerShape:
    id: int
    m: int
    k: int
    n: int
    batch: int = 1
    count: int = 1

    def __post_init__(self):
        for name in ("m", "k", "n", "batch", "count"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvariantError(name, f"must be an integer >= 1, got {v!r}")
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 0:
            raise InvariantError("id", f"must be a non-negative integer, got {self.id!r}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.m, self.k, self.n)


@dataclass(frozen=True)
class FixedKernel:
    name: str
    time_s: float

    def __post_init__(self):
        if not self.time_s >= 0:
            raise InvariantError("time_s", f"must be >= 0, got {self.time_s!r}")


@dataclass(frozen=True)
class DependencyGraph:
    """Edges ``(pred, succ)``: succ may start only after pred finishes."""

    edges: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))

    @classmethod
    def chain(cls, n: int) -> "DependencyGraph":
        return cls(frozenset((i, i + 1) for i in range(n - 1)))

    def predecessors(self, node: int) -> list[int]:
        return sorted(a for a, b in self.edges if b == node)

    def successors(self, node: int) -> list[int]:
        return sorted(b for a, b in self.edges if a == node)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def validate_graph(deps: DependencyGraph, num_kernels: int) -> None:
    """Raise unless `deps` is acyclic and references ids in ``[0, num_kernels)``."""
    for a, b in deps.sorted_edges():
        if a == b:
            raise SelfEdgeError(f"self-edge on kernel {a}")
        for v in (a, b):
            if not 0 <= v < num_kernels:
                raise DanglingEdgeError(f"edge ({a}, {b}) references unknown kernel {v}")
    ts = graphlib.TopologicalSorter()
    for a, b in deps.sorted_edges():
        ts.add(b, a)
    try:
        ts.prepare()
    except graphlib.CycleError as exc:
        raise CycleError(exc.args[1]) from None


def layer_ops(layer: LayerShape) -> int:
    """Floating-point operations, two per multiply-accumulate."""
    return 2 * layer.m * layer.k * layer.n * layer.batch * layer.count


@dataclass(frozen=True)
class ModelSpec:
    """An application: MM layers, non-MM fixed kernels and a kernel graph.

    A layer with ``count > 1`` expands to `count` consecutive kernel ids; the
    dependency graph is defined over kernel ids.
    """

    name: str
    layers: tuple
    fixed_kernels: tuple = ()
    deps: DependencyGraph = field(default_factory=DependencyGraph)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "fixed_kernels", tuple(self.fixed_kernels))
        if not self.layers:
            raise InvariantError("layers", "model needs at least one layer")
        ids = [l.id for l in self.layers]
        if ids != list(range(len(ids))):
            raise InvariantError("layers", f"layer ids must be dense from 0 in order, got {ids}")
        validate_graph(self.deps, self.num_kernels)

    @property
    def num_kernels(self) -> int:
        return sum(l.count for l in self.layers)

    def kernels(self) -> list[tuple[int, LayerShape]]:
        """``(kernel_id, layer)`` for every kernel instance, in id order."""
        out = []
        for layer in self.layers:
            for _ in range(layer.count):
                out.append((len(out), layer))
        return out

    def kernel_layer(self) -> dict[int, int]:
        return {kid: layer.id for kid, layer in self.kernels()}

    @property
    def fixed_time_s(self) -> float:
        return sum(f.time_s for f in self.fixed_kernels)


def model_ops(model: ModelSpec) -> int:
    return sum(layer_ops(l) for l in model.layers)


def _layers(rows) -> tuple:
    return tuple(LayerShape(i, *row) for i, row in enumerate(rows))


def _fixed(ln, sm, tr):
    return (FixedKernel("layernorm", ln), FixedKernel("softmax", sm), FixedKernel("transpose", tr))


def _bert() -> ModelSpec:
    layers = _layers([
        (3072, 1024, 1024, 1, 4),
        (3072, 4096, 1024, 1, 1),
        (3072, 1024, 4096, 1, 1),
        (512, 64, 512, 96, 1),
        (512, 512, 64, 96, 1),
    ])
    # kernel ids: 0-3 the four 3072x1024x1024 layers, 4, 5 the FFN pair,
    # 6, 7 the two batch dots
    deps = DependencyGraph(frozenset({(0, 6), (1, 6), (6, 7), (2, 7), (7, 3), (3, 4), (4, 5)}))
    return ModelSpec("bert", layers, _fixed(4.5e-3, 18.7e-3, 5.2e-3), deps)


def _vit() -> ModelSpec:
    layers = _layers([
        (3072, 3024, 1024, 1, 1),
        (3072, 1024, 1024, 1, 1),
        (3072, 1024, 4096, 1, 1),
        (3072, 4096, 1024, 1, 1),
        (3072, 1024, 3048, 1, 1),
        (64, 64, 64, 768, 2),
    ])
    return ModelSpec("vit", layers, _fixed(4.5e-3, 2.3e-3, 5.2e-3), DependencyGraph.chain(7))


def _ncf() -> ModelSpec:
    kn = [(4096, 2048), (2048, 1024), (1024, 512), (512, 256), (256, 128),
          (128, 64), (64, 32), (32, 16), (32, 1)]
    layers = _layers([(3072, k, n, 1, 1) for k, n in kn])
    return ModelSpec("ncf", layers, (), DependencyGraph.chain(9))


def _mlp() -> ModelSpec:
    layers = _layers([
        (3072, 2048, 4096, 1, 1),
        (3072, 4096, 4096, 1, 2),
        (3072, 4096, 1024, 1, 1),
    ])
    return ModelSpec("mlp", layers, (), DependencyGraph.chain(4))


BUILTIN_MODELS = {"bert": _bert, "vit": _vit, "ncf": _ncf, "mlp": _mlp}


def builtin_model(name: str) -> ModelSpec:
    try:
        return BUILTIN_MODELS[name.lower()]()
    except KeyError:
        raise UnknownModelError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None


def model_to_dict(model: ModelSpec) -> dict:
    return {
        "name": model.name,
        "layers": [
            {"m": l.m, "k": l.k, "n": l.n, "batch": l.batch, "count": l.count}
            for l in model.layers
        ],
        "deps": [list(e) for e in model.deps.sorted_edges()],
        "fixed_kernels": [{"name": f.name, "time_s": f.time_s} for f in model.fixed_kernels],
    }


def model_from_dict(doc: dict) -> ModelSpec:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a mapping")
    unknown = sorted(set(doc) - {"name", "layers", "deps", "fixed_kernels"})
    if unknown:
        raise InvariantError(unknown[0], "unknown field")
    if "layers" not in doc:
        raise InvariantError("layers", "missing required field")
    layers = []
    for i, row in enumerate(doc["layers"]):
        extra = sorted(set(row) - {"id", "m", "k", "n", "batch", "count"})
        if extra:
            raise InvariantError(f"layers[{i}].{extra[0]}", "unknown field")
        if row.get("id", i) != i:
            raise InvariantError(f"layers[{i}].id", "layer ids must be dense from 0 in order")
        layers.append(LayerShape(i, row["m"], row["k"], row["n"],
                                 row.get("batch", 1), row.get("count", 1)))
    n_kernels = sum(l.count for l in layers)
    if "deps" in doc:
        deps = DependencyGraph(frozenset(tuple(e) for e in doc["deps"]))
    else:
        deps = DependencyGraph.chain(n_kernels)
    fixed = tuple(FixedKernel(str(f["name"]), float(f["time_s"])) for f in doc.get("fixed_kernels", []))
    return ModelSpec(str(doc.get("name", "model")), tuple(layers), fixed, deps)


def load_model(source) -> ModelSpec:
    """Load a model from a path, JSON/YAML text, a mapping or a builtin name."""
    if isinstance(source, dict):
        return model_from_dict(source)
    if isinstance(source, str) and source.lower() in BUILTIN_MODELS:
        return builtin_model(source)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and not source.lstrip().startswith("{")):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse model document: {exc}") from exc
    return model_from_dict(doc)


def dump_model(model: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
