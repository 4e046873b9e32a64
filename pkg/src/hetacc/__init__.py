"""Design-space exploration and scheduling for composed heterogeneous MM accelerators."""
from .errors import *  # noqa: F401,F403
from .platform import (BandwidthProfile, PlatformSpec, builtin_platform,  # noqa: F401
                       calibrate_bandwidth, load_platform, scale_platform)
from .workload import (DependencyGraph, FixedKernel, LayerShape, ModelSpec,  # noqa: F401
                       builtin_model, layer_ops, load_model, validate_graph)
from .perfmodel import (AccConfig, KernelSpec, buffer_bytes, compute_time,  # noqa: F401
                        layer_time, port_count, throughput, tile_counts)

__version__ = "0.1.0"
