"""Published reference figures for the VCK190 monolithic design."""
from __future__ import annotations

from functools import lru_cache

from .perfmodel import AccConfig

# 384-tile monolithic design, native tile 1536 x 128 x 1024
REFERENCE_MONOLITHIC = AccConfig(12, 4, 8, 4, 1, 4)

# analytical-estimate GFLOPS of the monolithic design on square MMs
MONOLITHIC_ESTIMATE_GFLOPS = {
    64: 0.40,
    128: 3.22,
    256: 25.79,
    512: 178.42,
    1024: 1123.81,
    1536: 1649.01,
    2048: 1688.17,
    3072: 2895.90,
    4096: 2773.26,
    6144: 3363.89,
}

CALIBRATION_SIZES = (64, 1024, 6144)

# on-board GFLOPS per model and design style
MEASURED_APP_GFLOPS = {
    "bert": {"one_mono": 276.8, "one_spe": 515.4, "two_diverse": 1464.2, "eight_duplicate": 534.2},
    "vit": {"one_mono": 49.5, "one_spe": 217.1, "two_diverse": 1609.0, "eight_duplicate": 382.2},
    "ncf": {"one_mono": 1736.0, "one_spe": 1736.0, "two_diverse": 1730.9, "eight_duplicate": 671.0},
    "mlp": {"one_mono": 2936.7, "one_spe": 2936.7, "two_diverse": 2386.1, "eight_duplicate": 696.0},
}


def calibration_observations(sizes=CALIBRATION_SIZES):
    return [(s, REFERENCE_MONOLITHIC, MONOLITHIC_ESTIMATE_GFLOPS[s]) for s in sizes]


@lru_cache(maxsize=None)
def calibrated_vck190_profile():
    from .platform import builtin_platform, calibrate_bandwidth

    return calibrate_bandwidth(builtin_platform("vck190"), calibration_observations())
