"""scikit-learn style wrappers around calibration and single-acc search.

``BandwidthCalibrator`` learns stream bandwidths from (problem, design,
GFLOPS) observations and predicts GFLOPS. ``AcceleratorSearch`` fits the
best accelerator for a set of MM layers and predicts per-layer seconds for
new layers on that accelerator. Rows are plain numeric arrays so both work
with ``clone``, ``get_params`` and cross-validation utilities.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cdse import FactorBounds, ResourceBudget, SearchSpace, cdse_search
from .perfmodel import DEFAULT_KERNEL, AccConfig, KernelSpec, layer_time, square_layer
from .platform import PlatformSpec, builtin_platform, calibrate_bandwidth
from .reference import REFERENCE_MONOLITHIC
from .workload import LayerShape

__all__ = ["BandwidthCalibrator", "AcceleratorSearch", "layers_from_array", "observations_from_array"]


def _platform(p) -> PlatformSpec:
    if isinstance(p, PlatformSpec):
        return p
    return builtin_platform(str(p))


def observations_from_array(X, y=None, default_cfg: AccConfig = REFERENCE_MONOLITHIC):
    """Rows are ``[size]`` or ``[size, a, b, c, x, y, z]``."""
    X = check_array(X, dtype=np.int64, ensure_min_samples=1)
    if X.shape[1] not in (1, 7):
        raise ValueError(f"expected 1 or 7 columns (size[, a, b, c, x, y, z]), got {X.shape[1]}")
    if (X <= 0).any():
        raise ValueError("sizes and factors must be positive")
    out = []
    for i, row in enumerate(X):
        cfg = default_cfg if X.shape[1] == 1 else AccConfig(*map(int, row[1:]), default_cfg.kernel)
        out.append((int(row[0]), cfg, None if y is None else float(y[i])))
    return out


def layers_from_array(X) -> list[LayerShape]:
    """Rows are ``[m, k, n]``, ``[m, k, n, batch]`` or ``[m, k, n, batch, count]``."""
    X = check_array(X, dtype=np.int64, ensure_min_samples=1)
    if not 3 <= X.shape[1] <= 5:
        raise ValueError(f"expected 3 to 5 columns (m, k, n[, batch[, count]]), got {X.shape[1]}")
    if (X <= 0).any():
        raise ValueError("layer dimensions must be positive")
    return [LayerShape(i, *map(int, row)) for i, row in enumerate(X)]


class BandwidthCalibrator(RegressorMixin, BaseEstimator):
    """Fit per-stream off-chip bandwidths from observed square-MM GFLOPS.

    Parameters
    ----------
    platform : PlatformSpec or str
        Platform whose compute parameters and peak bandwidth bound the fit.
    grid_levels : int
        Grid refinement; each stream is searched over ``2**grid_levels + 1``
        geometric points.
    span : float
        Ratio between the largest and smallest bandwidth on the grid.
    max_rms_rel_error : float
        Fits with a larger RMS relative error raise ``CalibrationError``.
    """

    def __init__(self, platform="vck190", grid_levels=7, span=64.0, max_rms_rel_error=0.25):
        self.platform = platform
        self.grid_levels = grid_levels
        self.span = span
        self.max_rms_rel_error = max_rms_rel_error

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.int64, y_numeric=True)
        if (y <= 0).any():
            raise ValueError("observed GFLOPS must be positive")
        plat = _platform(self.platform)
        fit = calibrate_bandwidth(plat, observations_from_array(X, y),
                                  grid_levels=self.grid_levels, span=self.span,
                                  max_rms_rel_error=self.max_rms_rel_error, return_fit=True)
        self.profile_ = fit.profile
        self.residual_ = fit.residual
        self.platform_ = plat.with_bandwidth(fit.profile)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "profile_")
        obs = observations_from_array(X)
        return np.array([layer_time(square_layer(s), cfg, self.platform_).gflops
                         for s, cfg, _ in obs])


class AcceleratorSearch(BaseEstimator):
    """Exhaustive search for the single accelerator that runs a layer set fastest.

    ``fit(X)`` takes layer rows and stores the winning design in
    ``best_design_``; ``predict(X)`` returns modeled seconds per row on it.

    Parameters
    ----------
    platform : PlatformSpec or str
    budget : ResourceBudget or None
        Defaults to the whole platform.
    top_k : int
        Number of ranked designs kept in ``designs_``.
    kernel : KernelSpec
    bounds : FactorBounds
    """

    def __init__(self, platform="vck190", budget=None, top_k=1,
                 kernel: KernelSpec = DEFAULT_KERNEL, bounds: FactorBounds = FactorBounds()):
        self.platform = platform
        self.budget = budget
        self.top_k = top_k
        self.kernel = kernel
        self.bounds = bounds

    def fit(self, X, y=None):
        layers = layers_from_array(X)
        plat = _platform(self.platform)
        budget = self.budget if self.budget is not None else ResourceBudget.from_platform(plat)
        stats = {}
        space = SearchSpace(budget, self.kernel, self.bounds, cache_bytes=0)
        self.designs_ = cdse_search(layers, budget, plat, self.top_k, kernel=self.kernel,
                                    bounds=self.bounds, space=space, stats=stats)
        self.best_design_ = self.designs_[0]
        self.candidates_ = stats["candidates"]
        self.platform_ = plat.with_bandwidth(budget.bw)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "best_design_")
        cfg = self.best_design_.cfg
        return np.array([layer_time(l, cfg, self.platform_).total_time for l in layers_from_array(X)])
