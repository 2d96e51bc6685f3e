"""Estimators for the groupwise model and the eigen-solvers behind them."""
from dataclasses import dataclass, field

import numpy as np

POSTERIOR_MEAN = "posterior_mean"
SCALE_FREE = "unit_scale_free"


@dataclass
class EstimateSet:
    """One estimate per group plus a tag saying whether its scale means anything."""

    xhat: list
    scale: str = POSTERIOR_MEAN
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scale not in (POSTERIOR_MEAN, SCALE_FREE):
            raise ValueError(f"unknown scale tag {self.scale!r}")
        self.xhat = [np.asarray(x, dtype=np.float64) for x in self.xhat]

    @property
    def stacked(self):
        return np.concatenate(self.xhat)


def split(vec, offsets):
    return [vec[offsets[k]:offsets[k + 1]].copy() for k in range(len(offsets) - 1)]


from .eig import leading_eigvec, power_iteration  # noqa: E402
from .spectral import joint_pca, weight_grid, weight_grid_search, weighted_pca  # noqa: E402
from .gd import GdConfig, gradient_descent  # noqa: E402
from .amp import AmpState, amp_general, amp_groupwise  # noqa: E402
from .bp import relaxed_bp  # noqa: E402

__all__ = [
    "EstimateSet", "POSTERIOR_MEAN", "SCALE_FREE", "split",
    "power_iteration", "leading_eigvec",
    "joint_pca", "weighted_pca", "weight_grid", "weight_grid_search",
    "GdConfig", "gradient_descent",
    "AmpState", "amp_groupwise", "amp_general", "relaxed_bp",
]
