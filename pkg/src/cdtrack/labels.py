"""Regression targets for filter training.

The desired response is a periodic 2-D Gaussian whose peak sits at cell
(0, 0) with value exactly 1; distances wrap around the plane so the label
is compatible with the circular correlation model.  The bandwidth scales
with the tracked object's size through ``sigma_factor``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabelConfig:
    """Geometry and sharpness of the desired response."""

    height: int
    width: int
    sigma_factor: float = 0.1

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"label plane must be nonempty, got {self.height}x{self.width}")
        if not 0.0 < self.sigma_factor < 1.0:
            raise ValueError(f"sigma_factor must lie in (0, 1), got {self.sigma_factor}")


def gaussian_label(cfg: LabelConfig, target_h: float, target_w: float) -> np.ndarray:
    """Periodic Gaussian label with sigma = sigma_factor * sqrt(target area).

    ``target_h`` and ``target_w`` are the object's extent measured in label
    grid cells.
    """
    if target_h <= 0 or target_w <= 0:
        raise ValueError(f"target dimensions must be positive, got {target_h}x{target_w}")
    sigma = cfg.sigma_factor * np.sqrt(float(target_h) * float(target_w))
    if sigma <= 0:
        raise ValueError(f"label sigma must be positive, got {sigma}")
    iy = np.arange(cfg.height)
    ix = np.arange(cfg.width)
    dy = np.minimum(iy, cfg.height - iy)
    dx = np.minimum(ix, cfg.width - ix)
    return np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma**2))
