from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Box7

PSD_TOL = 1e-9


def check_covariance(cov, name: str = "covariance") -> np.ndarray:
    """Validate a 7x7 symmetric PSD matrix and return it as a float array."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (7, 7):
        raise ValueError(f"{name} must be 7x7, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.T)) > 1e-9 * scale:
        raise ValueError(f"{name} is not symmetric")
    # eigenvalues of the rescaled matrix avoid overflow for entries near the float limit
    try:
        min_eig = float(np.linalg.eigvalsh(0.5 * (cov / scale + cov.T / scale))[0])
    except np.linalg.LinAlgError:
        raise ValueError(f"{name}: eigen decomposition failed") from None
    if min_eig < -PSD_TOL:
        raise ValueError(f"{name} is not PSD (min eigenvalue {min_eig * scale:.3g})")
    return cov


@dataclass
class DetectionU:
    """A detection with an optional 7x7 covariance in (x, y, z, w, l, h, r) order.

    ``covariance=None`` means the detector supplied no uncertainty; consumers
    treat it as the zero matrix.
    """

    frame: int
    cls: str
    score: float
    box: Box7
    covariance: Optional[np.ndarray] = None
    sample_id: Optional[int] = None
    support: Optional[int] = field(default=None, compare=False)

    @property
    def sigma(self) -> np.ndarray:
        if self.covariance is None:
            return np.zeros((7, 7))
        return self.covariance


@dataclass(frozen=True)
class LabeledBox:
    """A box with a persistent identity: a ground-truth object or a reported track."""

    frame: int
    id: int
    cls: str
    box: Box7
    score: Optional[float] = None
