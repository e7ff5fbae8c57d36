"""Anchor decoding of offset predictions and analytic variance propagation.

This is the "internal" uncertainty route: a stochastic detector head yields a
mean and a variance for each anchor-relative offset, and the variance is
carried through the decoding by treating each offset as an independent
Gaussian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box7


@dataclass(frozen=True)
class AnchorBox:
    x_a: float
    y_a: float
    z_a: float
    w_a: float
    l_a: float
    h_a: float
    r_a: float

    def __post_init__(self):
        vals = (self.x_a, self.y_a, self.z_a, self.w_a, self.l_a, self.h_a, self.r_a)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite anchor component: {vals}")
        if self.w_a <= 0 or self.l_a <= 0 or self.h_a <= 0:
            raise ValueError("anchor extents must be positive")

    @property
    def diagonal(self) -> float:
        return math.sqrt(self.l_a**2 + self.w_a**2)

    def to_array(self) -> np.ndarray:
        return np.array([self.x_a, self.y_a, self.z_a, self.w_a, self.l_a, self.h_a, self.r_a])


@dataclass(frozen=True)
class OffsetPrediction:
    """Per-anchor offset mean and variance, ordered (x, y, z, w, l, h, r)."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(7)
        var = np.asarray(self.var, dtype=float).reshape(7)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise ValueError("offset prediction contains non-finite values")
        if np.any(var < 0):
            raise ValueError(f"negative offset variance: {var}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)


@dataclass(frozen=True)
class DecodedBoxU:
    box: Box7
    var: np.ndarray


def v_exp(m, v):
    """Variance of ``exp(X)`` for ``X ~ N(m, v)`` (lognormal variance).

    Works elementwise on arrays.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("variance must be non-negative")
    m = np.asarray(m, dtype=float)
    # e^{2m+v} (e^v - 1), with expm1 for accuracy at small v
    out = np.exp(2.0 * m + v) * np.expm1(v)
    return float(out) if out.ndim == 0 else out


def decode_offsets(offsets, anchor: AnchorBox) -> np.ndarray:
    """Vectorised decoding of one or many raw offset 7-vectors (no yaw wrap)."""
    o = np.asarray(offsets, dtype=float)
    d = anchor.diagonal
    out = np.empty_like(o)
    out[..., 0] = o[..., 0] * d + anchor.x_a
    out[..., 1] = o[..., 1] * d + anchor.y_a
    out[..., 3] = np.exp(o[..., 3]) * anchor.w_a
    out[..., 4] = np.exp(o[..., 4]) * anchor.l_a
    out[..., 5] = np.exp(o[..., 5]) * anchor.h_a
    out[..., 6] = o[..., 6] + anchor.r_a
    # the top face z_a + h_a/2 is held fixed as the height changes
    out[..., 2] = o[..., 2] * anchor.h_a + anchor.z_a + anchor.h_a / 2.0 - out[..., 5] / 2.0
    return out


def decode_box(p: OffsetPrediction, a: AnchorBox) -> Box7:
    return Box7.from_array(decode_offsets(p.mean, a))


def propagate_variance(p: OffsetPrediction, a: AnchorBox, height_coupling: bool = True) -> DecodedBoxU:
    """Decode the mean offsets and push the offset variances through the decoding.

    With ``height_coupling`` the center-height variance also carries the
    ``-h/2`` term of the z decoding, which makes it the exact variance of the
    decoded z. Turning it off gives ``v_z * h_a**2`` alone.
    """
    v = p.var
    m = p.mean
    d2 = a.l_a**2 + a.w_a**2
    out = np.empty(7)
    out[0] = v[0] * d2
    out[1] = v[1] * d2
    out[3] = v_exp(m[3], v[3]) * a.w_a**2
    out[4] = v_exp(m[4], v[4]) * a.l_a**2
    out[5] = v_exp(m[5], v[5]) * a.h_a**2
    out[6] = v[6]
    out[2] = v[2] * a.h_a**2
    if height_coupling:
        out[2] += out[5] / 4.0
    return DecodedBoxU(box=decode_box(p, a), var=out)


def variance_to_covariance(d: DecodedBoxU) -> np.ndarray:
    var = np.asarray(d.var, dtype=float)
    if np.any(var < 0):
        raise ValueError("variances must be non-negative")
    return np.diag(var)
