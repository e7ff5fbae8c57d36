"""Yaw-only 3D boxes and the overlap / distance measures built on them.

Boxes live in a right-handed ground frame: x right, y forward, z up. The
yaw ``r`` is measured counter-clockwise from +x and the box length ``l``
runs along the heading, width ``w`` across it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# canonical component order shared by every 7-vector and 7x7 matrix
COMPONENTS = ("x", "y", "z", "w", "l", "h", "r")
YAW_INDEX = 6


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    # float rounding can land exactly on +pi
    return -math.pi if w >= math.pi else w


@dataclass(frozen=True)
class Box7:
    x: float
    y: float
    z: float
    w: float
    l: float
    h: float
    r: float

    def __post_init__(self):
        vals = (self.x, self.y, self.z, self.w, self.l, self.h, self.r)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box component: {vals}")
        if self.w <= 0 or self.l <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w} l={self.l} h={self.h}")
        object.__setattr__(self, "r", wrap_angle(float(self.r)))

    @classmethod
    def from_array(cls, v) -> "Box7":
        v = np.asarray(v, dtype=float).reshape(7)
        return cls(*(float(c) for c in v))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.w, self.l, self.h, self.r])

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def volume(self) -> float:
        return self.w * self.l * self.h

    def bev_corners(self) -> list[tuple[float, float]]:
        """Footprint corners, counter-clockwise."""
        c, s = math.cos(self.r), math.sin(self.r)
        hl, hw = self.l / 2.0, self.w / 2.0
        out = []
        for dl, dw in ((hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)):
            out.append((self.x + dl * c - dw * s, self.y + dl * s + dw * c))
        return out


def center_distance(a: Box7, b: Box7) -> float:
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def polygon_area(poly) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return 0.5 * acc


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clipping of ``subject`` against convex CCW ``clip``."""
    output = list(subject)
    cp1 = clip[-1]
    for cp2 in clip:
        if not output:
            break
        inp, output = output, []
        ex, ey = cp2[0] - cp1[0], cp2[1] - cp1[1]

        def side(p):
            return ex * (p[1] - cp1[1]) - ey * (p[0] - cp1[0])

        s = inp[-1]
        s_side = side(s)
        for e in inp:
            e_side = side(e)
            if e_side >= 0:
                if s_side < 0:
                    output.append(_intersect(s, e, s_side, e_side))
                output.append(e)
            elif s_side >= 0:
                output.append(_intersect(s, e, s_side, e_side))
            s, s_side = e, e_side
        cp1 = cp2
    return output


def _intersect(s, e, s_side, e_side):
    t = s_side / (s_side - e_side)
    return (s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1]))


def bev_intersection_area(a: Box7, b: Box7) -> float:
    # cheap reject on circumscribed circles
    ra = 0.5 * math.hypot(a.w, a.l)
    rb = 0.5 * math.hypot(b.w, b.l)
    if math.hypot(a.x - b.x, a.y - b.y) >= ra + rb:
        return 0.0
    inter = clip_polygon(a.bev_corners(), b.bev_corners())
    area = polygon_area(inter)
    return area if area > 0.0 else 0.0


def iou_bev(a: Box7, b: Box7) -> float:
    inter = bev_intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    union = a.w * a.l + b.w * b.l - inter
    return min(1.0, inter / union)


def vertical_overlap(a: Box7, b: Box7) -> float:
    top = min(a.z + a.h / 2.0, b.z + b.h / 2.0)
    bottom = max(a.z - a.h / 2.0, b.z - b.h / 2.0)
    return max(0.0, top - bottom)


def iou_3d(a: Box7, b: Box7) -> float:
    dz = vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    inter = bev_intersection_area(a, b) * dz
    if inter <= 0.0:
        return 0.0
    union = a.volume() + b.volume() - inter
    return min(1.0, inter / union)


def covariance_ellipse(cov_xy, n_std: float = 1.0) -> tuple[float, float, float]:
    """Semi-axes and orientation of the ground-plane covariance ellipse.

    Returns ``(semi_major, semi_minor, angle)`` where ``angle`` is the
    direction of the major axis in radians.
    """
    cov_xy = np.asarray(cov_xy, dtype=float)
    cov_xy = 0.5 * (cov_xy + cov_xy.T)
    vals, vecs = np.linalg.eigh(cov_xy)
    vals = np.clip(vals, 0.0, None)
    major = vecs[:, 1]
    angle = wrap_angle(math.atan2(major[1], major[0]))
    return n_std * math.sqrt(vals[1]), n_std * math.sqrt(vals[0]), angle
