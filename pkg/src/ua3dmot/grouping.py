"""Fusing S stochastic detector passes into detections with a full covariance.

Boxes from all samples are clustered greedily: samples are visited in index
order, boxes within a sample by descending score, and every box either joins
the nearest existing group (distance to the group's running mean center) or,
when that distance exceeds the gate, starts a new group. Each group then
gives a mean box and the sample covariance of its members.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .detection import DetectionU
from .geometry import YAW_INDEX, Box7, wrap_angle

SampleSet = Sequence[Sequence[DetectionU]]


@dataclass(frozen=True)
class GroupingConfig:
    gate_distance: float = 1.0
    min_support_fraction: float = 0.0

    def __post_init__(self):
        if not self.gate_distance > 0:
            raise ValueError("gate_distance must be positive")
        if not 0.0 <= self.min_support_fraction <= 1.0:
            raise ValueError("min_support_fraction must be in [0, 1]")


@dataclass
class BoxGroup:
    cls: str
    members: list = field(default_factory=list)  # (sample index, DetectionU)
    mean_box: Optional[Box7] = None
    covariance: Optional[np.ndarray] = None
    degenerate: bool = False
    # running sum of member centers, used only while grouping
    _center_sum: np.ndarray = field(default_factory=lambda: np.zeros(3), repr=False)

    @property
    def support(self) -> int:
        return len(self.members)

    @property
    def center(self) -> np.ndarray:
        return self._center_sum / len(self.members)

    def add(self, sample_index: int, det: DetectionU) -> None:
        self.members.append((sample_index, det))
        self._center_sum = self._center_sum + det.box.center


def assign_groups(p: SampleSet, cfg: GroupingConfig = GroupingConfig()) -> list[BoxGroup]:
    groups: list[BoxGroup] = []
    for i, sample in enumerate(p):
        # stable sort keeps file order among equal scores
        for det in sorted(sample, key=lambda d: -d.score):
            best, best_dist = None, math.inf
            c = det.box.center
            for g in groups:
                if g.cls != det.cls:
                    continue
                dist = float(np.linalg.norm(g.center - c))
                if dist < best_dist:  # strict: lowest index wins ties
                    best, best_dist = g, dist
            if best is not None and best_dist <= cfg.gate_distance:
                best.add(i, det)
            else:
                g = BoxGroup(cls=det.cls)
                g.add(i, det)
                groups.append(g)
    return groups


def summarize_group(g: BoxGroup) -> BoxGroup:
    """Fill ``mean_box`` and ``covariance`` (unbiased, yaw residuals wrapped)."""
    if g.support < 1:
        raise ValueError("cannot summarize an empty group")
    x = np.array([d.box.to_array() for _, d in g.members])
    mean = x.mean(axis=0)
    yaw = x[:, YAW_INDEX]
    mean[YAW_INDEX] = math.atan2(np.sin(yaw).mean(), np.cos(yaw).mean())
    if g.support == 1:
        cov = np.zeros((7, 7))
        g.degenerate = True
    else:
        resid = x - mean
        resid[:, YAW_INDEX] = [wrap_angle(a) for a in resid[:, YAW_INDEX]]
        cov = resid.T @ resid / (g.support - 1)
        cov = 0.5 * (cov + cov.T)
        g.degenerate = False
    g.mean_box = Box7.from_array(mean)
    g.covariance = cov
    return g


def group_score(g: BoxGroup, n_samples: int) -> float:
    """Mean member score times the fraction of samples the group appears in.

    Two boxes of one sample may land in the same group, so presence counts
    distinct sample indices rather than members.
    """
    if g.support < 1:
        raise ValueError("empty group")
    mean_score = sum(d.score for _, d in g.members) / g.support
    present = len({i for i, _ in g.members})
    return mean_score * present / n_samples


def fuse_samples(p: SampleSet, cfg: GroupingConfig = GroupingConfig(), frame: Optional[int] = None) -> list[DetectionU]:
    """Group one frame's samples and return one covariance-carrying detection per group."""
    n = len(p)
    if n < 1:
        raise ValueError("need at least one sample")
    out = []
    for g in assign_groups(p, cfg):
        if g.support / n < cfg.min_support_fraction:
            continue
        summarize_group(g)
        f = frame if frame is not None else g.members[0][1].frame
        out.append(
            DetectionU(
                frame=f,
                cls=g.cls,
                score=group_score(g, n),
                box=g.mean_box,
                covariance=g.covariance,
                support=g.support,
            )
        )
    return out
