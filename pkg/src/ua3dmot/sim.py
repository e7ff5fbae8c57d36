"""Synthetic scenes with known detection covariance.

Objects drive with constant velocity plus acceleration jitter inside a
rectangular area (reflecting at the border). Each object has a fixed 7x7
noise covariance; detections are ground truth plus a draw from it, thinned by
dropout and mixed with Poisson clutter. Every random draw comes from a
generator keyed on ``(seed, stream, frame, object)`` so results do not depend
on iteration order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import DetectionU, LabeledBox
from .geometry import Box7, wrap_angle

_INIT, _MOTION, _DETECT, _CLUTTER, _SAMPLE, _SAMPLE_CLUTTER = range(6)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_objects: int = 10
    n_frames: int = 100
    x_bounds: tuple = (-40.0, 40.0)
    y_bounds: tuple = (0.0, 80.0)
    speed_range: tuple = (0.3, 1.2)  # m/frame
    accel_std: float = 0.05  # m/frame^2, per axis
    cls: str = "Car"
    width_range: tuple = (1.6, 2.0)
    length_range: tuple = (3.6, 4.6)
    height_range: tuple = (1.4, 1.7)
    # objects cycle through these noise levels (heteroscedastic by default)
    pos_std_levels: tuple = (0.1, 1.0)
    size_std_levels: tuple = (0.05, 0.2)
    yaw_std_levels: tuple = (0.02, 0.1)
    lateral_ratio: float = 0.5  # across-heading std / along-heading std
    vertical_ratio: float = 0.5
    dropout: float = 0.1
    clutter_rate: float = 0.5
    true_score_range: tuple = (0.6, 1.0)
    clutter_score_range: tuple = (0.1, 0.6)

    def __post_init__(self):
        for name in ("x_bounds", "y_bounds"):
            lo, hi = getattr(self, name)
            if not hi - lo > 10.0:
                raise ValueError(f"{name} must span more than 10 m, got {lo}..{hi}")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be non-negative")
        if self.n_objects < 0 or self.n_frames < 0:
            raise ValueError("n_objects and n_frames must be non-negative")
        n = len(self.pos_std_levels)
        if n == 0 or len(self.size_std_levels) != n or len(self.yaw_std_levels) != n:
            raise ValueError("noise level tuples must be non-empty and of equal length")


@dataclass
class Scenario:
    config: ScenarioConfig
    gt: list = field(default_factory=list)  # per frame: list[LabeledBox]
    detections: list = field(default_factory=list)  # per frame: list[DetectionU]
    sigma_true: dict = field(default_factory=dict)  # object id -> 7x7


def _rng(cfg: ScenarioConfig, stream: int, frame: int = 0, obj: int = 0) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, stream, frame, obj])


def noise_covariance(pos_std: float, size_std: float, yaw_std: float, heading: float, lateral_ratio=0.5, vertical_ratio=0.5) -> np.ndarray:
    """Block-diagonal 7x7 covariance; the ground-plane block is aligned with ``heading``."""
    c, s = math.cos(heading), math.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    local = np.diag([pos_std**2, (lateral_ratio * pos_std) ** 2])
    cov = np.zeros((7, 7))
    cov[:2, :2] = rot @ local @ rot.T
    cov[2, 2] = (vertical_ratio * pos_std) ** 2
    cov[3, 3] = cov[4, 4] = cov[5, 5] = size_std**2
    cov[6, 6] = yaw_std**2
    return 0.5 * (cov + cov.T)


def _draw_box(rng: np.random.Generator, mean: np.ndarray, chol: np.ndarray) -> Box7:
    v = mean + chol @ rng.standard_normal(7)
    v[3:6] = np.maximum(v[3:6], 0.05)
    v[6] = wrap_angle(v[6])
    return Box7.from_array(v)


def _chol(cov: np.ndarray) -> np.ndarray:
    # PSD square root that tolerates zero covariance
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _clutter_box(cfg: ScenarioConfig, rng: np.random.Generator) -> Box7:
    return Box7(
        rng.uniform(*cfg.x_bounds),
        rng.uniform(*cfg.y_bounds),
        rng.uniform(*cfg.height_range) / 2.0,
        rng.uniform(*cfg.width_range),
        rng.uniform(*cfg.length_range),
        rng.uniform(*cfg.height_range),
        rng.uniform(-math.pi, math.pi),
    )


def _reflect(p: float, v: float, lo: float, hi: float):
    if p < lo:
        return 2 * lo - p, -v
    if p > hi:
        return 2 * hi - p, -v
    return p, v


def _trajectories(cfg: ScenarioConfig):
    """Ground-truth boxes, shape (n_frames, n_objects, 7)."""
    out = np.zeros((cfg.n_frames, cfg.n_objects, 7))
    margin = 5.0
    for k in range(cfg.n_objects):
        rng = _rng(cfg, _INIT, 0, k)
        x = rng.uniform(cfg.x_bounds[0] + margin, cfg.x_bounds[1] - margin)
        y = rng.uniform(cfg.y_bounds[0] + margin, cfg.y_bounds[1] - margin)
        heading = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(*cfg.speed_range)
        vx, vy = speed * math.cos(heading), speed * math.sin(heading)
        w, l, h = rng.uniform(*cfg.width_range), rng.uniform(*cfg.length_range), rng.uniform(*cfg.height_range)
        for t in range(cfg.n_frames):
            if t > 0:
                a = cfg.accel_std * _rng(cfg, _MOTION, t, k).standard_normal(2)
                vx, vy = vx + a[0], vy + a[1]
                x, vx = _reflect(x + vx, vx, *cfg.x_bounds)
                y, vy = _reflect(y + vy, vy, *cfg.y_bounds)
            yaw = math.atan2(vy, vx) if vx or vy else heading
            out[t, k] = (x, y, h / 2.0, w, l, h, wrap_angle(yaw))
    return out


def object_sigma(cfg: ScenarioConfig, k: int, heading: float) -> np.ndarray:
    level = k % len(cfg.pos_std_levels)
    return noise_covariance(
        cfg.pos_std_levels[level],
        cfg.size_std_levels[level],
        cfg.yaw_std_levels[level],
        heading,
        cfg.lateral_ratio,
        cfg.vertical_ratio,
    )


def generate(cfg: ScenarioConfig = ScenarioConfig()) -> Scenario:
    traj = _trajectories(cfg)
    scn = Scenario(config=cfg)
    chols = {}
    for k in range(cfg.n_objects):
        heading = traj[0, k, 6] if cfg.n_frames else 0.0
        scn.sigma_true[k + 1] = object_sigma(cfg, k, heading)
        chols[k + 1] = _chol(scn.sigma_true[k + 1])
    clutter_sigma = object_sigma(cfg, len(cfg.pos_std_levels) - 1, 0.0)

    for t in range(cfg.n_frames):
        gt_frame, det_frame = [], []
        for k in range(cfg.n_objects):
            oid = k + 1
            box = Box7.from_array(traj[t, k])
            gt_frame.append(LabeledBox(t, oid, cfg.cls, box))
            rng = _rng(cfg, _DETECT, t, oid)
            if rng.random() < cfg.dropout:
                continue
            det_frame.append(
                DetectionU(
                    frame=t,
                    cls=cfg.cls,
                    score=float(rng.uniform(*cfg.true_score_range)),
                    box=_draw_box(rng, traj[t, k], chols[oid]),
                    covariance=scn.sigma_true[oid].copy(),
                )
            )
        rng = _rng(cfg, _CLUTTER, t)
        for _ in range(rng.poisson(cfg.clutter_rate)):
            det_frame.append(
                DetectionU(
                    frame=t,
                    cls=cfg.cls,
                    score=float(rng.uniform(*cfg.clutter_score_range)),
                    box=_clutter_box(cfg, rng),
                    covariance=clutter_sigma.copy(),
                )
            )
        scn.gt.append(gt_frame)
        scn.detections.append(det_frame)
    return scn


def emit_samples(scn: Scenario, S: int) -> list:
    """Per frame, ``S`` independent noisy detection lists (ensemble stand-in)."""
    if S < 1:
        raise ValueError("S must be >= 1")
    cfg = scn.config
    frames = []
    for t, gt_frame in enumerate(scn.gt):
        samples = [[] for _ in range(S)]
        for g in gt_frame:
            chol = _chol(scn.sigma_true[g.id])
            mean = g.box.to_array()
            for s in range(S):
                rng = np.random.default_rng([cfg.seed, _SAMPLE, t, g.id, s])
                if rng.random() < cfg.dropout:
                    continue
                samples[s].append(
                    DetectionU(
                        frame=t,
                        cls=g.cls,
                        score=float(rng.uniform(*cfg.true_score_range)),
                        box=_draw_box(rng, mean, chol),
                        sample_id=s,
                    )
                )
        for s in range(S):
            rng = np.random.default_rng([cfg.seed, _SAMPLE_CLUTTER, t, s])
            for _ in range(rng.poisson(cfg.clutter_rate)):
                samples[s].append(
                    DetectionU(
                        frame=t,
                        cls=cfg.cls,
                        score=float(rng.uniform(*cfg.clutter_score_range)),
                        box=_clutter_box(cfg, rng),
                        sample_id=s,
                    )
                )
        frames.append(samples)
    return frames
