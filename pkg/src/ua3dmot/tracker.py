"""Tracking-by-detection loop: predict, associate, correct, manage lifecycles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kalman
from .assignment import COST_MODES, DEFAULT_GATES, associate
from .detection import DetectionU, LabeledBox
from .kalman import KalmanState, NoiseConfig

IDENTITY_R = np.eye(kalman.MEAS_DIM)


@dataclass
class TrackerConfig:
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    cost_mode: str = "neg_iou_3d"
    gate: Optional[float] = None  # None -> DEFAULT_GATES[cost_mode]
    max_age: int = 2
    min_hits: int = 3
    score_floor: float = 0.0
    report_max_tsu: int = 0
    # bypass transform_uncertainty entirely and use R = I (reference baseline)
    baseline_identity_noise: bool = False

    def __post_init__(self):
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"cost_mode must be one of {COST_MODES}")
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")
        if self.report_max_tsu < 0:
            raise ValueError("report_max_tsu must be >= 0")

    @property
    def gate_threshold(self) -> float:
        return DEFAULT_GATES[self.cost_mode] if self.gate is None else self.gate


@dataclass
class Track:
    id: int
    state: KalmanState
    cls: str
    score: float
    hits: int = 1
    age: int = 0
    time_since_update: int = 0


class Tracker:
    """One instance per sequence; IDs are never reused within it."""

    def __init__(self, cfg: TrackerConfig = None):
        self.cfg = cfg or TrackerConfig()
        self.tracks: list[Track] = []
        self.next_id = 1
        self.frames_seen = 0
        self.last_t: Optional[int] = None

    def _noise_for(self, det: DetectionU) -> np.ndarray:
        if self.cfg.baseline_identity_noise:
            return IDENTITY_R
        n = self.cfg.noise
        return kalman.transform_uncertainty(det.sigma, n.alpha, n.beta)

    def step(self, dets: Sequence[DetectionU], t: int) -> list[LabeledBox]:
        if self.last_t is not None and t <= self.last_t:
            raise ValueError(f"frame {t} is not after previous frame {self.last_t}")
        elapsed = 1 if self.last_t is None else t - self.last_t
        self.last_t = t
        self.frames_seen += 1
        cfg = self.cfg
        dets = [d for d in dets if d.score >= cfg.score_floor]

        for trk in self.tracks:
            for _ in range(elapsed):
                trk.state = kalman.predict(trk.state, cfg.noise.process_noise, cfg.noise.dt)
            trk.age += elapsed
            trk.time_since_update += elapsed

        unmatched_dets = []
        for cls in sorted({d.cls for d in dets} | {trk.cls for trk in self.tracks}):
            cls_trk = [trk for trk in self.tracks if trk.cls == cls]
            cls_det = [d for d in dets if d.cls == cls]
            m = associate(
                [trk.state.box() for trk in cls_trk],
                [d.box for d in cls_det],
                cfg.cost_mode,
                cfg.gate_threshold,
            )
            for ti, di in m.pairs:
                trk, det = cls_trk[ti], cls_det[di]
                trk.state = kalman.update(trk.state, det.box, self._noise_for(det))
                trk.hits += 1
                trk.time_since_update = 0
                trk.score = det.score
            unmatched_dets.extend(cls_det[j] for j in m.unmatched_detections)

        # births keep input order so IDs are deterministic
        order = {id(d): i for i, d in enumerate(dets)}
        for det in sorted(unmatched_dets, key=lambda d: order[id(d)]):
            self.tracks.append(
                Track(id=self.next_id, state=kalman.init_track_state(det, cfg.noise), cls=det.cls, score=det.score)
            )
            self.next_id += 1

        self.tracks = [trk for trk in self.tracks if trk.time_since_update <= cfg.max_age]

        grace = self.frames_seen < cfg.min_hits
        out = []
        for trk in self.tracks:
            if trk.time_since_update > cfg.report_max_tsu:
                continue
            if trk.hits >= cfg.min_hits or grace:
                out.append(LabeledBox(t, trk.id, trk.cls, trk.state.box(), trk.score))
        out.sort(key=lambda o: o.id)
        return out


def run_sequence(frames: Sequence[Sequence[DetectionU]], cfg: TrackerConfig = None) -> list[list[LabeledBox]]:
    """Track a whole sequence; ``frames[t]`` holds the detections of frame ``t``."""
    tracker = Tracker(cfg)
    return [tracker.step(dets, t) for t, dets in enumerate(frames)]
