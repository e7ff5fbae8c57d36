"""Text formats: KITTI tracking labels, covariance-extended detections, ensemble samples.

KITTI tracking lines (17 fields, or 18 with a trailing score)::

    frame track_id type truncated occluded alpha x1 y1 x2 y2 h w l x y z rotation_y [score]

Location is the bottom-center of the box in the camera frame (x right, y
down, z forward). The conversion to the ground frame used by ``Box7`` is::

    x = x_cam,  y = z_cam,  z = -y_cam + h/2,  r = -rotation_y

Detection lines (whitespace separated, ground frame)::

    frame class score x y z w l h r [c00 c01 ... c66] [sample_id]

with the optional covariance given as the 28 upper-triangle entries of the
7x7 matrix in (x, y, z, w, l, h, r) order, row-major. Field counts are 10,
11 (sample id, no covariance), 38 or 39.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .detection import DetectionU, LabeledBox, check_covariance
from .geometry import Box7, covariance_ellipse

KITTI_FIELDS = 17
TRIU = np.triu_indices(7)
DONT_CARE = "DontCare"
MAX_FRAME = 1_000_000


class ParseError(ValueError):
    def __init__(self, source: str, line: int, msg: str):
        super().__init__(f"{source}:{line}: {msg}")
        self.source = source
        self.line = line


@dataclass
class KittiTrackRecord:
    frame: int
    track_id: int
    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple  # x1, y1, x2, y2
    h: float
    w: float
    l: float
    x: float
    y: float
    z: float
    rotation_y: float
    score: Optional[float] = None

    def to_box(self) -> Box7:
        return Box7(self.x, self.z, -self.y + self.h / 2.0, self.w, self.l, self.h, -self.rotation_y)

    @classmethod
    def from_box(cls, frame: int, track_id: int, type_: str, box: Box7, score=None) -> "KittiTrackRecord":
        return cls(
            frame=frame,
            track_id=track_id,
            type=type_,
            truncated=0,
            occluded=0,
            alpha=-10,
            bbox=(-1, -1, -1, -1),
            h=box.h,
            w=box.w,
            l=box.l,
            x=box.x,
            y=box.h / 2.0 - box.z,
            z=box.y,
            rotation_y=-box.r,
            score=score,
        )


def _read_lines(path) -> list[str]:
    with open(path, "rb") as f:
        data = f.read()
    return data.decode("utf-8", errors="replace").splitlines()


def _float(tok: str, source: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(source, lineno, f"{what}: not a number: {tok!r}") from None
    if not math.isfinite(v):
        raise ParseError(source, lineno, f"{what}: non-finite value {tok!r}")
    return v


def _int(tok: str, source: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(source, lineno, f"{what}: not an integer: {tok!r}") from None


def _dense(records: Iterable, n_frames: Optional[int] = None) -> list[list]:
    records = list(records)
    if n_frames is None:
        n_frames = max((r.frame for r in records), default=-1) + 1
    frames = [[] for _ in range(n_frames)]
    for r in records:
        frames[r.frame].append(r)
    return frames


def parse_kitti_lines(lines: Iterable[str], source: str = "<input>") -> list[list[KittiTrackRecord]]:
    records = []
    for lineno, line in enumerate(lines, 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) not in (KITTI_FIELDS, KITTI_FIELDS + 1):
            raise ParseError(source, lineno, f"expected {KITTI_FIELDS} or {KITTI_FIELDS + 1} fields, got {len(tok)}")
        num = [_float(t, source, lineno, f"field {i + 1}") for i, t in enumerate(tok[3:], 3)]
        frame = _int(tok[0], source, lineno, "frame")
        if not 0 <= frame <= MAX_FRAME:
            raise ParseError(source, lineno, f"frame index {frame} outside 0..{MAX_FRAME}")
        occluded = num[1]
        rec = KittiTrackRecord(
            frame=frame,
            track_id=_int(tok[1], source, lineno, "track_id"),
            type=tok[2],
            truncated=num[0],
            occluded=int(occluded) if occluded.is_integer() else occluded,
            alpha=num[2],
            bbox=tuple(num[3:7]),
            h=num[7],
            w=num[8],
            l=num[9],
            x=num[10],
            y=num[11],
            z=num[12],
            rotation_y=num[13],
            score=num[14] if len(num) == 15 else None,
        )
        if rec.type != DONT_CARE and min(rec.h, rec.w, rec.l) <= 0:
            raise ParseError(source, lineno, "dimensions must be positive")
        records.append(rec)
    return _dense(records)


def read_kitti_labels(path) -> list[list[KittiTrackRecord]]:
    """Records grouped by frame; ``result[f]`` lists frame ``f`` (possibly empty)."""
    return parse_kitti_lines(_read_lines(path), os.fspath(path))


def _num(v) -> str:
    if isinstance(v, (int, np.integer)) or float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.6f}"


def format_kitti_record(r: KittiTrackRecord) -> str:
    f = "{:.6f}"
    parts = [str(r.frame), str(r.track_id), r.type, _num(r.truncated), _num(r.occluded), f.format(r.alpha)]
    parts += [f.format(v) for v in r.bbox]
    parts += [f.format(v) for v in (r.h, r.w, r.l, r.x, r.y, r.z, r.rotation_y)]
    if r.score is not None:
        parts.append(f.format(r.score))
    return " ".join(parts)


def write_kitti_labels(path, frames: Sequence[Sequence[KittiTrackRecord]]) -> None:
    with open(path, "w") as fh:
        for frame in frames:
            for r in sorted(frame, key=lambda r: (r.frame, r.track_id)):
                fh.write(format_kitti_record(r) + "\n")


def records_to_labeled(frames: Sequence[Sequence[KittiTrackRecord]], keep_dont_care: bool = False) -> list[list[LabeledBox]]:
    out = []
    for frame in frames:
        out.append(
            [
                LabeledBox(r.frame, r.track_id, r.type, r.to_box(), r.score)
                for r in frame
                if keep_dont_care or r.type != DONT_CARE
            ]
        )
    return out


def labeled_to_records(frames: Sequence[Sequence[LabeledBox]]) -> list[list[KittiTrackRecord]]:
    return [[KittiTrackRecord.from_box(o.frame, o.id, o.cls, o.box, o.score) for o in frame] for frame in frames]


def write_tracks(path, frames: Sequence[Sequence[LabeledBox]]) -> None:
    """KITTI tracking submission file, sorted by frame then track id."""
    write_kitti_labels(path, labeled_to_records(frames))


def read_tracks(path, n_frames: Optional[int] = None) -> list[list[LabeledBox]]:
    frames = records_to_labeled(read_kitti_labels(path))
    if n_frames is not None:
        if len(frames) > n_frames:
            raise ValueError(f"{path}: contains frame {len(frames) - 1} beyond expected {n_frames} frames")
        frames += [[] for _ in range(n_frames - len(frames))]
    return frames


def parse_detection_lines(lines: Iterable[str], source: str = "<input>") -> list[list[DetectionU]]:
    dets = []
    for lineno, line in enumerate(lines, 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) not in (10, 11, 38, 39):
            raise ParseError(source, lineno, f"expected 10, 11, 38 or 39 fields, got {len(tok)}")
        frame = _int(tok[0], source, lineno, "frame")
        if not 0 <= frame <= MAX_FRAME:
            raise ParseError(source, lineno, f"frame index {frame} outside 0..{MAX_FRAME}")
        score = _float(tok[2], source, lineno, "score")
        vals = [_float(t, source, lineno, f"box field {i + 1}") for i, t in enumerate(tok[3:10])]
        try:
            box = Box7(*vals)
        except ValueError as e:
            raise ParseError(source, lineno, str(e)) from None
        cov = None
        if len(tok) >= 38:
            upper = [_float(t, source, lineno, f"covariance field {i + 1}") for i, t in enumerate(tok[10:38])]
            cov = np.zeros((7, 7))
            cov[TRIU] = upper
            cov = cov + np.triu(cov, 1).T
            try:
                check_covariance(cov)
            except ValueError as e:
                raise ParseError(source, lineno, str(e)) from None
        sample_id = _int(tok[-1], source, lineno, "sample_id") if len(tok) in (11, 39) else None
        dets.append(DetectionU(frame, tok[1], score, box, cov, sample_id))
    return _dense(dets)


def read_detections_u(path) -> list[list[DetectionU]]:
    return parse_detection_lines(_read_lines(path), os.fspath(path))


def format_detection(d: DetectionU) -> str:
    parts = [str(d.frame), d.cls, repr(float(d.score))]
    parts += [repr(float(v)) for v in d.box.to_array()]
    if d.covariance is not None:
        parts += [repr(float(v)) for v in np.asarray(d.covariance)[TRIU]]
    if d.sample_id is not None:
        parts.append(str(int(d.sample_id)))
    return " ".join(parts)


def write_detections_u(path, frames: Sequence[Sequence[DetectionU]]) -> None:
    with open(path, "w") as fh:
        for frame in frames:
            for d in frame:
                fh.write(format_detection(d) + "\n")


def to_sample_sets(frames: Sequence[Sequence[DetectionU]], n_samples: Optional[int] = None) -> tuple[list, int]:
    """Split per-frame detections into per-frame sample lists keyed by ``sample_id``.

    Returns ``(sample_sets, S)``; records without a sample id count as sample 0.
    """
    ids = sorted({0 if d.sample_id is None else d.sample_id for f in frames for d in f})
    if n_samples is None:
        n_samples = max(ids, default=0) + 1
    if ids and (ids[0] < 0 or ids[-1] >= n_samples):
        raise ValueError(f"sample ids {ids[0]}..{ids[-1]} do not fit {n_samples} samples")
    out = []
    for f in frames:
        sets = [[] for _ in range(n_samples)]
        for d in f:
            sets[0 if d.sample_id is None else d.sample_id].append(d)
        out.append(sets)
    return out, n_samples


def ellipse_record(d: DetectionU, cov=None) -> dict:
    """Ground-plane 1-sigma ellipse of ``cov`` (default: the detection's own)."""
    cov = d.sigma if cov is None else np.asarray(cov)
    major, minor, angle = covariance_ellipse(cov[:2, :2])
    return {
        "frame": d.frame,
        "class": d.cls,
        "x": d.box.x,
        "y": d.box.y,
        "semi_major": major,
        "semi_minor": minor,
        "angle": angle,
        "std_z": math.sqrt(max(cov[2, 2], 0.0)),
        "std_yaw": math.sqrt(max(cov[6, 6], 0.0)),
    }


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
