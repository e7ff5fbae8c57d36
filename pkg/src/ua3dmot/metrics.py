"""CLEAR-MOT evaluation: MOTA, box-level precision/recall/F1, MT/PT/ML, FRAG.

Ground truth and hypotheses are given per frame as sequences of objects that
expose ``id``, ``cls`` and ``box`` attributes (``LabeledBox`` qualifies).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .assignment import gate_matching, solve_assignment
from .geometry import center_distance, iou_3d, iou_bev

CRITERIA = ("iou_3d", "iou_bev", "center_distance")
MT_RATIO = 0.8
ML_RATIO = 0.2
_INFEASIBLE = 1e6


@dataclass(frozen=True)
class EvalConfig:
    criterion: str = "iou_3d"
    iou_threshold: float = 0.25
    distance_threshold: float = 2.0
    class_aware: bool = True

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in (0, 1]")
        if not self.distance_threshold > 0:
            raise ValueError("distance_threshold must be positive")

    def cost(self, g, h) -> float:
        """Matching cost, or ``inf`` when the pair does not satisfy the criterion."""
        if self.class_aware and g.cls != h.cls:
            return math.inf
        if self.criterion == "center_distance":
            d = center_distance(g.box, h.box)
            return d if d <= self.distance_threshold else math.inf
        ov = iou_3d(g.box, h.box) if self.criterion == "iou_3d" else iou_bev(g.box, h.box)
        return 1.0 - ov if ov >= self.iou_threshold else math.inf


@dataclass
class MetricsReport:
    name: str = "all"
    tp: int = 0
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    n_gt: int = 0
    n_hyp: int = 0
    mt: int = 0
    pt: int = 0
    ml: int = 0
    n_traj: int = 0
    frag: int = 0

    @property
    def mota(self) -> float:
        if self.n_gt == 0:
            return math.nan
        return 100.0 * (1.0 - (self.fn + self.fp + self.idsw) / self.n_gt)

    @property
    def precision(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def _pct(self, k: int) -> float:
        return 100.0 * k / self.n_traj if self.n_traj else 0.0

    @property
    def mt_pct(self) -> float:
        return self._pct(self.mt)

    @property
    def pt_pct(self) -> float:
        return self._pct(self.pt)

    @property
    def ml_pct(self) -> float:
        return self._pct(self.ml)

    def record(self) -> dict:
        rec = asdict(self)
        for k in ("mota", "precision", "recall", "f1", "mt_pct", "pt_pct", "ml_pct"):
            v = getattr(self, k)
            rec[k] = None if math.isnan(v) else round(v, 6)
        return rec


def aggregate(reports: Sequence[MetricsReport], name: str = "all") -> MetricsReport:
    total = MetricsReport(name=name)
    for r in reports:
        for k in ("tp", "fp", "fn", "idsw", "n_gt", "n_hyp", "mt", "pt", "ml", "n_traj", "frag"):
            setattr(total, k, getattr(total, k) + getattr(r, k))
    return total


@dataclass
class _TrajStats:
    present: int = 0
    tracked: int = 0
    frag: int = 0
    was_tracked: bool = False
    ever_tracked: bool = False


def evaluate(gt: Sequence[Sequence], hyp: Sequence[Sequence], cfg: EvalConfig = EvalConfig(), name: str = "seq") -> MetricsReport:
    if len(gt) != len(hyp):
        raise ValueError(f"frame range mismatch: {len(gt)} GT frames vs {len(hyp)} hypothesis frames")
    rep = MetricsReport(name=name)
    prev: dict = {}  # gt id -> hyp id matched in the previous frame
    last: dict = {}  # gt id -> hyp id of the most recent match
    traj: dict = {}

    for g_frame, h_frame in zip(gt, hyp):
        g_frame, h_frame = list(g_frame), list(h_frame)
        cost = np.full((len(g_frame), len(h_frame)), math.inf)
        for i, g in enumerate(g_frame):
            for j, h in enumerate(h_frame):
                cost[i, j] = cfg.cost(g, h)

        matches = {}
        used_h = set()
        # keep last frame's correspondences that are still valid
        h_index = {h.id: j for j, h in enumerate(h_frame)}
        for i, g in enumerate(g_frame):
            j = h_index.get(prev.get(g.id))
            if j is not None and j not in used_h and math.isfinite(cost[i, j]):
                matches[i] = j
                used_h.add(j)

        rows = [i for i in range(len(g_frame)) if i not in matches]
        cols = [j for j in range(len(h_frame)) if j not in used_h]
        if rows and cols:
            sub = cost[np.ix_(rows, cols)]
            sub = np.where(np.isfinite(sub), sub, _INFEASIBLE)
            m = gate_matching(solve_assignment(sub), sub, _INFEASIBLE / 2)
            for a, b in m.pairs:
                matches[rows[a]] = cols[b]

        cur = {}
        for i, j in matches.items():
            gid, hid = g_frame[i].id, h_frame[j].id
            if gid in last and last[gid] != hid:
                rep.idsw += 1
            last[gid] = hid
            cur[gid] = hid
        prev = cur

        rep.tp += len(matches)
        rep.fn += len(g_frame) - len(matches)
        rep.fp += len(h_frame) - len(matches)
        rep.n_gt += len(g_frame)
        rep.n_hyp += len(h_frame)

        for i, g in enumerate(g_frame):
            st = traj.setdefault(g.id, _TrajStats())
            st.present += 1
            hit = i in matches
            if hit:
                st.tracked += 1
                if st.ever_tracked and not st.was_tracked:
                    st.frag += 1
                st.ever_tracked = True
            st.was_tracked = hit

    for st in traj.values():
        ratio = st.tracked / st.present
        if ratio >= MT_RATIO:
            rep.mt += 1
        elif ratio < ML_RATIO:
            rep.ml += 1
        else:
            rep.pt += 1
        rep.frag += st.frag
    rep.n_traj = len(traj)
    return rep


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)

    @property
    def text(self) -> str:
        head = f"{'rank':>4}  {'alpha':>7}  {'beta':>7}  {'MOTA%':>8}  {'F1%':>7}  {'ML%':>7}"
        lines = [head, "-" * len(head)]
        for k, r in enumerate(self.rows, 1):
            lines.append(
                f"{k:>4}  {r['alpha']:>7.3g}  {r['beta']:>7.3g}  {r['mota']:>8.2f}  {r['f1']:>7.2f}  {r['ml']:>7.2f}"
            )
        return "\n".join(lines)

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.rows)


def sweep_report(results: Mapping) -> SweepTable:
    """Rank ``{(alpha, beta): MetricsReport}`` by MOTA, then F1, both descending."""
    if not results:
        raise ValueError("sweep_report needs at least one entry")
    rows = []
    for (alpha, beta), rep in results.items():
        mota = rep.mota
        rows.append(
            {
                "alpha": float(alpha),
                "beta": float(beta),
                "mota": -math.inf if math.isnan(mota) else mota,
                "f1": rep.f1,
                "ml": rep.ml_pct,
            }
        )
    rows.sort(key=lambda r: (-r["mota"], -r["f1"], r["alpha"], r["beta"]))
    return SweepTable(rows)
