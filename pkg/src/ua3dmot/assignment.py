"""Minimum-cost bipartite matching between tracks (rows) and detections (columns)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Box7, center_distance, iou_3d

COST_MODES = ("neg_iou_3d", "center_distance")
DEFAULT_GATES = {"neg_iou_3d": -0.01, "center_distance": 4.0}


@dataclass
class Matching:
    pairs: list = field(default_factory=list)
    unmatched_tracks: list = field(default_factory=list)
    unmatched_detections: list = field(default_factory=list)

    def total_cost(self, cost) -> float:
        cost = np.asarray(cost, dtype=float)
        return float(sum(cost[t, d] for t, d in self.pairs))


def _hungarian_square(a: np.ndarray):
    """Shortest-augmenting-path Hungarian method with dual potentials.

    Returns ``(row_to_col, u, v)`` with ``a[i, j] - u[i] - v[j] >= 0`` and
    equality on every matched edge.
    """
    n = a.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # column -> row, 1-based, 0 = free
    way = np.zeros(n + 1, dtype=int)
    # 1-based padded cost so column/row 0 is the virtual root
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = a
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic_min(tight: np.ndarray, row_to_col: np.ndarray) -> np.ndarray:
    """Among perfect matchings inside the tight-edge graph, pick the lexicographically smallest."""
    n = len(row_to_col)
    rc = row_to_col.copy()
    cr = np.empty(n, dtype=int)
    cr[rc] = np.arange(n)

    for i in range(n):
        for c in np.flatnonzero(tight[i]):
            if c >= rc[i]:
                break
            k = cr[c]
            if k < i:
                continue
            target = rc[i]
            seen = set()
            path = []  # (row, new column) pairs to apply

            def dfs(r):
                for col in np.flatnonzero(tight[r]):
                    col = int(col)
                    if col in seen or col == c or cr[col] < i or cr[col] == i and col != target:
                        continue
                    seen.add(col)
                    if col == target:
                        path.append((r, col))
                        return True
                    if dfs(cr[col]):
                        path.append((r, col))
                        return True
                return False

            if dfs(k):
                for r, col in path:
                    rc[r] = col
                    cr[col] = r
                rc[i] = c
                cr[c] = i
                break
    return rc


def solve_assignment(cost) -> Matching:
    """Optimal matching of ``min(T, D)`` pairs; ties resolve to the lexicographically smallest pair list."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    t, d = cost.shape
    if t == 0 or d == 0:
        return Matching([], list(range(t)), list(range(d)))
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix entries must be finite")
    n = max(t, d)
    # any constant pad works: every complete matching uses the same number of pads
    pad = float(cost.max())
    sq = np.full((n, n), pad)
    sq[:t, :d] = cost
    rc, u, v = _hungarian_square(sq)
    reduced = sq - u[:, None] - v[None, :]
    tol = 1e-12 * n * max(1.0, float(np.abs(sq).max()))
    rc = _lexicographic_min(np.abs(reduced) <= tol, rc)
    pairs = [(i, int(rc[i])) for i in range(t) if rc[i] < d]
    matched_d = {j for _, j in pairs}
    return Matching(
        pairs=pairs,
        unmatched_tracks=[i for i in range(t) if rc[i] >= d],
        unmatched_detections=[j for j in range(d) if j not in matched_d],
    )


def gate_matching(m: Matching, cost, threshold: float) -> Matching:
    cost = np.asarray(cost, dtype=float)
    keep, drop = [], []
    for i, j in m.pairs:
        (drop if cost[i, j] > threshold else keep).append((i, j))
    return Matching(
        pairs=keep,
        unmatched_tracks=sorted(m.unmatched_tracks + [i for i, _ in drop]),
        unmatched_detections=sorted(m.unmatched_detections + [j for _, j in drop]),
    )


def build_cost(tracks: Sequence[Box7], dets: Sequence[Box7], mode: str = "neg_iou_3d") -> np.ndarray:
    if mode not in COST_MODES:
        raise ValueError(f"unknown cost mode {mode!r}; expected one of {COST_MODES}")
    fn = center_distance if mode == "center_distance" else (lambda a, b: -iou_3d(a, b))
    c = np.zeros((len(tracks), len(dets)))
    for i, a in enumerate(tracks):
        for j, b in enumerate(dets):
            c[i, j] = fn(a, b)
    return c


def associate(tracks: Sequence[Box7], dets: Sequence[Box7], mode: str = "neg_iou_3d", threshold=None) -> Matching:
    """Cost, solve, gate in one call; ``threshold=None`` uses the mode's default gate."""
    c = build_cost(tracks, dets, mode)
    gate = DEFAULT_GATES[mode] if threshold is None else threshold
    return gate_matching(solve_assignment(c), c, gate)
