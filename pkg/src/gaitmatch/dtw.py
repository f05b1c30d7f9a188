"""Banded dynamic time warping with early abandon.

The distance between two sequences is the minimum cumulative per-frame
Euclidean distance over monotone warping paths from (1,1) to (m,n) built from
the classic symmetric steps {down, right, diagonal}, all unit-weighted, with
no path-length normalization.

Paths are confined to a slanted band around the grid diagonal: cell (x, y) is
admissible iff

    y - (n/m)*x + w >= 0   and   y - (n/m)*x - w <= 0

with the slope n/m kept real-valued and the comparisons exact (no epsilon).
Out-of-band cells are treated as +inf and never relaxed. The half-width w is
either given absolutely or as a ratio r of max(m, n).

Early abandon: after each completed DP column, if the minimum cumulative value
in that column is >= the abandon threshold, no completion can come in below
the threshold (cumulative costs never decrease along a path and every path
crosses every column), so the computation stops and reports Abandoned.

cells_evaluated counts DP cell relaxations (one local distance plus a min over
three predecessors); it is the cost unit the cost model predicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptySequence


@dataclass(frozen=True)
class DtwConfig:
    """Band width (absolute or as a ratio of max(m, n)) plus abandon threshold.

    Exactly one of window_width / window_ratio may be given; with neither, the
    band spans the full grid (ratio 1.0). abandon_threshold is a positive
    cumulative-distance cutoff, +inf to disable.
    """

    window_width: int | None = None
    window_ratio: float | None = None
    abandon_threshold: float = math.inf

    def __post_init__(self):
        if self.window_width is not None and self.window_ratio is not None:
            raise ValueError("give window_width or window_ratio, not both")
        if self.window_width is None and self.window_ratio is None:
            object.__setattr__(self, "window_ratio", 1.0)
        if self.window_width is not None:
            if self.window_width != int(self.window_width) or self.window_width < 0:
                raise ValueError("window_width must be a non-negative integer")
        if self.window_ratio is not None and not 0.0 <= self.window_ratio <= 1.0:
            raise ValueError("window_ratio must lie in [0, 1]")
        if math.isnan(self.abandon_threshold) or self.abandon_threshold <= 0.0:
            raise ValueError("abandon_threshold must be positive (inf to disable)")

    def width_for(self, m: int, n: int) -> float:
        """Effective half-width for a given pair of lengths."""
        if self.window_width is not None:
            return float(self.window_width)
        return self.window_ratio * max(m, n)


@dataclass(frozen=True)
class DtwOutcome:
    """Result of one matching run.

    distance is None when the run was abandoned. path is a 1-based list of
    (query_index, entry_index) cells from (1,1) to (m,n); it is None when the
    run was abandoned or the caller did not ask for it. cells_evaluated counts
    DP relaxations performed before completion or abandonment.
    """

    distance: float | None
    path: tuple[tuple[int, int], ...] | None
    cells_evaluated: int

    @property
    def abandoned(self) -> bool:
        return self.distance is None


def window_contains(x, y, m, n, w) -> bool:
    """Band membership of cell (x, y) on the m-by-n grid with half-width w."""
    if x < 0 or x > m or y < 0 or y > n:
        return False
    r = y - (n / m) * x
    return r + w >= 0.0 and r - w <= 0.0


@njit(cache=True, nogil=True)
def _dp_rolling(q, g, w, upsilon):
    """Banded DP keeping two columns. Returns (abandoned, distance, cells)."""
    m, n = q.shape[0], g.shape[0]
    dims = q.shape[1]
    slope = n / m
    check_abandon = np.isfinite(upsilon)
    prev = np.full(n + 1, np.inf)
    cur = np.full(n + 1, np.inf)
    cells = 0
    for x in range(1, m + 1):
        for y in range(n + 1):
            cur[y] = np.inf
        col_min = np.inf
        for y in range(1, n + 1):
            r = y - slope * x
            if r + w >= 0.0 and r - w <= 0.0:
                d = 0.0
                for k in range(dims):
                    diff = q[x - 1, k] - g[y - 1, k]
                    d += diff * diff
                d = np.sqrt(d)
                if x == 1 and y == 1:
                    best = 0.0
                else:
                    best = prev[y]
                    if prev[y - 1] < best:
                        best = prev[y - 1]
                    if cur[y - 1] < best:
                        best = cur[y - 1]
                val = d + best
                cur[y] = val
                cells += 1
                if val < col_min:
                    col_min = val
        if check_abandon and col_min >= upsilon:
            return True, np.inf, cells
        tmp = prev
        prev = cur
        cur = tmp
    return False, prev[n], cells


@njit(cache=True, nogil=True)
def _dp_full(q, g, w, upsilon):
    """Banded DP keeping the whole matrix for backtracking.

    Returns (abandoned, distance, cells, cumulative) with cumulative shaped
    (m+1, n+1); row/column 0 are +inf sentinels so the matrix is 1-based.
    """
    m, n = q.shape[0], g.shape[0]
    dims = q.shape[1]
    slope = n / m
    check_abandon = np.isfinite(upsilon)
    acc = np.full((m + 1, n + 1), np.inf)
    cells = 0
    for x in range(1, m + 1):
        col_min = np.inf
        for y in range(1, n + 1):
            r = y - slope * x
            if r + w >= 0.0 and r - w <= 0.0:
                d = 0.0
                for k in range(dims):
                    diff = q[x - 1, k] - g[y - 1, k]
                    d += diff * diff
                d = np.sqrt(d)
                if x == 1 and y == 1:
                    best = 0.0
                else:
                    best = acc[x - 1, y]
                    if acc[x - 1, y - 1] < best:
                        best = acc[x - 1, y - 1]
                    if acc[x, y - 1] < best:
                        best = acc[x, y - 1]
                val = d + best
                acc[x, y] = val
                cells += 1
                if val < col_min:
                    col_min = val
        if check_abandon and col_min >= upsilon:
            return True, np.inf, cells, acc
    return False, acc[m, n], cells, acc


def _backtrack(acc: np.ndarray, m: int, n: int) -> tuple[tuple[int, int], ...]:
    # ties prefer diagonal, then vertical, then horizontal
    path = [(m, n)]
    x, y = m, n
    while not (x == 1 and y == 1):
        candidates = ((x - 1, y - 1), (x - 1, y), (x, y - 1))
        px, py = min(candidates, key=lambda c: acc[c[0], c[1]])
        if not np.isfinite(acc[px, py]):
            raise RuntimeError("backtracking hit an unreachable cell")
        path.append((px, py))
        x, y = px, py
    path.reverse()
    return tuple(path)


def _to_array(seq) -> np.ndarray:
    if hasattr(seq, "as_array"):
        arr = seq.as_array()
    else:
        arr = np.asarray(seq, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError("sequence must be 1-D or (length, dims)")
    if arr.shape[0] == 0:
        raise EmptySequence("cannot match an empty sequence")
    return np.ascontiguousarray(arr, dtype=np.float64)


def dtw_distance(query, entry, cfg: DtwConfig, return_path: bool = True) -> DtwOutcome:
    """Banded DTW distance between two sequences.

    Inputs may be PoseSequence objects or plain arrays, 1-D scalars included.
    Raises EmptySequence on zero-length input and ValueError when the band
    excludes either endpoint cell (possible for strongly skewed lengths with a
    small width: the start cell (1,1) sits 1 - n/m off the band center line).
    """
    q = _to_array(query)
    g = _to_array(entry)
    if q.shape[1] != g.shape[1]:
        raise ValueError("sequences have different per-frame dimensions")
    m, n = q.shape[0], g.shape[0]
    w = cfg.width_for(m, n)
    if not (window_contains(1, 1, m, n, w) and window_contains(m, n, m, n, w)):
        raise ValueError(
            f"band of width {w} excludes an endpoint cell for lengths ({m}, {n})"
        )
    upsilon = float(cfg.abandon_threshold)
    if return_path:
        abandoned, dist, cells, acc = _dp_full(q, g, w, upsilon)
        if abandoned:
            return DtwOutcome(distance=None, path=None, cells_evaluated=int(cells))
        if not np.isfinite(dist):
            raise RuntimeError("band admits no complete warping path")
        return DtwOutcome(
            distance=float(dist),
            path=_backtrack(acc, m, n),
            cells_evaluated=int(cells),
        )
    abandoned, dist, cells = _dp_rolling(q, g, w, upsilon)
    if abandoned:
        return DtwOutcome(distance=None, path=None, cells_evaluated=int(cells))
    if not np.isfinite(dist):
        raise RuntimeError("band admits no complete warping path")
    return DtwOutcome(distance=float(dist), path=None, cells_evaluated=int(cells))


def dtw_distance_unconstrained(query, entry, return_path: bool = True) -> DtwOutcome:
    """DTW with the band disabled (full grid) and no abandoning."""
    return dtw_distance(query, entry, DtwConfig(window_ratio=1.0), return_path)
