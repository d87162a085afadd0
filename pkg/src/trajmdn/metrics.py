"""Trajectory distances and the minimum trajectory distance (MTD)."""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np
from numba import njit

from .similarity import symmetric_hausdorff


class DistanceKind(str, enum.Enum):
    HAUSDORFF = "hausdorff"
    FRECHET = "frechet"
    DTW = "dtw"


def _pair(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("trajectories must be non-empty")
    return a, b


@njit(cache=True)
def _cost(a, b):
    n, m = a.shape[0], b.shape[0]
    c = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            c[i, j] = math.sqrt(dx * dx + dy * dy)
    return c


@njit(cache=True)
def _frechet_table(c):
    n, m = c.shape
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                prev = 0.0
            elif i == 0:
                prev = ca[0, j - 1]
            elif j == 0:
                prev = ca[i - 1, 0]
            else:
                prev = min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1])
            ca[i, j] = max(prev, c[i, j])
    return ca


@njit(cache=True)
def _dtw_table(c):
    n, m = c.shape
    acc = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                acc[i, j] = c[0, 0]
            elif i == 0:
                acc[i, j] = acc[0, j - 1] + c[i, j]
            elif j == 0:
                acc[i, j] = acc[i - 1, 0] + c[i, j]
            else:
                acc[i, j] = min(acc[i - 1, j], acc[i - 1, j - 1], acc[i, j - 1]) + c[i, j]
    return acc


def traj_hausdorff(a, b) -> float:
    """Symmetric (averaged) Hausdorff distance between the waypoint sets."""
    a, b = _pair(a, b)
    return symmetric_hausdorff(a, b)


def discrete_frechet(a, b) -> float:
    a, b = _pair(a, b)
    return float(_frechet_table(_cost(a, b))[-1, -1])


def dtw(a, b) -> float:
    """Sum-of-Euclidean-costs DTW over the optimal monotone alignment, no window."""
    a, b = _pair(a, b)
    return float(_dtw_table(_cost(a, b))[-1, -1])


def dtw_path(a, b) -> tuple[float, list[tuple[int, int]]]:
    """DTW value and one optimal alignment path from ``(0, 0)`` to ``(n-1, m-1)``."""
    a, b = _pair(a, b)
    c = _cost(a, b)
    acc = _dtw_table(c)
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], i - 1, j - 1))
        if i > 0:
            candidates.append((acc[i - 1, j], i - 1, j))
        if j > 0:
            candidates.append((acc[i, j - 1], i, j - 1))
        _, i, j = min(candidates)
        path.append((i, j))
    path.reverse()
    return float(acc[-1, -1]), path


DISTANCES = {
    DistanceKind.HAUSDORFF: traj_hausdorff,
    DistanceKind.FRECHET: discrete_frechet,
    DistanceKind.DTW: dtw,
}


def distance(kind, a, b) -> float:
    return DISTANCES[DistanceKind(kind)](a, b)


def mtd(gen, ground_truths: Sequence, kind=DistanceKind.DTW) -> float:
    """Distance from ``gen`` to its nearest ground-truth trajectory."""
    if len(ground_truths) == 0:
        raise ValueError("need at least one ground-truth trajectory")
    fn = DISTANCES[DistanceKind(kind)]
    return min(fn(gen, gt) for gt in ground_truths)


def mtd_all(gen, ground_truths: Sequence) -> dict[str, float]:
    """MTD under every distance kind."""
    return {k.value: mtd(gen, ground_truths, k) for k in DistanceKind}
