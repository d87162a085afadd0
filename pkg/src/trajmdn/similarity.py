"""Hausdorff-kernel similarity features between occupancy maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class KernelConfig:
    length_scale: float = 50.0

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ValueError("kernel length scale must be positive")


@dataclass(frozen=True)
class SimilarityFeature:
    values: np.ndarray
    reference_ids: tuple

    def __post_init__(self):
        if len(self.values) != len(self.reference_ids):
            raise ValueError("feature length does not match reference ids")


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("point set must be non-empty")
    return pts


def one_sided_hausdorff(a, b) -> float:
    """max over ``a`` of the distance to the nearest point of ``b``."""
    a, b = _as_points(a), _as_points(b)
    # Exact nearest-neighbour distances; bit-identical to brute force.
    d, _ = cKDTree(b).query(a, k=1)
    return float(np.max(d))


def symmetric_hausdorff(a, b) -> float:
    return 0.5 * (one_sided_hausdorff(a, b) + one_sided_hausdorff(b, a))


def kernel_from_distance(distance: float, cfg: KernelConfig) -> float:
    # The length scale enters unsquared. Clamped so far-apart maps never reach 0.
    value = np.exp(-(distance * distance) / (2.0 * cfg.length_scale))
    return float(max(value, np.finfo(np.float64).tiny))


def hausdorff_kernel(a, b, cfg: KernelConfig = KernelConfig()) -> float:
    return kernel_from_distance(symmetric_hausdorff(a, b), cfg)


class _Indexed:
    """Point set with a cached KD-tree, so each tree is built once per map."""

    def __init__(self, points):
        self.points = _as_points(points)
        self.tree = cKDTree(self.points)

    def to(self, other: "_Indexed") -> float:
        d, _ = other.tree.query(self.points, k=1)
        return float(np.max(d))


def _distance(a: _Indexed, b: _Indexed) -> float:
    return 0.5 * (a.to(b) + b.to(a))


def gram_matrix(maps: Sequence, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """Symmetric ``(N, N)`` similarity matrix with an exact unit diagonal."""
    if len(maps) == 0:
        raise ValueError("need at least one map")
    idx = [_Indexed(m) for m in maps]
    n = len(idx)
    gram = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            gram[i, j] = gram[j, i] = kernel_from_distance(_distance(idx[i], idx[j]), cfg)
    return gram


def gram_features(maps: Sequence, cfg: KernelConfig = KernelConfig(), ids=None) -> list[SimilarityFeature]:
    ids = tuple(range(len(maps))) if ids is None else tuple(ids)
    gram = gram_matrix(maps, cfg)
    return [SimilarityFeature(row.copy(), ids) for row in gram]


def query_matrix(new_maps: Sequence, training_maps: Sequence, cfg: KernelConfig = KernelConfig()) -> np.ndarray:
    """``(len(new_maps), N)`` similarities of each new map against the training maps."""
    train = [_Indexed(m) for m in training_maps]
    if not train:
        raise ValueError("training set must be non-empty")
    out = np.empty((len(new_maps), len(train)))
    for i, m in enumerate(new_maps):
        q = _Indexed(m)
        out[i] = [kernel_from_distance(_distance(q, t), cfg) for t in train]
    return out


def query_feature(new_map, training_maps: Sequence, cfg: KernelConfig = KernelConfig(), ids=None) -> SimilarityFeature:
    ids = tuple(range(len(training_maps))) if ids is None else tuple(ids)
    return SimilarityFeature(query_matrix([new_map], training_maps, cfg)[0], ids)
