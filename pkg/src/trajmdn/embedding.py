"""Fixed-size basis-weight embedding of discrete trajectories.

A continuous trajectory is ``x(tau) = wx . k(tau)``, ``y(tau) = wy . k(tau)``
where ``k`` holds squared-exponential basis functions centred on evenly
spaced points of ``[0, 1]``. Weight vectors are stored as one flat array,
``wx`` followed by ``wy``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import cho_factor, cho_solve


# Basis length scale as a multiple of 1/M. Wider bases overlap so much that the
# ridge solve amplifies small wiggles into very large weights.
LENGTH_SCALE_FACTOR = 0.8


@dataclass(frozen=True)
class BasisConfig:
    num_basis: int = 10
    length_scale: float = LENGTH_SCALE_FACTOR / 10

    @staticmethod
    def default_length_scale(num_basis: int) -> float:
        return LENGTH_SCALE_FACTOR / num_basis

    @classmethod
    def with_default_scale(cls, num_basis: int) -> "BasisConfig":
        return cls(num_basis, cls.default_length_scale(num_basis))

    def __post_init__(self):
        if self.num_basis < 2:
            raise ValueError("need at least two basis functions")
        if not self.length_scale > 0:
            raise ValueError("basis length scale must be positive")

    @property
    def centers(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.num_basis)

    @property
    def weight_dim(self) -> int:
        return 2 * self.num_basis


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 1e-4

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("ridge parameter must be positive")


def as_trajectory(points) -> np.ndarray:
    traj = np.asarray(points, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[1] != 2:
        raise ValueError(f"trajectory must have shape (T, 2), got {traj.shape}")
    if not np.all(np.isfinite(traj)):
        raise ValueError("trajectory has non-finite coordinates")
    return traj


def basis_matrix(tau, cfg: BasisConfig) -> np.ndarray:
    """Rows are ``k(tau_i)``; shape ``(len(tau), M)``."""
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    diff = tau[:, None] - cfg.centers[None, :]
    # clamped so far-off bases stay strictly positive instead of underflowing
    return np.maximum(np.exp(-(diff * diff) / (2.0 * cfg.length_scale**2)), np.finfo(np.float64).tiny)


def basis_vector(tau: float, cfg: BasisConfig) -> np.ndarray:
    return basis_matrix(tau, cfg)[0]


def sample_times(num_points: int) -> np.ndarray:
    """Normalised time ``t / T`` for ``t = 1..T``."""
    return np.arange(1, num_points + 1, dtype=np.float64) / num_points


def normal_matrix(tau, basis: BasisConfig, ridge: RidgeConfig) -> np.ndarray:
    k = basis_matrix(tau, basis)
    a = k.T @ k
    a[np.diag_indices_from(a)] += ridge.lam
    return a


def embed(traj, basis: BasisConfig = BasisConfig(), ridge: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """Ridge-regularised best-fit basis weights of a discrete trajectory."""
    traj = as_trajectory(traj)
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two waypoints")
    tau = sample_times(len(traj))
    a = normal_matrix(tau, basis, ridge)
    rhs = basis_matrix(tau, basis).T @ traj  # (M, 2): x and y solved together
    w = cho_solve(cho_factor(a, lower=True), rhs)
    return np.concatenate([w[:, 0], w[:, 1]])


def split_weights(w, cfg: BasisConfig) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (cfg.weight_dim,):
        raise ValueError(f"weights have shape {w.shape}, expected ({cfg.weight_dim},)")
    return w[: cfg.num_basis], w[cfg.num_basis :]


def combine(k, w, cfg: BasisConfig) -> np.ndarray:
    """Points ``(k @ wx, k @ wy)`` for precomputed basis rows ``k``.

    Each row is summed on its own, so a point's value does not depend on how
    many other points are evaluated with it (BLAS products can differ in the
    last bit).
    """
    wx, wy = split_weights(w, cfg)
    return np.column_stack([(k * wx).sum(axis=1), (k * wy).sum(axis=1)])


def reconstruct_many(w, cfg: BasisConfig, tau) -> np.ndarray:
    """Points of the continuous trajectory at each ``tau``, shape ``(n, 2)``."""
    return combine(basis_matrix(tau, cfg), w, cfg)


def reconstruct(w, cfg: BasisConfig, tau: float) -> tuple[float, float]:
    x, y = reconstruct_many(w, cfg, [tau])[0]
    return float(x), float(y)


def discretise(w, cfg: BasisConfig, n: int = 100) -> np.ndarray:
    if n < 2:
        raise ValueError("discretisation needs at least two points")
    return reconstruct_many(w, cfg, np.linspace(0.0, 1.0, n))


# --- trajectory CSV: header traj_id,t,x,y; t runs 1..T per trajectory ---

CSV_HEADER = ["traj_id", "t", "x", "y"]


class TrajectoryFormatError(ValueError):
    pass


def write_trajectories(path: str | os.PathLike, trajectories: Mapping[str, np.ndarray] | list) -> None:
    if not isinstance(trajectories, Mapping):
        trajectories = {str(i): t for i, t in enumerate(trajectories)}
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for tid in sorted(trajectories, key=_traj_sort_key):
            for t, (x, y) in enumerate(as_trajectory(trajectories[tid]), start=1):
                writer.writerow([tid, t, repr(float(x)), repr(float(y))])


def _traj_sort_key(tid):
    s = str(tid)
    return (0, int(s), s) if s.isdigit() else (1, 0, s)


def read_trajectories(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Trajectories keyed by id, in file order."""
    out: dict[str, list] = {}
    last_t: dict[str, int] = {}
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise TrajectoryFormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise TrajectoryFormatError(f"{path}:{lineno}: expected 4 fields")
            tid = row[0]
            try:
                t = int(row[1])
                x, y = float(row[2]), float(row[3])
            except ValueError as exc:
                raise TrajectoryFormatError(f"{path}:{lineno}: {exc}") from None
            if t != last_t.get(tid, 0) + 1:
                raise TrajectoryFormatError(f"{path}:{lineno}: timestep {t} out of sequence for {tid!r}")
            last_t[tid] = t
            out.setdefault(tid, []).append((x, y))
    return {tid: as_trajectory(pts) for tid, pts in out.items()}
