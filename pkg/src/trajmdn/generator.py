"""Rejection sampling of map-conditioned trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import BasisConfig, basis_matrix, combine, reconstruct_many
from .grid import OccupancyGrid, occupied_mask, occupied_points
from .mdn import MdnModel, forward, sample_weights
from .similarity import query_feature


class GenerationError(RuntimeError):
    """No valid trajectory was found within the attempt budget."""

    def __init__(self, message, attempts, accepted=()):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = list(accepted)


@dataclass(frozen=True)
class GenerationConfig:
    num_validity_checks: int = 100
    max_attempts: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_validity_checks < 2:
            raise ValueError("need at least two validity checks")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")


@dataclass
class AcceptanceStats:
    accepted: int = 0
    attempts: int = 0
    per_call: list = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


def check_times(cfg: GenerationConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, cfg.num_validity_checks)


def is_valid(w, basis: BasisConfig, grid: OccupancyGrid, cfg: GenerationConfig = GenerationConfig()) -> bool:
    """True when every checked point of the trajectory lies in a free, in-bounds cell."""
    points = reconstruct_many(w, basis, check_times(cfg))
    return not occupied_mask(grid, points).any()


def _query_params(model: MdnModel, grid: OccupancyGrid):
    pts = occupied_points(grid)
    if len(pts) == 0:
        # An empty map has no Hausdorff distance; fall back to the least similar value.
        phi = np.full(len(model.training_maps), np.finfo(np.float64).tiny)
    else:
        phi = query_feature(pts, model.training_maps, model.kernel).values
    # Eval-mode forward is deterministic, so one call serves every attempt.
    return forward(model, phi, mode="eval")


def _sample_valid(params, model, grid, cfg, rng):
    k = basis_matrix(check_times(cfg), model.basis)
    for attempt in range(1, cfg.max_attempts + 1):
        w = sample_weights(params, rng)
        points = combine(k, w, model.basis)
        if not occupied_mask(grid, points).any():
            return w, attempt
    raise GenerationError(
        f"no valid trajectory after {cfg.max_attempts} attempts", attempts=cfg.max_attempts
    )


def generate(model: MdnModel, grid: OccupancyGrid, cfg: GenerationConfig = GenerationConfig(), rng=None):
    """First valid sampled weight vector for ``grid``; returns ``(w, attempts)``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    return _sample_valid(_query_params(model, grid), model, grid, cfg, rng)


def generate_batch(model: MdnModel, grid: OccupancyGrid, cfg: GenerationConfig, count: int, rng=None):
    """``count`` valid weight vectors plus acceptance statistics.

    On failure the raised :class:`GenerationError` carries the trajectories
    accepted so far and the total attempt count.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    stats = AcceptanceStats()
    params = _query_params(model, grid)
    out = []
    for _ in range(count):
        try:
            w, attempts = _sample_valid(params, model, grid, cfg, rng)
        except GenerationError as exc:
            stats.attempts += exc.attempts
            raise GenerationError(
                f"generated {len(out)} of {count} trajectories; {exc}",
                attempts=stats.attempts,
                accepted=out,
            ) from None
        out.append(w)
        stats.accepted += 1
        stats.attempts += attempts
        stats.per_call.append(attempts)
    return out, stats
