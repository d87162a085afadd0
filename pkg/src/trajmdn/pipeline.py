"""Training and evaluation flows built from the individual modules."""

from __future__ import annotations

import logging
import zlib

import numpy as np

from .embedding import BasisConfig, RidgeConfig, discretise, embed
from .generator import AcceptanceStats, GenerationConfig, GenerationError, generate_batch
from .grid import occupied_points
from .mdn import MdnConfig, MdnModel, TrainConfig, mean_nll, train
from .metrics import DistanceKind, mtd_all
from .similarity import KernelConfig, gram_matrix
from .synth import Dataset, random_baseline

log = logging.getLogger(__name__)


def training_set(dataset: Dataset, basis: BasisConfig, ridge: RidgeConfig, kernel: KernelConfig):
    """Gram-row features and embedded weights, one ``(phi, [w...])`` pair per map."""
    pointsets = [occupied_points(e.grid) for e in dataset.entries]
    gram = gram_matrix(pointsets, kernel)
    pairs = [(gram[i], [embed(t, basis, ridge) for t in e.trajectories]) for i, e in enumerate(dataset.entries)]
    return pairs, pointsets, gram


def fit(
    dataset: Dataset,
    family: str = "normal",
    *,
    num_components: int = 4,
    basis: BasisConfig = BasisConfig(),
    ridge: RidgeConfig = RidgeConfig(),
    kernel: KernelConfig = KernelConfig(),
    train_cfg: TrainConfig = TrainConfig(),
    **mdn_overrides,
) -> MdnModel:
    pairs, pointsets, _ = training_set(dataset, basis, ridge, kernel)
    cfg = MdnConfig(
        input_dim=len(pairs),
        weight_dim=basis.weight_dim,
        num_components=num_components,
        family=family,
        **mdn_overrides,
    )

    def report(epoch, loss):
        log.info("epoch %d/%d  mean NLL %.6f", epoch, train_cfg.epochs, loss)

    model = train(
        pairs,
        cfg,
        train_cfg,
        basis=basis,
        ridge=ridge,
        kernel=kernel,
        training_maps=pointsets,
        training_map_ids=dataset.map_ids,
        callback=report,
    )
    model.final_nll = mean_nll(model, pairs)
    return model


def map_seed(seed: int, map_id: str) -> np.random.Generator:
    """Generator keyed on (seed, map id): results do not depend on map order."""
    return np.random.default_rng([seed, zlib.crc32(map_id.encode("utf-8"))])


def generate_trajectories(model: MdnModel, grid, count: int, points: int, cfg: GenerationConfig, rng):
    """``count`` valid trajectories discretised to ``points`` waypoints, plus stats."""
    ws, stats = generate_batch(model, grid, cfg, count, rng)
    return [discretise(w, model.basis, points) for w in ws], ws, stats


def _mean(values):
    return float(np.mean(values)) if values else None


def evaluate(
    models: dict,
    test: Dataset,
    *,
    num: int = 50,
    points: int = 100,
    seed: int = 0,
    gen_cfg: GenerationConfig = GenerationConfig(),
) -> dict:
    """MTD of generated and random-baseline trajectories for every test map.

    Returns a JSON-ready report. Map order is sorted by id. The accepted
    trajectories themselves are under ``"generated"`` as
    ``{variant: {map_id: [array, ...]}}``, which is not JSON-ready.
    """
    kinds = [k.value for k in DistanceKind]
    variants, generated = {}, {}
    for name, model in models.items():
        rows, maps = [], []
        total = AcceptanceStats()
        generated[name] = {}
        for entry in sorted(test.entries, key=lambda e: e.map_id):
            rng = map_seed(seed, entry.map_id)
            try:
                trajs, _, stats = generate_trajectories(model, entry.grid, num, points, gen_cfg, rng)
                failed = None
            except GenerationError as exc:
                trajs = [discretise(w, model.basis, points) for w in exc.accepted]
                stats = AcceptanceStats(len(exc.accepted), exc.attempts)
                failed = str(exc)
            generated[name][entry.map_id] = trajs
            total.accepted += stats.accepted
            total.attempts += stats.attempts
            for k, traj in enumerate(trajs):
                rows.append({"map_id": entry.map_id, "source": "generated", "index": k, **mtd_all(traj, entry.trajectories)})
            maps.append({
                "map_id": entry.map_id,
                "accepted": stats.accepted,
                "attempts": stats.attempts,
                "acceptance_rate": stats.acceptance_rate,
                "failure": failed,
            })
        variants[name] = {
            "family": model.config.family,
            "rows": rows,
            "maps": maps,
            "acceptance": {
                "accepted": total.accepted,
                "attempts": total.attempts,
                "rate": total.acceptance_rate,
            },
            "mean_mtd": {k: _mean([r[k] for r in rows]) for k in kinds},
        }

    baseline_rows = []
    for entry in sorted(test.entries, key=lambda e: e.map_id):
        rng = map_seed(seed + 1, entry.map_id)
        for k in range(num):
            walk = random_baseline(entry.grid, points, rng)
            baseline_rows.append({"map_id": entry.map_id, "source": "random", "index": k, **mtd_all(walk, entry.trajectories)})

    return {
        "kinds": kinds,
        "test_map_ids": sorted(test.map_ids),
        "variants": variants,
        "baseline": {
            "rows": baseline_rows,
            "mean_mtd": {k: _mean([r[k] for r in baseline_rows]) for k in kinds},
        },
        "generated": generated,
    }
