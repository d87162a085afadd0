"""``trajmdn`` command line: synth, train, generate, evaluate, plot.

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 numerical or
sampling failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .embedding import BasisConfig, RidgeConfig, TrajectoryFormatError, discretise, read_trajectories, write_trajectories
from .generator import GenerationConfig, GenerationError, generate_batch
from .grid import GridFormatError, load_grid
from .mdn import ModelFormatError, TrainConfig, TrainingError, load_model, save_model
from .pipeline import evaluate, fit
from .report import build_run_report, render_mtd_figure, sibling, write_mtd_csv, write_report, write_svg
from .similarity import KernelConfig
from .synth import Dataset, DatasetError, SynthParams, load_dataset, save_dataset, split, synth_dataset

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("trajmdn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def _fraction(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return value


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    overrides = {
        "num_maps": args.num_maps,
        "rows": args.rows,
        "cols": args.cols,
        "min_rooms": args.min_rooms,
        "max_rooms": args.max_rooms,
        "corridor_width": args.corridor_width,
        "trajectories_per_map": args.trajectories_per_map,
        "waypoints": args.waypoints,
        "return_trips": args.return_trips,
        "seed": args.seed,
    }
    try:
        params = SynthParams(**overrides)
        dataset = synth_dataset(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} maps to {args.out}")
    return EXIT_OK


def _split(args, dataset):
    return split(dataset, args.train_frac, args.split_seed)


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    train_set, _ = _split(args, dataset)
    try:
        basis = BasisConfig(args.basis, args.lb if args.lb is not None else BasisConfig.default_length_scale(args.basis))
        ridge = RidgeConfig(args.lam)
        kernel = KernelConfig(args.lh)
        train_cfg = TrainConfig(
            epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr, seed=args.seed
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = fit(
        train_set,
        args.dist,
        num_components=args.components,
        basis=basis,
        ridge=ridge,
        kernel=kernel,
        train_cfg=train_cfg,
    )
    save_model(model, args.out)
    print(f"final mean NLL {model.final_nll:.6f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _gen_config(args) -> GenerationConfig:
    return GenerationConfig(num_validity_checks=args.checks, max_attempts=args.max_attempts, seed=args.seed)


def cmd_generate(args) -> int:
    model = load_model(args.model)
    grid = load_grid(args.map)
    cfg = _gen_config(args)
    ws, stats = generate_batch(model, grid, cfg, args.num, np.random.default_rng(args.seed))
    trajs = [discretise(w, model.basis, args.points) for w in ws]
    write_trajectories(args.out, trajs)
    print(f"acceptance rate {stats.acceptance_rate:.6f} ({stats.accepted}/{stats.attempts})")
    print(f"wrote {len(trajs)} trajectories to {args.out}")
    return EXIT_OK


def _variant_names(paths):
    names = [Path(p).stem for p in paths]
    if len(set(names)) != len(names):
        names = [f"{n}-{i}" for i, n in enumerate(names)]
    return names


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.data)
    models = {name: load_model(p) for name, p in zip(_variant_names(args.model), args.model)}
    if args.maps:
        wanted = set(args.maps)
        missing = wanted - set(dataset.map_ids)
        if missing:
            raise UsageError(f"unknown map ids: {', '.join(sorted(missing))}")
    else:
        # maps none of the models saw during training
        seen = set()
        for m in models.values():
            seen.update(m.training_map_ids)
        wanted = set(dataset.map_ids) - seen
    test = Dataset([e for e in dataset.entries if e.map_id in wanted], dataset.params)
    if not test.entries:
        raise UsageError("no test maps to evaluate")

    started = time.perf_counter()
    result = evaluate(models, test, num=args.num, points=args.points, seed=args.seed, gen_cfg=_gen_config(args))
    elapsed = time.perf_counter() - started
    config = {
        # base names only, so reports from different working directories compare equal
        "models": {n: Path(p).name for n, p in zip(models, args.model)},
        "data": Path(args.data).name,
        "num": args.num,
        "points": args.points,
        "max_attempts": args.max_attempts,
        "num_validity_checks": args.checks,
        "model_configs": {n: _model_echo(m) for n, m in models.items()},
    }
    report = build_run_report(result, config, args.seed)
    write_report(report, args.out, durations={"evaluate_seconds": elapsed})
    write_mtd_csv(report, sibling(args.out, "_mtd.csv"))
    if not args.no_figure:
        render_mtd_figure(report, sibling(args.out, "_mtd.png"))
    if args.trajectories_dir:
        out = Path(args.trajectories_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, per_map in result["generated"].items():
            for map_id, trajs in per_map.items():
                write_trajectories(out / f"{name}_{map_id}.csv", trajs)

    for name in sorted(report["variants"]):
        v = report["variants"][name]
        means = "  ".join(f"{k} {v['mean_mtd'][k]:.4f}" for k in report["kinds"] if v["mean_mtd"][k] is not None)
        print(f"{name} ({v['family']}): {means}  acceptance {v['acceptance']['rate']:.4f}")
    base = report["baseline"]["mean_mtd"]
    print("baseline: " + "  ".join(f"{k} {base[k]:.4f}" for k in report["kinds"]))
    print(f"wrote {args.out}")
    failed = any(v["acceptance"]["failed_maps"] for v in report["variants"].values())
    return EXIT_NUMERIC if failed else EXIT_OK


def _model_echo(model) -> dict:
    return {
        "family": model.config.family,
        "num_components": model.config.num_components,
        "basis": asdict(model.basis),
        "ridge": asdict(model.ridge),
        "kernel": asdict(model.kernel),
        "training_map_ids": list(model.training_map_ids),
    }


def cmd_plot(args) -> int:
    grid = load_grid(args.map)
    gt = [t for p in args.ground_truth for t in read_trajectories(p).values()]
    gen = [t for p in args.generated for t in read_trajectories(p).values()]
    write_svg(args.out, grid, gt, gen, cell=args.cell)
    print(f"wrote {args.out}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    defaults = SynthParams()
    parser = _Parser(prog="trajmdn", description="Occupancy-conditioned trajectory generation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr (default: off)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="synthesise a map/trajectory dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--num-maps", type=_positive(int), default=defaults.num_maps, help="number of maps (default %(default)s)")
    p.add_argument("--seed", type=int, default=defaults.seed, help="random seed (default %(default)s)")
    p.add_argument("--rows", type=_positive(int), default=defaults.rows, help="grid rows (default %(default)s)")
    p.add_argument("--cols", type=_positive(int), default=defaults.cols, help="grid columns (default %(default)s)")
    p.add_argument("--min-rooms", type=_positive(int), default=defaults.min_rooms, help="fewest rooms per map (default %(default)s)")
    p.add_argument("--max-rooms", type=_positive(int), default=defaults.max_rooms, help="most rooms per map (default %(default)s)")
    p.add_argument("--corridor-width", type=_positive(int), default=defaults.corridor_width, help="corridor width in cells (default %(default)s)")
    p.add_argument("--trajectories-per-map", type=_positive(int), default=defaults.trajectories_per_map, help="trajectories per map (default %(default)s)")
    p.add_argument("--waypoints", type=_positive(int), default=defaults.waypoints, help="waypoints per trajectory (default %(default)s)")
    p.add_argument("--return-trips", action="store_true", help="alternate trips out of the entrance room with trips back (default: outbound only)")
    p.set_defaults(func=cmd_synth)

    def add_split(p):
        p.add_argument("--train-frac", type=_fraction, default=0.8, help="fraction of maps used for training (default %(default)s)")
        p.add_argument("--split-seed", type=int, default=0, help="seed of the map split (default %(default)s)")

    p = sub.add_parser("train", help="train a mixture density network on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--dist", choices=["normal", "laplace"], default="normal", help="component family (default %(default)s)")
    p.add_argument("--epochs", type=_positive(int), default=10, help="training epochs (default %(default)s)")
    p.add_argument("--lh", type=_positive(float), default=50.0, help="map-kernel length scale (default %(default)s)")
    p.add_argument("--lb", type=_positive(float), default=None, help=f"basis length scale on [0, 1] (default {BasisConfig.default_length_scale(10):g} for 10 bases)")
    p.add_argument("--components", type=_positive(int), default=4, help="mixture components (default %(default)s)")
    p.add_argument("--basis", type=_positive(int), default=10, help="basis functions per axis (default %(default)s)")
    p.add_argument("--lambda", dest="lam", type=_positive(float), default=1e-4, help="ridge regulariser (default %(default)s)")
    p.add_argument("--batch-size", type=_positive(int), default=32, help="minibatch size (default %(default)s)")
    p.add_argument("--lr", type=_positive(float), default=1e-3, help="Adam learning rate (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="training seed (default %(default)s)")
    add_split(p)
    p.set_defaults(func=cmd_train)

    def add_generation(p):
        p.add_argument("--num", type=_positive(int), default=50, help="trajectories per map (default %(default)s)")
        p.add_argument("--points", type=_positive(int), default=100, help="waypoints per trajectory (default %(default)s)")
        p.add_argument("--seed", type=int, default=0, help="sampling seed (default %(default)s)")
        p.add_argument("--max-attempts", type=_positive(int), default=1000, help="candidates per trajectory (default %(default)s)")
        p.add_argument("--checks", type=_positive(int), default=100, help="validity checks per candidate (default %(default)s)")

    p = sub.add_parser("generate", help="generate trajectories for one map")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--map", required=True, help=".occ map file")
    p.add_argument("--out", required=True, help="output trajectory CSV")
    add_generation(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="MTD report against ground truth and a random-walk baseline")
    p.add_argument("--model", required=True, action="append", help="model file; repeat to compare variants")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="report JSON; the MTD CSV and PNG figure go next to it")
    p.add_argument("--maps", nargs="+", default=None, help="map ids to evaluate (default: maps unseen in training)")
    p.add_argument("--trajectories-dir", default=None, help="also write the generated trajectories here (default: not written)")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG figure (default: figure written)")
    add_generation(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="render a map and trajectories as SVG")
    p.add_argument("--map", required=True, help=".occ map file")
    p.add_argument("--ground-truth", action="append", default=[], help="ground-truth trajectory CSV, repeatable (default: none)")
    p.add_argument("--generated", action="append", default=[], help="generated trajectory CSV, repeatable (default: none)")
    p.add_argument("--out", required=True, help="output SVG")
    p.add_argument("--cell", type=_positive(int), default=10, help="pixels per cell (default %(default)s)")
    p.set_defaults(func=cmd_plot)
    return parser


IO_ERRORS = (OSError, GridFormatError, TrajectoryFormatError, ModelFormatError, DatasetError, json.JSONDecodeError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"trajmdn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, GenerationError, FloatingPointError) as exc:
        print(f"trajmdn {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except IO_ERRORS as exc:
        print(f"trajmdn {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
