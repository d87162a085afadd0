"""Run reports, delimited MTD tables, figures and SVG map plots.

The JSON report is meant to be byte-reproducible for fixed seeds, so anything
that varies between identical runs (wall-clock durations) is written to a
separate ``*.timing.json`` sidecar next to it.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .grid import OccupancyGrid

REPORT_FORMAT = "trajmdn-run-report"
REPORT_VERSION = 1
MTD_COLUMNS = ["variant", "map_id", "source", "index", "hausdorff", "frechet", "dtw"]


def _per_map(rows, kinds):
    by_map = {}
    for r in rows:
        by_map.setdefault(r["map_id"], []).append(r)
    out = {}
    for map_id in sorted(by_map):
        rs = by_map[map_id]
        out[map_id] = {k: [r[k] for r in rs] for k in kinds}
        out[map_id]["mean"] = {k: float(np.mean(out[map_id][k])) for k in kinds}
    return out


def _acceptance_summary(maps):
    rates = [m["acceptance_rate"] for m in maps]
    return {
        "per_map_min": min(rates) if rates else None,
        "per_map_median": float(np.median(rates)) if rates else None,
        "per_map_max": max(rates) if rates else None,
        "failed_maps": sorted(m["map_id"] for m in maps if m["failure"]),
    }


def build_run_report(evaluation: dict, config: dict, seed: int) -> dict:
    """Wrap an evaluation result with per-map breakdowns and a config echo."""
    kinds = evaluation["kinds"]
    variants = {}
    for name, v in evaluation["variants"].items():
        variants[name] = {
            "family": v["family"],
            "mean_mtd": v["mean_mtd"],
            "acceptance": {**v["acceptance"], **_acceptance_summary(v["maps"])},
            "maps": v["maps"],
            "per_map_mtd": _per_map(v["rows"], kinds),
            "rows": v["rows"],
        }
    base = evaluation["baseline"]
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "seed": seed,
        "config": config,
        "kinds": kinds,
        "test_map_ids": evaluation["test_map_ids"],
        "variants": variants,
        "baseline": {
            "mean_mtd": base["mean_mtd"],
            "per_map_mtd": _per_map(base["rows"], kinds),
            "rows": base["rows"],
        },
    }


def timing_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".timing.json")


def write_report(report: dict, path, durations: dict | None = None) -> None:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if durations is not None:
        timing_path(path).write_text(json.dumps(durations, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a run report")
    return report


def mtd_rows(report: dict):
    """Every generated and baseline row, tagged with its variant name."""
    for name in sorted(report["variants"]):
        for r in report["variants"][name]["rows"]:
            yield {"variant": name, **r}
    for r in report["baseline"]["rows"]:
        yield {"variant": "baseline", **r}


def write_mtd_csv(report: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MTD_COLUMNS)
        for r in mtd_rows(report):
            writer.writerow([r["variant"], r["map_id"], r["source"], r["index"]] + [repr(float(r[k])) for k in MTD_COLUMNS[4:]])


def render_mtd_figure(report: dict, path) -> None:
    """Grouped bars of mean MTD per distance kind, one group per variant plus the baseline."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = report["kinds"]
    names = sorted(report["variants"])
    means = {n: report["variants"][n]["mean_mtd"] for n in names}
    means["baseline"] = report["baseline"]["mean_mtd"]
    labels = names + ["baseline"]

    fig, axes = plt.subplots(1, len(kinds), figsize=(3.2 * len(kinds), 3.0))
    for ax, kind in zip(np.atleast_1d(axes), kinds):
        vals = [means[n][kind] if means[n][kind] is not None else np.nan for n in labels]
        colors = ["C0", "C1", "C2", "C4"][: len(names)] + ["0.6"]
        ax.bar(range(len(labels)), vals, color=colors)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_title(f"{kind} MTD", fontsize=9)
        ax.spines[["top", "right"]].set_visible(False)
    fig.tight_layout()
    # no timestamp or version metadata, so the bytes only depend on the data
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


# ----------------------------------------------------------------------------
# SVG


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def render_svg(
    grid: OccupancyGrid,
    ground_truth: Sequence = (),
    generated: Sequence = (),
    cell: int = 10,
) -> str:
    """SVG 1.1 drawing of a map with trajectories.

    One ``rect`` per occupied cell, one ``polyline`` and one end marker per
    trajectory. Ground truth is drawn in grey, generated trajectories in blue.
    """
    w, h = grid.cols * cell, grid.rows * cell
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" style="background-color:#ffffff">',
        '<g class="occupied" fill="#333333">',
    ]
    rows, cols = np.nonzero(grid.cells)
    for r, c in zip(rows.tolist(), cols.tolist()):
        out.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}"/>')
    out.append("</g>")
    for group, trajs, color in (("ground-truth", ground_truth, "#888888"), ("generated", generated, "#1f77b4")):
        if len(trajs) == 0:
            continue
        out.append(f'<g class="{escape(group)}">')
        for traj in trajs:
            pts = np.asarray(traj, dtype=np.float64).reshape(-1, 2) * cell
            coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            x, y = pts[-1]
            out.append(f'<circle class="endpoint" cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(cell * 0.3)}" fill="{color}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, grid: OccupancyGrid, ground_truth=(), generated=(), cell: int = 10) -> None:
    Path(path).write_text(render_svg(grid, ground_truth, generated, cell), encoding="utf-8")


def sibling(path, suffix: str) -> str:
    """``report.json`` -> ``report<suffix>``."""
    root, _ = os.path.splitext(os.fspath(path))
    return root + suffix
