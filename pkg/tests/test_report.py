import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import trajmdn.pipeline as pipeline
from trajmdn.embedding import embed
from trajmdn.generator import GenerationConfig
from trajmdn.report import (
    MTD_COLUMNS,
    build_run_report,
    load_report,
    render_mtd_figure,
    render_svg,
    timing_path,
    write_mtd_csv,
    write_report,
)
from trajmdn.synth import SynthParams, synth_dataset

from .models import BASIS, fixed_model

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def test_set():
    return synth_dataset(SynthParams(num_maps=3, rows=20, cols=20, min_room_size=5, trajectories_per_map=4, seed=11))


@pytest.fixture(scope="module")
def model(test_set):
    # one component per map, centred on that map's first route
    centres = [embed(e.trajectories[0], BASIS) for e in test_set]
    return fixed_model(centres, 0.05, [e.grid for e in test_set])


@pytest.fixture(scope="module")
def evaluation(test_set, model):
    return pipeline.evaluate({"normal": model}, test_set, num=3, seed=2, gen_cfg=GenerationConfig(max_attempts=300))


def test_aggregates_match_rows(evaluation, test_set):
    report = build_run_report(evaluation, {"num": 3}, 2)
    for block in list(report["variants"].values()) + [report["baseline"]]:
        rows = block["rows"]
        for kind in report["kinds"]:
            if rows:
                assert abs(block["mean_mtd"][kind] - np.mean([r[kind] for r in rows])) <= 1e-9
        for map_id, per in block["per_map_mtd"].items():
            for kind in report["kinds"]:
                mine = [r[kind] for r in rows if r["map_id"] == map_id]
                assert per[kind] == mine
                assert abs(per["mean"][kind] - np.mean(mine)) <= 1e-9
    assert report["test_map_ids"] == sorted(test_set.map_ids)


def test_baseline_rows_for_every_map(evaluation, test_set):
    rows = evaluation["baseline"]["rows"]
    for map_id in test_set.map_ids:
        assert sum(r["map_id"] == map_id for r in rows) == 3
    assert all(r["source"] == "random" for r in rows)


def test_acceptance_bookkeeping(evaluation):
    v = evaluation["variants"]["normal"]
    assert not any(m["failure"] for m in v["maps"])
    assert v["acceptance"]["accepted"] == sum(m["accepted"] for m in v["maps"])
    assert v["acceptance"]["attempts"] == sum(m["attempts"] for m in v["maps"])
    assert len(v["rows"]) == v["acceptance"]["accepted"]
    for m in v["maps"]:
        assert len(evaluation["generated"]["normal"][m["map_id"]]) == m["accepted"]


def test_exact_ground_truth_has_zero_mtd(test_set, model, monkeypatch):
    def copy_ground_truth(model, grid, count, points, cfg, rng):
        entry = next(e for e in test_set if e.grid is grid)
        trajs = [entry.trajectories[0].copy() for _ in range(count)]
        from trajmdn.generator import AcceptanceStats
        return trajs, [], AcceptanceStats(count, count)

    monkeypatch.setattr(pipeline, "generate_trajectories", copy_ground_truth)
    result = pipeline.evaluate({"normal": model}, test_set, num=2)
    rows = result["variants"]["normal"]["rows"]
    assert rows and all(r[k] == 0.0 for r in rows for k in result["kinds"])
    assert result["variants"]["normal"]["acceptance"]["rate"] == 1.0


def test_failed_maps_are_reported(test_set, model):
    result = pipeline.evaluate({"normal": model}, test_set, num=40, gen_cfg=GenerationConfig(max_attempts=1))
    report = build_run_report(result, {}, 0)
    acc = report["variants"]["normal"]["acceptance"]
    failed = [m["map_id"] for m in result["variants"]["normal"]["maps"] if m["failure"]]
    assert failed and acc["failed_maps"] == sorted(failed)
    assert acc["per_map_min"] <= acc["per_map_median"] <= acc["per_map_max"]


def test_report_files(evaluation, tmp_path):
    report = build_run_report(evaluation, {"num": 3}, 2)
    path = tmp_path / "run.json"
    write_report(report, path, {"evaluate": 1.5})
    first = path.read_bytes()
    write_report(report, path, {"evaluate": 9.0})
    assert path.read_bytes() == first
    assert json.loads(timing_path(path).read_text()) == {"evaluate": 9.0}
    assert load_report(path) == json.loads(first)
    bogus = tmp_path / "x.json"
    bogus.write_text("{}")
    with pytest.raises(ValueError):
        load_report(bogus)

    csv_path = tmp_path / "mtd.csv"
    write_mtd_csv(report, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].split(",") == MTD_COLUMNS
    n_rows = len(report["variants"]["normal"]["rows"]) + len(report["baseline"]["rows"])
    assert len(lines) == 1 + n_rows
    first_row = lines[1].split(",")
    assert float(first_row[4]) == report["variants"]["normal"]["rows"][0]["hausdorff"]


def test_figure_is_png_and_deterministic(evaluation, tmp_path):
    report = build_run_report(evaluation, {}, 2)
    render_mtd_figure(report, tmp_path / "a.png")
    render_mtd_figure(report, tmp_path / "b.png")
    data = (tmp_path / "a.png").read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert data == (tmp_path / "b.png").read_bytes()


def test_svg_structure(test_set):
    e = test_set.entries[0]
    gen = [t + 0.1 for t in e.trajectories[:2]]
    text = render_svg(e.grid, e.trajectories, gen, cell=8)
    root = ET.fromstring(text)
    assert root.tag == SVG + "svg" and root.get("version") == "1.1"
    assert root.get("width") == str(e.grid.cols * 8) and root.get("height") == str(e.grid.rows * 8)
    occupied = root.find(f"{SVG}g[@class='occupied']")
    assert len(occupied.findall(SVG + "rect")) == int(e.grid.cells.sum())
    gt = root.find(f"{SVG}g[@class='ground-truth']")
    gn = root.find(f"{SVG}g[@class='generated']")
    assert len(gt.findall(SVG + "polyline")) == len(e.trajectories)
    assert len(gn.findall(SVG + "polyline")) == 2
    assert len(gn.findall(SVG + "circle")) == 2
    assert gt.find(SVG + "polyline").get("stroke") != gn.find(SVG + "polyline").get("stroke")
    pts = gt.find(SVG + "polyline").get("points").split()
    assert len(pts) == len(e.trajectories[0])
    assert text == render_svg(e.grid, e.trajectories, gen, cell=8)


def test_svg_map_only(test_set):
    grid = test_set.entries[1].grid
    root = ET.fromstring(render_svg(grid))
    assert len(list(root.iter(SVG + "rect"))) == int(grid.cells.sum())
    assert not list(root.iter(SVG + "polyline")) and not list(root.iter(SVG + "circle"))
