"""Synthetic indoor maps with simulated trajectories, and dataset I/O.

Maps are laid out on a coarse grid of room slots. Each map carves two or more
rectangular rooms into distinct slots and joins them with L-shaped corridors.
The room in the first occupied slot is the entrance. Trajectories walk from it
along the shortest 8-connected grid path to a jittered centre of another room,
are smoothed by a moving average, and resampled to ``T`` waypoints.
"""

from __future__ import annotations

import heapq
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .embedding import read_trajectories, write_trajectories
from .grid import OccupancyGrid, free_cells, load_grid, occupied_mask, save_grid

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "trajmdn-dataset"
MANIFEST_VERSION = 1


class DatasetError(ValueError):
    """Malformed manifest, missing file, or a trajectory crossing an occupied cell."""


@dataclass(frozen=True)
class SynthParams:
    num_maps: int = 120
    rows: int = 32
    cols: int = 32
    min_rooms: int = 2
    max_rooms: int = 3
    min_room_size: int = 6
    corridor_width: int = 3
    trajectories_per_map: int = 150
    waypoints: int = 100
    smoothing_window: int = 5
    wall_penalty: float = 2.0
    # alternate outbound trips with the same trip back to the entrance
    return_trips: bool = False
    seed: int = 0

    def __post_init__(self):
        counts = (self.num_maps, self.rows, self.cols, self.min_rooms, self.max_rooms,
                  self.min_room_size, self.trajectories_per_map, self.smoothing_window)
        if any(c < 1 for c in counts):
            raise ValueError("synthesis counts must be positive")
        if self.corridor_width < 1:
            raise ValueError("corridor width must be at least 1")
        if self.min_rooms < 2 or self.max_rooms < self.min_rooms:
            raise ValueError("need 2 <= min_rooms <= max_rooms")
        if self.waypoints < 2:
            raise ValueError("trajectories need at least two waypoints")


@dataclass
class DatasetEntry:
    map_id: str
    grid: OccupancyGrid
    trajectories: list = field(default_factory=list)


@dataclass
class Dataset:
    entries: list
    params: dict | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def map_ids(self) -> list[str]:
        return [e.map_id for e in self.entries]

    def by_id(self, map_id) -> DatasetEntry:
        for e in self.entries:
            if e.map_id == map_id:
                return e
        raise KeyError(map_id)


# ----------------------------------------------------------------------------
# maps


def _slot_layout(params: SynthParams):
    per_side = math.ceil(math.sqrt(params.max_rooms))
    inner_r, inner_c = params.rows - 2, params.cols - 2
    slot_h, slot_w = inner_r // per_side, inner_c // per_side
    # one wall cell on each side of a room inside its slot
    if min(slot_h, slot_w) - 2 < params.min_room_size:
        raise ValueError(
            f"a {params.rows}x{params.cols} grid cannot hold {params.max_rooms} rooms "
            f"of size {params.min_room_size}"
        )
    slots = [(1 + i * slot_h, 1 + j * slot_w) for i in range(per_side) for j in range(per_side)]
    return slots, slot_h, slot_w


def _carve_corridor(cells, a, b, width, horizontal_first):
    (ra, ca), (rb, cb) = a, b
    lo = -(width // 2)
    rows, cols = cells.shape

    def band_h(r, c0, c1):
        r0 = min(max(r + lo, 1), rows - 1 - width)
        cells[r0 : r0 + width, min(c0, c1) : max(c0, c1) + 1] = 0

    def band_v(c, r0, r1):
        c0 = min(max(c + lo, 1), cols - 1 - width)
        cells[min(r0, r1) : max(r0, r1) + 1, c0 : c0 + width] = 0

    if horizontal_first:
        band_h(ra, ca, cb)
        band_v(cb, ra, rb)
    else:
        band_v(ca, ra, rb)
        band_h(rb, ca, cb)


def _layout(params: SynthParams, rng):
    slots, slot_h, slot_w = _slot_layout(params)
    n_rooms = int(rng.integers(params.min_rooms, params.max_rooms + 1))
    chosen = sorted(rng.choice(len(slots), size=n_rooms, replace=False).tolist())
    cells = np.ones((params.rows, params.cols), dtype=np.uint8)
    rooms = []
    for s in chosen:
        sr, sc = slots[s]
        # rooms grow symmetrically about the slot centre, so corridors keep fixed lanes
        cr, cc = sr + slot_h // 2, sc + slot_w // 2
        h = int(rng.integers(params.min_room_size, slot_h - 2 + 1))
        w = int(rng.integers(params.min_room_size, slot_w - 2 + 1))
        r0 = max(cr - h // 2, sr + 1)
        c0 = max(cc - w // 2, sc + 1)
        h = min(h, sr + slot_h - 1 - r0)
        w = min(w, sc + slot_w - 1 - c0)
        cells[r0 : r0 + h, c0 : c0 + w] = 0
        rooms.append((r0, c0, h, w, cr, cc))
    centers = [(r[4], r[5]) for r in rooms]
    for a, b in zip(centers, centers[1:]):
        _carve_corridor(cells, a, b, params.corridor_width, bool(rng.integers(0, 2)))
    return OccupancyGrid(cells), [r[:4] for r in rooms], centers


def is_connected(grid: OccupancyGrid) -> bool:
    """Flood fill: every free cell reachable from every other (4-neighbourhood)."""
    free = grid.cells == 0
    if not free.any():
        return False
    _, n = ndimage.label(free)
    return n == 1


def synth_map(params: SynthParams, rng) -> OccupancyGrid:
    return synth_map_with_rooms(params, rng)[0]


def synth_map_with_rooms(params: SynthParams, rng):
    """Grid plus ``(row0, col0, height, width)`` of every carved room."""
    grid, rooms, _ = _layout(params, rng)
    if not is_connected(grid):
        raise AssertionError("synthesised map is not connected")
    return grid, rooms


# ----------------------------------------------------------------------------
# trajectories

_MOVES = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
          (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2))]


def clearance(grid: OccupancyGrid) -> np.ndarray:
    """Euclidean distance from each free cell centre to the nearest occupied cell centre."""
    padded = np.pad(grid.cells == 0, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def shortest_path(grid: OccupancyGrid, start, goal, wall_penalty: float = 0.0) -> list[tuple[int, int]]:
    """Dijkstra over free cells, 8-connected, no diagonal corner cutting.

    With ``wall_penalty > 0`` entering a cell costs ``step * (1 + wall_penalty / clearance)``,
    which keeps paths off the walls.
    """
    cells = grid.cells
    rows, cols = cells.shape
    weight = 1.0 + wall_penalty / np.maximum(clearance(grid), 1.0)
    start, goal = tuple(map(int, start)), tuple(map(int, goal))
    dist = {start: 0.0}
    parent = {}
    heap = [(0.0, start)]
    while heap:
        d, cur = heapq.heappop(heap)
        if cur == goal:
            break
        if d > dist[cur]:
            continue
        r, c = cur
        for dr, dc, cost in _MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or cells[nr, nc]:
                continue
            if dr and dc and (cells[r + dr, c] or cells[r, c + dc]):
                continue
            nd = d + cost * weight[nr, nc]
            if nd < dist.get((nr, nc), math.inf):
                dist[(nr, nc)] = nd
                parent[(nr, nc)] = cur
                heapq.heappush(heap, (nd, (nr, nc)))
    if goal not in dist:
        raise AssertionError(f"no path from {start} to {goal}")
    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    return path[::-1]


def resample(points, n: int) -> np.ndarray:
    """``n`` points evenly spaced by arc length along a polyline."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(pts[:1], n, axis=0)
    targets = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(targets, s, pts[:, 0]), np.interp(targets, s, pts[:, 1])])


def moving_average(points, window: int) -> np.ndarray:
    """Centred moving average; endpoints are kept and the window shrinks near them."""
    pts = np.asarray(points, dtype=np.float64)
    half = window // 2
    out = pts.copy()
    for i in range(1, len(pts) - 1):
        k = min(half, i, len(pts) - 1 - i)
        out[i] = pts[i - k : i + k + 1].mean(axis=0)
    return out


def _path_trajectory(grid, start, goal, params: SynthParams):
    cells = shortest_path(grid, start, goal, params.wall_penalty)
    raw = np.array([(c + 0.5, r + 0.5) for r, c in cells])
    smooth = resample(moving_average(raw, params.smoothing_window), params.waypoints)
    if not occupied_mask(grid, smooth).any():
        return smooth
    return resample(raw, params.waypoints)


def _jittered_center(grid, room, rng):
    r0, c0, h, w = room
    cr, cc = r0 + h // 2, c0 + w // 2
    for _ in range(10):
        r, c = cr + int(rng.integers(-1, 2)), cc + int(rng.integers(-1, 2))
        if grid.cells[r, c] == 0:
            return r, c
    return cr, cc


def synth_trajectories(grid: OccupancyGrid, params: SynthParams, rng, rooms) -> list[np.ndarray]:
    """Trajectories leaving the entrance room (``rooms[0]``) for each other room in turn.

    Start and goal are jittered room centres, so repeated trips along the
    same route differ slightly. With ``params.return_trips`` every other
    trajectory is the way back, which doubles the number of route families.
    """
    if len(rooms) < 2:
        raise ValueError("need at least two rooms")
    paths = {}
    out = []
    for k in range(params.trajectories_per_map):
        trip = k // 2 if params.return_trips else k
        goal_room = rooms[1 + trip % (len(rooms) - 1)]
        start = _jittered_center(grid, rooms[0], rng)
        goal = _jittered_center(grid, goal_room, rng)
        if params.return_trips and k % 2:
            start, goal = goal, start
        if (start, goal) not in paths:
            paths[(start, goal)] = _path_trajectory(grid, start, goal, params)
        out.append(paths[(start, goal)].copy())
    return out


def map_rng(seed: int, index: int):
    """Independent generator per map, so maps can be built in any order."""
    return np.random.default_rng([seed, index])


def map_id_for(index: int) -> str:
    return f"map{index:03d}"


def synth_dataset(params: SynthParams = SynthParams()) -> Dataset:
    entries = []
    for i in range(params.num_maps):
        rng = map_rng(params.seed, i)
        grid, rooms = synth_map_with_rooms(params, rng)
        trajs = synth_trajectories(grid, params, rng, rooms)
        entries.append(DatasetEntry(map_id_for(i), grid, trajs))
    return Dataset(entries, asdict(params))


# ----------------------------------------------------------------------------
# splitting and baseline


def split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded partition by map; both parts keep the original map order."""
    n = len(dataset)
    if n < 2:
        raise ValueError("need at least two maps to split")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = min(max(math.floor(train_fraction * n), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = set(perm[:n_train].tolist())
    train = [e for i, e in enumerate(dataset.entries) if i in train_idx]
    test = [e for i, e in enumerate(dataset.entries) if i not in train_idx]
    return Dataset(train, dataset.params), Dataset(test, dataset.params)


def random_baseline(grid: OccupancyGrid, T: int, rng) -> np.ndarray:
    """4-neighbourhood random walk of ``T`` waypoints over free cell centres."""
    free = free_cells(grid)
    if len(free) == 0:
        raise ValueError("map has no free cell")
    r, c = free[rng.integers(len(free))]
    pts = [(c + 0.5, r + 0.5)]
    for _ in range(T - 1):
        options = [(r + dr, c + dc) for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                   if 0 <= r + dr < grid.rows and 0 <= c + dc < grid.cols and grid.cells[r + dr, c + dc] == 0]
        if options:
            r, c = options[rng.integers(len(options))]
        pts.append((c + 0.5, r + 0.5))
    return np.array(pts, dtype=np.float64)


# ----------------------------------------------------------------------------
# on-disk format


def save_dataset(dataset: Dataset, directory: str | os.PathLike) -> Path:
    """Write ``manifest.json``, ``maps/<id>.occ`` and ``trajectories/<id>.csv``."""
    root = Path(directory)
    (root / "maps").mkdir(parents=True, exist_ok=True)
    (root / "trajectories").mkdir(parents=True, exist_ok=True)
    records = []
    for e in dataset.entries:
        map_rel = f"maps/{e.map_id}.occ"
        traj_rel = f"trajectories/{e.map_id}.csv"
        save_grid(e.grid, root / map_rel)
        write_trajectories(root / traj_rel, e.trajectories)
        records.append({"map_id": e.map_id, "map": map_rel, "trajectories": traj_rel})
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "synth_params": dataset.params,
        "maps": records,
    }
    path = root / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_dataset(manifest_path: str | os.PathLike) -> Dataset:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed manifest ({exc})") from None
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise DatasetError(f"{path}: not an {MANIFEST_FORMAT} manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise DatasetError(f"{path}: unsupported manifest version {manifest.get('version')!r}")
    entries = []
    for rec in manifest.get("maps", []):
        try:
            map_id, map_rel, traj_rel = rec["map_id"], rec["map"], rec["trajectories"]
        except (KeyError, TypeError):
            raise DatasetError(f"{path}: manifest record {rec!r} is incomplete") from None
        map_path, traj_path = path.parent / map_rel, path.parent / traj_rel
        for p in (map_path, traj_path):
            if not p.is_file():
                raise FileNotFoundError(f"{path}: {map_id}: missing file {p}")
        grid = load_grid(map_path)
        trajs = list(read_trajectories(traj_path).values())
        if not trajs:
            raise DatasetError(f"{map_id}: no trajectories")
        for k, t in enumerate(trajs):
            if occupied_mask(grid, t).any():
                raise DatasetError(f"{map_id}: trajectory {k} has a waypoint in an occupied cell")
        entries.append(DatasetEntry(str(map_id), grid, trajs))
    if not entries:
        raise DatasetError(f"{path}: manifest lists no maps")
    return Dataset(entries, manifest.get("synth_params"))
