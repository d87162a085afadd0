"""Binary occupancy grids and the world frame shared with trajectories.

World coordinates are in cell units: x runs along columns, y along rows, and
cell ``(r, c)`` covers ``x in [c, c+1)``, ``y in [r, r+1)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class GridFormatError(ValueError):
    """Raised when an ``.occ`` file does not follow the map format."""


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Row-major binary map, 1 = occupied, 0 = free."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8, copy=True)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError(f"grid must be a non-empty 2-D array, got shape {cells.shape}")
        if np.any(cells > 1):
            raise ValueError("grid cells must be 0 or 1")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]

    @property
    def num_occupied(self) -> int:
        return int(self.cells.sum())

    @property
    def num_free(self) -> int:
        return self.cells.size - self.num_occupied

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.cells.shape, self.cells.tobytes()))


def format_grid(grid: OccupancyGrid) -> str:
    lines = [f"{grid.rows} {grid.cols}"]
    lines.extend("".join("1" if v else "0" for v in row) for row in grid.cells)
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> OccupancyGrid:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridFormatError("empty map file")
    header = lines[0].split(" ")
    if len(header) != 2 or not all(h.isdigit() for h in header):
        raise GridFormatError(f"bad header {lines[0]!r}, expected '<rows> <cols>'")
    rows, cols = int(header[0]), int(header[1])
    if rows < 1 or cols < 1:
        raise GridFormatError("grid dimensions must be positive")
    body = lines[1:]
    if len(body) != rows:
        raise GridFormatError(f"expected {rows} rows, found {len(body)}")
    cells = np.empty((rows, cols), dtype=np.uint8)
    for r, line in enumerate(body):
        if len(line) != cols:
            raise GridFormatError(f"row {r} has {len(line)} characters, expected {cols}")
        if set(line) - {"0", "1"}:
            raise GridFormatError(f"row {r} contains characters other than '0'/'1'")
        cells[r] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
    return OccupancyGrid(cells)


def load_grid(path: str | os.PathLike) -> OccupancyGrid:
    with open(path, encoding="ascii", newline="") as fh:
        return parse_grid(fh.read())


def save_grid(grid: OccupancyGrid, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(format_grid(grid))


def occupied_points(grid: OccupancyGrid) -> np.ndarray:
    """Centers of occupied cells as an ``(I, 2)`` array of ``(x, y)``."""
    r, c = np.nonzero(grid.cells)
    return np.column_stack([c + 0.5, r + 0.5]).astype(np.float64)


def free_cells(grid: OccupancyGrid) -> np.ndarray:
    """``(K, 2)`` array of ``(row, col)`` indices of free cells, row-major order."""
    return np.argwhere(grid.cells == 0)


def occupied_mask(grid: OccupancyGrid, points) -> np.ndarray:
    """Vectorised occupancy lookup; out-of-bounds and non-finite points count as occupied."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    out = np.ones(len(pts), dtype=bool)
    finite = np.all(np.isfinite(pts), axis=1)
    c = np.floor(pts[finite, 0])
    r = np.floor(pts[finite, 1])
    inside = (c >= 0) & (c < grid.cols) & (r >= 0) & (r < grid.rows)
    idx = np.flatnonzero(finite)[inside]
    out[idx] = grid.cells[r[inside].astype(np.intp), c[inside].astype(np.intp)] == 1
    return out


def is_occupied(grid: OccupancyGrid, point) -> bool:
    return bool(occupied_mask(grid, point)[0])
